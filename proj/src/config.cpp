#include "dropkit/config.hpp"

#include <cstdlib>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

using nlohmann::json;

std::uint64_t Config::seed_for(std::string_view stage) const {
  if (auto it = seed_overrides.find(std::string(stage)); it != seed_overrides.end()) return it->second;
  return derive_seed(seed, stage);
}

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("unknown key '" + k + "' in " + where);
}

HttpEndpoint parse_endpoint(const json& j) {
  HttpEndpoint e;
  e.base_url = j.value("base_url", "");
  e.model = j.value("model", "");
  e.path = j.value("path", "");
  e.timeout_seconds = j.value("timeout_seconds", 60);
  if (j.contains("api_key_env")) {
    const auto name = j["api_key_env"].get<std::string>();
    if (auto v = env(name.c_str())) e.api_key = *v;
  }
  return e;
}

ClientSpec parse_client(const json& j, const std::string& where) {
  ClientSpec c;
  c.kind = j.value("kind", "mock");
  if (c.kind == "mock") {
    if (!j.contains("mock")) throw ConfigError(where + ": mock client needs a \"mock\" script");
    c.mock = parse_mock_script(j["mock"].dump());
  } else if (c.kind == "http") {
    c.endpoint = parse_endpoint(j);
  } else {
    throw ConfigError(where + ": unknown client kind '" + c.kind + "'");
  }
  return c;
}

void apply_llm_env(ClientSpec& c) {
  auto url = env("DROPKIT_LLM_BASE_URL");
  if (url) {
    c.kind = "http";
    c.endpoint.base_url = *url;
  }
  if (c.kind != "http") return;
  if (auto key = env("DROPKIT_LLM_API_KEY")) c.endpoint.api_key = *key;
  if (auto model = env("DROPKIT_LLM_MODEL")) c.endpoint.model = *model;
}

}  // namespace

Config default_config() {
  Config c;
  c.text.mock.kind = "length_heuristic";
  c.email.mock.kind = "echo_email";
  return c;
}

Config parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Config c = default_config();
  try {
    check_keys(j, {"seed", "clients", "policy", "mail", "seeds", "paths", "train"}, "config");
    c.seed = j.value("seed", c.seed);

    if (j.contains("seeds")) {
      if (!j["seeds"].is_object()) throw ConfigError("seeds must be an object");
      for (const auto& [k, v] : j["seeds"].items()) c.seed_overrides[k] = v.get<std::uint64_t>();
    }

    if (j.contains("clients")) {
      const auto& cl = j["clients"];
      check_keys(cl, {"text", "email", "embedding", "in_flight", "retry_budget", "temperature", "max_tokens", "cache"},
                 "clients");
      if (cl.contains("text")) c.text = parse_client(cl["text"], "clients.text");
      if (cl.contains("email")) c.email = parse_client(cl["email"], "clients.email");
      if (cl.contains("embedding")) {
        const auto& e = cl["embedding"];
        c.embedding.kind = e.value("kind", "none");
        c.embedding.dimension = e.value("dimension", c.embedding.dimension);
        if (c.embedding.kind == "http") c.embedding.endpoint = parse_endpoint(e);
        else if (c.embedding.kind != "none" && c.embedding.kind != "mock")
          throw ConfigError("clients.embedding: unknown kind '" + c.embedding.kind + "'");
      }
      c.in_flight = cl.value("in_flight", c.in_flight);
      c.retry_budget = cl.value("retry_budget", c.retry_budget);
      c.decoding.temperature = cl.value("temperature", c.decoding.temperature);
      c.decoding.max_tokens = cl.value("max_tokens", c.decoding.max_tokens);
      c.cache = cl.value("cache", c.cache);
    }

    if (j.contains("policy")) {
      const auto& p = j["policy"];
      check_keys(p, {"few_shot_min", "fine_tune_min", "fallback", "stage", "strategy", "k", "probability_floor",
                     "cooldown_days"},
                 "policy");
      c.policy.few_shot_min = p.value("few_shot_min", c.policy.few_shot_min);
      c.policy.fine_tune_min = p.value("fine_tune_min", c.policy.fine_tune_min);
      c.policy.fallback_enabled = p.value("fallback", c.policy.fallback_enabled);
      if (p.contains("stage") && !p["stage"].is_null()) {
        const auto s = p["stage"].get<std::string>();
        c.forced_stage = parse_stage(s);
        if (!c.forced_stage) throw ConfigError("policy.stage: unknown stage '" + s + "'");
      }
      if (p.contains("strategy")) {
        const auto s = p["strategy"].get<std::string>();
        auto kind = parse_strategy_kind(s);
        if (!kind) throw ConfigError("policy.strategy: unknown strategy '" + s + "'");
        c.strategy.kind = *kind;
      }
      c.strategy.k = p.value("k", c.strategy.k);
      c.probability_floor = p.value("probability_floor", c.probability_floor);
      c.cooldown_days = p.value("cooldown_days", c.cooldown_days);
    }

    if (j.contains("mail")) {
      const auto& m = j["mail"];
      check_keys(m, {"sink", "host", "port", "from", "tls"}, "mail");
      c.mail_sink = m.value("sink", c.mail_sink);
      if (c.mail_sink != "file" && c.mail_sink != "smtp") throw ConfigError("mail.sink must be file or smtp");
      c.smtp.host = m.value("host", "");
      c.smtp.port = m.value("port", c.smtp.port);
      c.smtp.from = m.value("from", "");
      c.smtp.tls = m.value("tls", c.smtp.tls);
    }

    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, {"workspace", "prediction_template", "email_template"}, "paths");
      c.workspace = p.value("workspace", "");
      c.prediction_template = p.value("prediction_template", "");
      c.email_template = p.value("email_template", "");
    }

    if (j.contains("train")) {
      const auto& t = j["train"];
      check_keys(t, {"hidden", "epochs", "learning_rate", "batch_size", "momentum", "features", "split_ratio"}, "train");
      if (t.contains("hidden")) c.train.hidden = t["hidden"].get<std::vector<int>>();
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.momentum = t.value("momentum", c.train.momentum);
      const auto f = t.value("features", std::string("handcrafted"));
      if (f == "handcrafted") c.features = FeatureMode::handcrafted;
      else if (f == "embedding") c.features = FeatureMode::embedding;
      else throw ConfigError("train.features must be handcrafted or embedding");
      c.split_ratio = t.value("split_ratio", c.split_ratio);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  apply_llm_env(c.text);
  apply_llm_env(c.email);
  if (auto url = env("DROPKIT_EMBED_BASE_URL")) {
    c.embedding.kind = "http";
    c.embedding.endpoint.base_url = *url;
  }
  if (c.embedding.kind == "http") {
    if (auto key = env("DROPKIT_EMBED_API_KEY")) c.embedding.endpoint.api_key = *key;
    if (auto model = env("DROPKIT_EMBED_MODEL")) c.embedding.endpoint.model = *model;
  }
  if (auto smtp = SmtpConfig::from_env()) {
    if (smtp->from.empty()) smtp->from = c.smtp.from;
    c.smtp = *smtp;
  }

  c.policy.validate();
  c.strategy.validate();
  if (c.in_flight == 0) throw ConfigError("clients.in_flight must be >= 1");
  if (c.retry_budget < 0) throw ConfigError("clients.retry_budget must be >= 0");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) throw ConfigError("train.split_ratio must be in (0, 1)");
  if (c.cooldown_days < 0) throw ConfigError("policy.cooldown_days must be >= 0");
  return c;
}

Config load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::shared_ptr<TextModelClient> make_text_client(const ClientSpec& spec,
                                                  const std::vector<PredictionInstance>* truth,
                                                  const std::optional<std::filesystem::path>& cache_dir) {
  std::shared_ptr<TextModelClient> client;
  if (spec.kind == "http") {
    if (spec.endpoint.base_url.empty()) throw ConfigError("http client needs a base_url (or DROPKIT_LLM_BASE_URL)");
    client = std::make_shared<HttpChatClient>(spec.endpoint);
  } else {
    client = make_mock_client(spec.mock, truth);
  }
  if (!cache_dir) return client;
  return std::make_shared<CachingTextClient>(client, cache_dir);
}

std::unique_ptr<EmbeddingClient> make_embedding_client(const EmbeddingSpec& spec, std::uint64_t seed) {
  if (spec.kind == "none") return nullptr;
  if (spec.kind == "mock") return std::make_unique<MockEmbeddingClient>(spec.dimension, seed);
  if (spec.endpoint.base_url.empty()) throw ConfigError("http embedding client needs a base_url");
  return std::make_unique<HttpEmbeddingClient>(spec.endpoint, spec.dimension);
}

}  // namespace dropkit
