#include "dropkit/predictors.hpp"

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

using nlohmann::json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::zero_shot: return "zero_shot";
    case Stage::few_shot: return "few_shot";
    case Stage::fine_tuned: return "fine_tuned";
  }
  return "zero_shot";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (auto s : {Stage::zero_shot, Stage::few_shot, Stage::fine_tuned})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

namespace {

PredictionOutcome ask_for_verdict(const std::string& prompt, Stage stage, TextModelClient& client,
                                  const ClientCallConfig& config) {
  std::string last_error;
  for (int attempt = 0; attempt <= config.retry_budget; ++attempt) {
    DecodingParams params = config.params;
    params.seed += static_cast<std::uint64_t>(attempt);
    try {
      auto response = client.complete(prompt, params);
      const bool dropout = parse_verdict(response);
      PredictionOutcome outcome;
      outcome.label = dropout;
      outcome.p_dropout = dropout ? 1.0 : 0.0;
      outcome.stage = stage;
      outcome.raw_response = std::move(response);
      outcome.retries = attempt;
      return outcome;
    } catch (const TransportError& e) {
      if (attempt == config.retry_budget) throw;
      last_error = e.what();
    } catch (const MalformedResponse& e) {
      if (attempt == config.retry_budget) throw;
      last_error = e.what();
    }
  }
  throw TransportError(last_error);  // unreachable with retry_budget >= 0
}

}  // namespace

PredictionOutcome zero_shot_predict(const PredictionInstance& instance, TextModelClient& client,
                                    const PromptTemplate& tmpl, int chapter_count,
                                    const ClientCallConfig& config) {
  return ask_for_verdict(render_prompt(tmpl, instance, {}, chapter_count), Stage::zero_shot, client, config);
}

PredictionOutcome few_shot_predict(const PredictionInstance& instance,
                                   const std::vector<PredictionInstance>& pool,
                                   const FewShotStrategy& strategy, TextModelClient& client,
                                   const PromptTemplate& tmpl, int chapter_count,
                                   const ClientCallConfig& config) {
  if (pool.empty()) throw ValidationError("few-shot prediction with an empty example pool");
  auto examples = select_examples(pool, strategy, instance);
  return ask_for_verdict(render_prompt(tmpl, instance, examples, chapter_count), Stage::few_shot,
                         client, config);
}

// ---------------------------------------------------------------------------
// Fine-tuned stage

std::string FineTunedModel::tag() const { return "mlp:" + sha256_hex(save_model(*this)).substr(0, 16); }

FineTunedModel mlp_train(const std::vector<PredictionInstance>& train, const FeaturizerConfig& features,
                         const TrainConfig& hyper, EmbeddingClient* embed) {
  if (train.empty()) throw ValidationError("empty training set");
  FineTunedModel model;
  model.featurizer = Featurizer(features);
  model.hyper = hyper;
  const Eigen::MatrixXd x = model.featurizer.fit_transform(train, embed);
  Eigen::VectorXi y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t j = 0; j < train.size(); ++j)
    y(static_cast<Eigen::Index>(j)) = train[j].label ? kDropoutClass : kRetentionClass;
  auto result = train_mlp<double>(x, y, hyper);
  model.mlp = std::move(result.model);
  model.train_loss = result.final_loss;
  return model;
}

std::vector<PredictionOutcome> finetuned_predict_batch(const FineTunedModel& model,
                                                       const std::vector<PredictionInstance>& instances,
                                                       EmbeddingClient* embed) {
  if (model.featurizer.config().dimension() != model.mlp.input_dim())
    throw DimensionMismatch("featurizer produces " + std::to_string(model.featurizer.config().dimension()) +
                            " features but the model expects " + std::to_string(model.mlp.input_dim()));
  std::vector<PredictionOutcome> out;
  if (instances.empty()) return out;
  const Eigen::MatrixXd p = model.mlp.probabilities(model.featurizer.transform(instances, embed));
  out.reserve(instances.size());
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    PredictionOutcome outcome;
    outcome.p_dropout = p(kDropoutClass, j);
    outcome.label = outcome.p_dropout >= kDecisionThreshold;
    outcome.stage = Stage::fine_tuned;
    out.push_back(std::move(outcome));
  }
  return out;
}

PredictionOutcome finetuned_predict(const FineTunedModel& model, const PredictionInstance& instance,
                                    EmbeddingClient* embed) {
  return finetuned_predict_batch(model, {instance}, embed).front();
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, Eigen::Index r, Eigen::Index c) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != r)
    throw ConfigError("model file: weight matrix has the wrong row count");
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != c) throw ConfigError("model file: ragged weight matrix");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& values, Eigen::Index n) {
  auto v = values.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != n) throw ConfigError("model file: vector has the wrong length");
  return Eigen::Map<Eigen::VectorXd>(v.data(), n);
}

}  // namespace

std::string save_model(const FineTunedModel& model) {
  const auto& fc = model.featurizer.config();
  const auto& st = model.featurizer.standardizer();
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["layer_sizes"] = model.mlp.sizes();
  for (const auto& layer : model.mlp.layers()) {
    j["layers"].push_back({{"weight", matrix_to_json(layer.weight)},
                           {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  j["hyper"] = {{"learning_rate", model.hyper.learning_rate}, {"epochs", model.hyper.epochs},
                {"batch_size", model.hyper.batch_size},       {"momentum", model.hyper.momentum},
                {"seed", model.hyper.seed},                   {"hidden", model.hyper.hidden}};
  j["featurizer"] = {{"mode", std::string(to_string(fc.mode))},
                     {"chapter_count", fc.chapter_count},
                     {"embed_dim", fc.embed_dim},
                     {"embed_tag", fc.embed_tag},
                     {"mean", std::vector<double>(st.mean.data(), st.mean.data() + st.mean.size())},
                     {"scale", std::vector<double>(st.scale.data(), st.scale.data() + st.scale.size())}};
  j["train_loss"] = model.train_loss;
  j["dataset_sha256"] = model.dataset_sha256;
  j["split"] = {{"seed", model.split_seed}, {"ratio", model.split_ratio}};
  return j.dump(1) + "\n";
}

FineTunedModel load_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw ConfigError("not a dropkit model file");
    if (j.at("version").get<int>() != kModelVersion)
      throw ConfigError("unsupported model version " + std::to_string(j.at("version").get<int>()));
    FineTunedModel model;
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    model.mlp = Mlp<double>(sizes);
    const auto& layers = j.at("layers");
    if (layers.size() != model.mlp.layers().size()) throw ConfigError("model file: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = model.mlp.layers()[l];
      layer.weight = matrix_from_json(layers[l].at("weight"), sizes[l + 1], sizes[l]);
      layer.bias = vector_from_json(layers[l].at("bias"), sizes[l + 1]);
    }
    const auto& h = j.at("hyper");
    model.hyper.learning_rate = h.at("learning_rate").get<double>();
    model.hyper.epochs = h.at("epochs").get<int>();
    model.hyper.batch_size = h.at("batch_size").get<int>();
    model.hyper.momentum = h.at("momentum").get<double>();
    model.hyper.seed = h.at("seed").get<std::uint64_t>();
    model.hyper.hidden = h.at("hidden").get<std::vector<int>>();

    const auto& f = j.at("featurizer");
    FeaturizerConfig fc;
    const auto mode = f.at("mode").get<std::string>();
    if (mode == "handcrafted") fc.mode = FeatureMode::handcrafted;
    else if (mode == "embedding") fc.mode = FeatureMode::embedding;
    else throw ConfigError("model file: unknown feature mode '" + mode + "'");
    fc.chapter_count = f.at("chapter_count").get<int>();
    fc.embed_dim = f.at("embed_dim").get<int>();
    fc.embed_tag = f.at("embed_tag").get<std::string>();
    Standardizer<double> st;
    st.mean = vector_from_json(f.at("mean"), fc.dimension());
    st.scale = vector_from_json(f.at("scale"), fc.dimension());
    model.featurizer = Featurizer(fc);
    model.featurizer.set_standardizer(std::move(st));
    if (fc.dimension() != model.mlp.input_dim())
      throw DimensionMismatch("model file: featurizer dimension does not match the MLP input layer");

    model.train_loss = j.at("train_loss").get<double>();
    model.dataset_sha256 = j.value("dataset_sha256", "");
    model.split_seed = j.at("split").at("seed").get<std::uint64_t>();
    model.split_ratio = j.at("split").at("ratio").get<double>();
    return model;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

FineTunedModel load_model_file(const std::string& path) { return load_model(read_file(path)); }

}  // namespace dropkit
