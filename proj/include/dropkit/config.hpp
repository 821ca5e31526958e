#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dropkit/clients.hpp"
#include "dropkit/cpadp.hpp"
#include "dropkit/features.hpp"
#include "dropkit/fewshot.hpp"
#include "dropkit/mail.hpp"
#include "dropkit/mlp.hpp"
#include "dropkit/simkit.hpp"

namespace dropkit {

/// Where a model client comes from: a mock behavior or an HTTP endpoint.
struct ClientSpec {
  std::string kind = "mock";  // mock | http
  MockClientScript mock;
  HttpEndpoint endpoint;
};

struct EmbeddingSpec {
  std::string kind = "none";  // none | mock | http
  int dimension = 64;
  HttpEndpoint endpoint;
};

struct Config {
  std::uint64_t seed = 42;
  std::map<std::string, std::uint64_t> seed_overrides;  // stage name -> seed

  ClientSpec text;
  ClientSpec email;
  EmbeddingSpec embedding;
  std::size_t in_flight = 4;
  DecodingParams decoding;
  int retry_budget = 2;
  bool cache = true;

  StagePolicy policy;
  std::optional<Stage> forced_stage;
  FewShotStrategy strategy;
  double probability_floor = 0.5;
  int cooldown_days = 14;

  TrainConfig train;
  FeatureMode features = FeatureMode::handcrafted;
  double split_ratio = 0.2;

  std::string mail_sink = "file";  // file | smtp
  SmtpConfig smtp;

  std::string workspace;
  std::string prediction_template;  // empty = built-in
  std::string email_template;

  /// The seed for a named stage: an explicit override, else derived from `seed`.
  std::uint64_t seed_for(std::string_view stage) const;
};

/// Parses the JSON config (sections clients, policy, mail, seeds, paths, train) and applies
/// environment overrides: DROPKIT_LLM_BASE_URL / _API_KEY / _MODEL for the text and email
/// clients, DROPKIT_EMBED_BASE_URL / _API_KEY / _MODEL for embeddings, and the
/// DROPKIT_SMTP_* variables for mail.
Config parse_config(std::string_view json_text);
Config load_config(const std::string& path);
Config default_config();

/// `truth` feeds the diversity-sensitive mock. With a cache directory the client is
/// wrapped in a persistent CachingTextClient.
std::shared_ptr<TextModelClient> make_text_client(const ClientSpec& spec,
                                                  const std::vector<PredictionInstance>* truth,
                                                  const std::optional<std::filesystem::path>& cache_dir);
std::unique_ptr<EmbeddingClient> make_embedding_client(const EmbeddingSpec& spec, std::uint64_t seed);

}  // namespace dropkit
