#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dropkit/clients.hpp"
#include "dropkit/dataset.hpp"
#include "dropkit/features.hpp"
#include "dropkit/fewshot.hpp"
#include "dropkit/mlp.hpp"
#include "dropkit/prompt.hpp"

namespace dropkit {

/// Ordered from least to most labeled data required.
enum class Stage { zero_shot = 0, few_shot = 1, fine_tuned = 2 };

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

inline constexpr double kDecisionThreshold = 0.5;

struct PredictionOutcome {
  bool label = false;
  double p_dropout = 0.0;
  Stage stage = Stage::zero_shot;
  std::optional<std::string> raw_response;
  int retries = 0;
  /// Stages tried and abandoned before `stage` produced this outcome.
  std::vector<Stage> degraded_from;
};

struct ClientCallConfig {
  DecodingParams params;
  /// Extra attempts after a transport failure or an unparseable answer.
  int retry_budget = 2;
};

PredictionOutcome zero_shot_predict(const PredictionInstance& instance, TextModelClient& client,
                                    const PromptTemplate& tmpl, int chapter_count,
                                    const ClientCallConfig& config = {});

PredictionOutcome few_shot_predict(const PredictionInstance& instance,
                                   const std::vector<PredictionInstance>& pool,
                                   const FewShotStrategy& strategy, TextModelClient& client,
                                   const PromptTemplate& tmpl, int chapter_count,
                                   const ClientCallConfig& config = {});

/// Frozen feature extractor + trained MLP head, with everything needed to reproduce
/// the feature space at prediction time.
struct FineTunedModel {
  Featurizer featurizer;
  Mlp<double> mlp;
  TrainConfig hyper;
  double train_loss = 0.0;
  std::string dataset_sha256;
  std::uint64_t split_seed = 0;
  double split_ratio = 0.2;

  std::string tag() const;
};

/// Standardizes features on `train` and fits the MLP head. Needs both classes present.
FineTunedModel mlp_train(const std::vector<PredictionInstance>& train, const FeaturizerConfig& features,
                         const TrainConfig& hyper, EmbeddingClient* embed = nullptr);

PredictionOutcome finetuned_predict(const FineTunedModel& model, const PredictionInstance& instance,
                                    EmbeddingClient* embed = nullptr);

/// One forward pass over the whole batch; same results as calling finetuned_predict per item.
std::vector<PredictionOutcome> finetuned_predict_batch(const FineTunedModel& model,
                                                       const std::vector<PredictionInstance>& instances,
                                                       EmbeddingClient* embed = nullptr);

inline constexpr std::string_view kModelFormat = "dropkit.mlp";
inline constexpr int kModelVersion = 1;

std::string save_model(const FineTunedModel& model);
FineTunedModel load_model(std::string_view text);
FineTunedModel load_model_file(const std::string& path);

}  // namespace dropkit
