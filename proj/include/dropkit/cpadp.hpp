#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "dropkit/predictors.hpp"

namespace dropkit {

/// Labeled-data thresholds at which prediction moves to the next stage.
struct StagePolicy {
  std::size_t few_shot_min = 20;
  std::size_t fine_tune_min = 200;
  bool fallback_enabled = true;

  void validate() const;
};

/// zero_shot below few_shot_min; few_shot below fine_tune_min or without a trained model;
/// fine_tuned otherwise. Monotone in labeled_count.
Stage select_stage(std::size_t labeled_count, const StagePolicy& policy, bool model_available);

/// Everything a prediction may draw on. Non-owning; the referenced objects must outlive
/// the predictor.
struct PredictionContext {
  const std::vector<PredictionInstance>* pool = nullptr;  // labeled examples seen so far
  const FineTunedModel* model = nullptr;
  TextModelClient* client = nullptr;
  EmbeddingClient* embed = nullptr;
  PromptTemplate prompt = default_prediction_template();
  FewShotStrategy strategy;
  ClientCallConfig call;
  int chapter_count = 0;
  /// Skip the threshold rule and start from this stage.
  std::optional<Stage> forced_stage;
};

/// Course-progress-adaptive predictor: picks a stage from the amount of labeled data and
/// degrades one stage at a time when a stage fails (if the policy allows).
class AdaptivePredictor {
public:
  AdaptivePredictor(PredictionContext context, StagePolicy policy);

  Stage initial_stage() const;
  PredictionOutcome predict(const PredictionInstance& instance) const;

  /// Predicts every instance with at most `in_flight` concurrent client calls. Per-item
  /// failures are returned as nullopt with the message in `errors` (same index).
  std::vector<std::optional<PredictionOutcome>> predict_batch(const std::vector<PredictionInstance>& instances,
                                                              std::size_t in_flight,
                                                              std::vector<std::string>* errors = nullptr) const;

  const PredictionContext& context() const { return context_; }
  const StagePolicy& policy() const { return policy_; }

private:
  PredictionContext context_;
  StagePolicy policy_;

  PredictionOutcome run_stage(Stage stage, const PredictionInstance& query) const;
};

}  // namespace dropkit
