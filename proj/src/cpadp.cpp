#include "dropkit/cpadp.hpp"

#include "dropkit/error.hpp"

namespace dropkit {

void StagePolicy::validate() const {
  if (few_shot_min == 0 || few_shot_min > fine_tune_min)
    throw ConfigError("stage policy needs 0 < few_shot_min <= fine_tune_min");
}

Stage select_stage(std::size_t labeled_count, const StagePolicy& policy, bool model_available) {
  if (labeled_count < policy.few_shot_min) return Stage::zero_shot;
  if (labeled_count < policy.fine_tune_min || !model_available) return Stage::few_shot;
  return Stage::fine_tuned;
}

AdaptivePredictor::AdaptivePredictor(PredictionContext context, StagePolicy policy)
    : context_(std::move(context)), policy_(policy) {
  policy_.validate();
  if (context_.chapter_count < 1) throw ConfigError("prediction context needs chapter_count");
  if (context_.forced_stage == Stage::fine_tuned && !context_.model)
    throw ConfigError("fine_tuned stage requested but no trained model is loaded");
}

Stage AdaptivePredictor::initial_stage() const {
  if (context_.forced_stage) return *context_.forced_stage;
  const std::size_t labeled = context_.pool ? context_.pool->size() : 0;
  return select_stage(labeled, policy_, context_.model != nullptr);
}

PredictionOutcome AdaptivePredictor::run_stage(Stage stage, const PredictionInstance& query) const {
  switch (stage) {
    case Stage::fine_tuned:
      if (!context_.model) throw ConfigError("no trained model");
      return finetuned_predict(*context_.model, query, context_.embed);
    case Stage::few_shot:
      if (!context_.client) throw ConfigError("no text model client configured");
      if (!context_.pool) throw ValidationError("no labeled example pool");
      return few_shot_predict(query, *context_.pool, context_.strategy, *context_.client, context_.prompt,
                              context_.chapter_count, context_.call);
    case Stage::zero_shot:
      if (!context_.client) throw ConfigError("no text model client configured");
      return zero_shot_predict(query, *context_.client, context_.prompt, context_.chapter_count, context_.call);
  }
  throw ConfigError("unknown stage");
}

PredictionOutcome AdaptivePredictor::predict(const PredictionInstance& instance) const {
  // The query's label never reaches a stage.
  PredictionInstance query = instance;
  query.label = false;

  std::vector<Stage> abandoned;
  std::string last_error;
  for (int s = static_cast<int>(initial_stage()); s >= 0; --s) {
    const auto stage = static_cast<Stage>(s);
    try {
      auto outcome = run_stage(stage, query);
      outcome.degraded_from = abandoned;
      return outcome;
    } catch (const Error& e) {
      last_error = std::string(to_string(stage)) + ": " + e.what();
      if (!policy_.fallback_enabled) throw;
      abandoned.push_back(stage);
    }
  }
  throw StagesExhausted("all prediction stages failed; last error: " + last_error);
}

std::vector<std::optional<PredictionOutcome>> AdaptivePredictor::predict_batch(
    const std::vector<PredictionInstance>& instances, std::size_t in_flight,
    std::vector<std::string>* errors) const {
  struct Slot {
    std::optional<PredictionOutcome> outcome;
    std::string error;
  };
  auto slots = parallel_map(instances, in_flight, [this](const PredictionInstance& inst) {
    Slot slot;
    try {
      slot.outcome = predict(inst);
    } catch (const Error& e) {
      slot.error = e.what();
    }
    return slot;
  });
  std::vector<std::optional<PredictionOutcome>> out;
  if (errors) errors->assign(instances.size(), {});
  for (std::size_t i = 0; i < slots.size(); ++i) {
    out.push_back(std::move(slots[i].outcome));
    if (errors) (*errors)[i] = std::move(slots[i].error);
  }
  return out;
}

}  // namespace dropkit
