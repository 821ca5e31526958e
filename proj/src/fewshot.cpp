#include "dropkit/fewshot.hpp"

#include <algorithm>
#include <random>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::random: return "random";
    case StrategyKind::only_false: return "only_false";
    case StrategyKind::special_pair: return "special_pair";
    case StrategyKind::special_plus_casual: return "special_plus_casual";
  }
  return "random";
}

std::optional<StrategyKind> parse_strategy_kind(std::string_view name) {
  for (auto k : {StrategyKind::random, StrategyKind::only_false, StrategyKind::special_pair,
                 StrategyKind::special_plus_casual}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void FewShotStrategy::validate() const {
  if (k < 1) throw ConfigError("few-shot k must be >= 1");
  if ((kind == StrategyKind::special_pair || kind == StrategyKind::special_plus_casual) && k < 2)
    throw ConfigError("special-case strategies need k >= 2");
}

namespace {

using Candidates = std::vector<const PredictionInstance*>;

// Partial Fisher-Yates: the first min(k, n) entries after shuffling.
Candidates sample(Candidates items, std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(k);
  return items;
}

bool identity_less(const PredictionInstance* a, const PredictionInstance* b) {
  if (a->student_id != b->student_id) return a->student_id < b->student_id;
  return a->pair() < b->pair();
}

std::pair<const PredictionInstance*, const PredictionInstance*> special_pair(const Candidates& pool) {
  const PredictionInstance* low_dropout = nullptr;
  const PredictionInstance* high_retention = nullptr;
  double low = 0.0, high = 0.0;
  for (const auto* inst : pool) {
    const double mpc = transcript_stats(inst->transcript).messages_per_chapter();
    if (inst->label) {
      if (!low_dropout || mpc < low || (mpc == low && identity_less(inst, low_dropout))) {
        low_dropout = inst;
        low = mpc;
      }
    } else {
      if (!high_retention || mpc > high || (mpc == high && identity_less(inst, high_retention))) {
        high_retention = inst;
        high = mpc;
      }
    }
  }
  if (!low_dropout || !high_retention)
    throw ValidationError("special-case selection needs both dropout and retention examples in the pool");
  return {low_dropout, high_retention};
}

}  // namespace

std::vector<PredictionInstance> select_examples(const std::vector<PredictionInstance>& pool,
                                                const FewShotStrategy& strategy,
                                                const PredictionInstance& query) {
  strategy.validate();
  Candidates eligible;
  for (const auto& inst : pool)
    if (inst.student_id != query.student_id) eligible.push_back(&inst);
  if (eligible.empty()) throw ValidationError("few-shot pool has no eligible examples");

  std::mt19937_64 rng(derive_seed(strategy.seed, query.student_id + ":" +
                                                     std::to_string(query.history_start) + ":" +
                                                     std::to_string(query.prediction_end)));
  const auto k = static_cast<std::size_t>(strategy.k);
  Candidates chosen;
  switch (strategy.kind) {
    case StrategyKind::random:
      chosen = sample(eligible, k, rng);
      break;
    case StrategyKind::only_false: {
      Candidates negatives;
      for (const auto* inst : eligible)
        if (!inst->label) negatives.push_back(inst);
      if (negatives.empty()) throw ValidationError("only_false strategy: pool has no retention examples");
      chosen = sample(negatives, k, rng);
      break;
    }
    case StrategyKind::special_pair: {
      auto [a, b] = special_pair(eligible);
      chosen = {a, b};
      break;
    }
    case StrategyKind::special_plus_casual: {
      auto [a, b] = special_pair(eligible);
      Candidates rest;
      for (const auto* inst : eligible)
        if (inst != a && inst != b) rest.push_back(inst);
      chosen = {a, b};
      for (const auto* inst : sample(rest, k - 2, rng)) chosen.push_back(inst);
      break;
    }
  }
  std::vector<PredictionInstance> out;
  out.reserve(chosen.size());
  for (const auto* inst : chosen) out.push_back(*inst);
  return out;
}

}  // namespace dropkit
