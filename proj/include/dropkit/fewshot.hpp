#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dropkit/dataset.hpp"

namespace dropkit {

enum class StrategyKind { random, only_false, special_pair, special_plus_casual };

std::string_view to_string(StrategyKind kind);
std::optional<StrategyKind> parse_strategy_kind(std::string_view name);

struct FewShotStrategy {
  StrategyKind kind = StrategyKind::special_plus_casual;
  int k = 4;
  std::uint64_t seed = 0;

  /// Throws ConfigError when k < 1, or k < 2 for the special-case strategies.
  void validate() const;
};

/// Chooses labeled examples for a few-shot prompt. Instances of the query's student are
/// never eligible. Random draws are seeded by (strategy.seed, query identity), so a given
/// query always sees the same examples.
///
/// "Special cases" are the engagement extremes of the pool: the dropout-labeled example with
/// the fewest student messages per engaged chapter, and the retention-labeled example with
/// the most. Ties go to the lowest student_id, then the lowest (C_h, C_p).
std::vector<PredictionInstance> select_examples(const std::vector<PredictionInstance>& pool,
                                                const FewShotStrategy& strategy,
                                                const PredictionInstance& query);

}  // namespace dropkit
