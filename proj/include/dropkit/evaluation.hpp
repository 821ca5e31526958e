#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dropkit/cpadp.hpp"
#include "dropkit/dataset.hpp"
#include "dropkit/predictors.hpp"

namespace dropkit {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(bool predicted, bool actual) {
    if (predicted) (actual ? tp : fp) += 1;
    else (actual ? fn : tn) += 1;
  }
  std::size_t total() const { return tp + fp + fn + tn; }
};

/// Positive class = dropout. A metric whose denominator is zero is reported as 0 and flagged.
struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
};

Metrics metrics(const ConfusionCounts& counts);

ConfusionCounts confusion(const std::vector<PredictionInstance>& instances, const std::vector<bool>& predicted);

/// Per-(C_h, C_p) correct/total counts, plus aggregates by gap g = C_p - C_h.
struct PairAccuracyMatrix {
  Eigen::MatrixXi correct;  // row C_h - 1, column C_p - 1
  Eigen::MatrixXi total;
  std::vector<std::size_t> gap_correct;
  std::vector<std::size_t> gap_total;

  std::optional<double> accuracy(int history_start, int prediction_end) const;
  std::optional<double> gap_accuracy(int gap) const;
};

PairAccuracyMatrix pair_accuracy_matrix(const std::vector<PredictionInstance>& instances,
                                        const std::vector<bool>& predicted, int chapter_count);

/// Numeric accuracy grid (rows C_h, columns C_p; "-" for empty cells) followed by the gap table.
std::string render_heatmap(const PairAccuracyMatrix& matrix);

/// One row of a metrics report, mirroring the method/setting/P/R/F1/accuracy layout.
struct MetricsRow {
  std::string method;
  std::string setting;
  Metrics values;
  ConfusionCounts counts;
};

std::string render_metrics_tsv(const std::vector<MetricsRow>& rows);

/// An arm of the prompt-strategy comparison; no strategy means zero-shot.
struct BenchArm {
  std::string name;
  std::optional<FewShotStrategy> strategy;
};

struct BenchRow {
  std::string name;
  double accuracy = 0.0;
  ConfusionCounts counts;
  std::size_t failures = 0;  // instances whose prediction errored; excluded from accuracy
};

/// Runs every arm over the same test instances with a shared client (wrap it in a
/// CachingTextClient to make reruns free). Arms run in parallel; output order follows `arms`.
std::vector<BenchRow> compare_prompt_strategies(const std::vector<PredictionInstance>& test,
                                                const std::vector<PredictionInstance>& pool,
                                                const std::vector<BenchArm>& arms, TextModelClient& client,
                                                const PromptTemplate& tmpl, int chapter_count,
                                                const ClientCallConfig& call = {});

std::string render_bench_tsv(const std::vector<BenchRow>& rows);

/// Inputs that identify an evaluation run.
struct RunManifest {
  std::string dataset_sha256;
  std::string model_tag;
  std::vector<std::string> client_tags;
  std::map<std::string, std::uint64_t> seeds;

  std::string to_json() const;
  std::string id() const;  // content hash of the manifest
};

}  // namespace dropkit
