#include "dropkit/evaluation.hpp"

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  const auto total = c.total();
  m.accuracy = total == 0 ? 0.0 : double(c.tp + c.tn) / double(total);
  if (c.tp + c.fp == 0) m.precision_degenerate = true;
  else m.precision = double(c.tp) / double(c.tp + c.fp);
  if (c.tp + c.fn == 0) m.recall_degenerate = true;
  else m.recall = double(c.tp) / double(c.tp + c.fn);
  if (m.precision_degenerate || m.recall_degenerate || m.precision + m.recall == 0.0) m.f1_degenerate = true;
  else m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

ConfusionCounts confusion(const std::vector<PredictionInstance>& instances, const std::vector<bool>& predicted) {
  if (instances.size() != predicted.size()) throw DimensionMismatch("one prediction per instance required");
  ConfusionCounts c;
  for (std::size_t i = 0; i < instances.size(); ++i) c.add(predicted[i], instances[i].label);
  return c;
}

std::optional<double> PairAccuracyMatrix::accuracy(int history_start, int prediction_end) const {
  const int t = total(history_start - 1, prediction_end - 1);
  if (t == 0) return std::nullopt;
  return double(correct(history_start - 1, prediction_end - 1)) / double(t);
}

std::optional<double> PairAccuracyMatrix::gap_accuracy(int gap) const {
  if (gap < 0 || static_cast<std::size_t>(gap) >= gap_total.size() || gap_total[gap] == 0) return std::nullopt;
  return double(gap_correct[gap]) / double(gap_total[gap]);
}

PairAccuracyMatrix pair_accuracy_matrix(const std::vector<PredictionInstance>& instances,
                                        const std::vector<bool>& predicted, int chapter_count) {
  if (instances.size() != predicted.size()) throw DimensionMismatch("one prediction per instance required");
  PairAccuracyMatrix m;
  m.correct = Eigen::MatrixXi::Zero(chapter_count, chapter_count);
  m.total = Eigen::MatrixXi::Zero(chapter_count, chapter_count);
  m.gap_correct.assign(chapter_count, 0);
  m.gap_total.assign(chapter_count, 0);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.history_start < 1 || inst.prediction_end > chapter_count || inst.prediction_end < inst.history_start)
      throw ValidationError("instance pair outside the course");
    const bool ok = predicted[i] == inst.label;
    m.total(inst.history_start - 1, inst.prediction_end - 1) += 1;
    m.correct(inst.history_start - 1, inst.prediction_end - 1) += ok ? 1 : 0;
    m.gap_total[inst.pair().gap()] += 1;
    m.gap_correct[inst.pair().gap()] += ok ? 1 : 0;
  }
  return m;
}

std::string render_heatmap(const PairAccuracyMatrix& m) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "C_h\\C_p";
  for (Eigen::Index c = 0; c < m.total.cols(); ++c) out << '\t' << c + 1;
  out << '\n';
  for (Eigen::Index r = 0; r < m.total.rows(); ++r) {
    out << r + 1;
    for (Eigen::Index c = 0; c < m.total.cols(); ++c) {
      out << '\t';
      if (auto a = m.accuracy(int(r) + 1, int(c) + 1)) out << *a;
      else out << '-';
    }
    out << '\n';
  }
  out << "\ngap\tcorrect\ttotal\taccuracy\n";
  for (std::size_t g = 0; g < m.gap_total.size(); ++g) {
    out << g << '\t' << m.gap_correct[g] << '\t' << m.gap_total[g] << '\t';
    if (auto a = m.gap_accuracy(int(g))) out << *a;
    else out << '-';
    out << '\n';
  }
  return out.str();
}

std::string render_metrics_tsv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "method\tsetting\tprecision\trecall\tf1_score\taccuracy\ttp\tfp\tfn\ttn\tflags\n";
  for (const auto& r : rows) {
    std::string flags;
    if (r.values.precision_degenerate) flags += "precision_degenerate,";
    if (r.values.recall_degenerate) flags += "recall_degenerate,";
    if (r.values.f1_degenerate) flags += "f1_degenerate,";
    if (!flags.empty()) flags.pop_back();
    out << r.method << '\t' << r.setting << '\t' << r.values.precision << '\t' << r.values.recall << '\t'
        << r.values.f1 << '\t' << r.values.accuracy << '\t' << r.counts.tp << '\t' << r.counts.fp << '\t'
        << r.counts.fn << '\t' << r.counts.tn << '\t' << (flags.empty() ? "-" : flags) << '\n';
  }
  return out.str();
}

std::vector<BenchRow> compare_prompt_strategies(const std::vector<PredictionInstance>& test,
                                                const std::vector<PredictionInstance>& pool,
                                                const std::vector<BenchArm>& arms, TextModelClient& client,
                                                const PromptTemplate& tmpl, int chapter_count,
                                                const ClientCallConfig& call) {
  if (arms.empty()) throw ConfigError("prompt bench needs at least one strategy");
  for (const auto& arm : arms)
    if (arm.strategy) arm.strategy->validate();
  return parallel_map(arms, arms.size(), [&](const BenchArm& arm) {
    BenchRow row;
    row.name = arm.name;
    for (const auto& inst : test) {
      PredictionInstance query = inst;
      query.label = false;
      try {
        auto outcome = arm.strategy
                           ? few_shot_predict(query, pool, *arm.strategy, client, tmpl, chapter_count, call)
                           : zero_shot_predict(query, client, tmpl, chapter_count, call);
        row.counts.add(outcome.label, inst.label);
      } catch (const Error&) {
        ++row.failures;
      }
    }
    row.accuracy = metrics(row.counts).accuracy;
    return row;
  });
}

std::string render_bench_tsv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "prompt_design\taccuracy\tevaluated\tfailures\n";
  for (const auto& r : rows) out << r.name << '\t' << r.accuracy << '\t' << r.counts.total() << '\t' << r.failures << '\n';
  return out.str();
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["dataset_sha256"] = dataset_sha256;
  j["model_tag"] = model_tag;
  j["client_tags"] = client_tags;
  j["seeds"] = seeds;
  return j.dump(2) + "\n";
}

std::string RunManifest::id() const { return sha256_hex(to_json()).substr(0, 16); }

}  // namespace dropkit
