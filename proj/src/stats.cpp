#include "dropkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

namespace {

constexpr int kMaxIterations = 10'000;
constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// P(a, x) by its power series; converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the modified Lentz continued fraction; used for x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw DegenerateInput("incomplete gamma requires a > 0");
  if (x < 0.0 || std::isnan(x)) throw DegenerateInput("incomplete gamma requires x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  double q = x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_continued_fraction(a, x);
  return std::clamp(q, 0.0, 1.0);
}

ChiSquareResult chi_square_table(const Eigen::MatrixXd& observed) {
  if (observed.size() == 0) throw DegenerateInput("empty contingency table");
  if (observed.rows() < 2 || observed.cols() < 2)
    throw DegenerateInput("contingency table needs at least two categories on each axis");
  if ((observed.array() < 0.0).any()) throw DegenerateInput("negative count in contingency table");
  const Eigen::VectorXd row_sums = observed.rowwise().sum();
  const Eigen::RowVectorXd col_sums = observed.colwise().sum();
  const double total = observed.sum();
  if ((row_sums.array() <= 0.0).any() || (col_sums.array() <= 0.0).any())
    throw DegenerateInput("contingency table has an empty row or column");

  const Eigen::MatrixXd expected = row_sums * col_sums / total;
  ChiSquareResult result;
  result.statistic = ((observed - expected).array().square() / expected.array()).sum();
  result.dof = static_cast<int>((observed.rows() - 1) * (observed.cols() - 1));
  result.p_value = chi_square_sf(result.statistic, result.dof);
  result.observed = observed;
  return result;
}

ChiSquareResult chi_square(const std::vector<std::string>& labels, const std::vector<int>& values) {
  if (labels.empty()) throw DegenerateInput("chi-square on empty input");
  if (labels.size() != values.size()) throw DegenerateInput("chi-square inputs differ in length");
  std::map<std::string, Eigen::Index> rows;
  std::map<int, Eigen::Index> cols;
  for (const auto& l : labels) rows.emplace(l, 0);
  for (int v : values) cols.emplace(v, 0);
  if (rows.size() < 2) throw DegenerateInput("single category on the label axis");
  if (cols.size() < 2) throw DegenerateInput("single value on the progress axis");
  Eigen::Index i = 0;
  for (auto& [_, idx] : rows) idx = i++;
  i = 0;
  for (auto& [_, idx] : cols) idx = i++;

  Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(rows.size(), cols.size());
  for (std::size_t k = 0; k < labels.size(); ++k) observed(rows[labels[k]], cols[values[k]]) += 1.0;

  auto result = chi_square_table(observed);
  for (const auto& [label, _] : rows) result.row_labels.push_back(label);
  for (const auto& [value, _] : cols) result.col_values.push_back(value);
  return result;
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DegenerateInput("pearson inputs differ in length");
  if (x.size() < 2) throw DegenerateInput("pearson needs at least two samples");
  // Single-pass co-moment accumulation (Welford).
  double mean_x = 0.0, mean_y = 0.0, m2x = 0.0, m2y = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = x[i] - mean_x;
    mean_x += dx / n;
    const double dy = y[i] - mean_y;
    mean_y += dy / n;
    m2x += dx * (x[i] - mean_x);
    m2y += dy * (y[i] - mean_y);
    cxy += dx * (y[i] - mean_y);
  }
  if (m2x <= 0.0 || m2y <= 0.0) throw DegenerateInput("zero variance");
  return {std::clamp(cxy / std::sqrt(m2x * m2y), -1.0, 1.0), x.size()};
}

int ProgressBuckets::bucket_of(int progress) const {
  int bucket = 0;
  for (std::size_t i = 0; i < lower_bounds.size(); ++i)
    if (progress >= lower_bounds[i]) bucket = static_cast<int>(i);
  return bucket;
}

std::string ProgressBuckets::label(std::size_t bucket, int chapter_count) const {
  int lo = lower_bounds[bucket];
  int hi = bucket + 1 < lower_bounds.size() ? lower_bounds[bucket + 1] - 1 : chapter_count;
  return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
}

InteractionFeatures interaction_features(const CourseLog& log, std::string_view student_id) {
  InteractionFeatures f;
  f.student_id = std::string(student_id);
  std::set<int> chapters;
  std::size_t messages = 0, chars = 0;
  for (auto i : log.record_indices(student_id)) {
    const auto& r = log.records()[i];
    if (r.role != Role::student) continue;
    ++messages;
    chars += utf8_length(r.text);
    chapters.insert(r.chapter);
  }
  if (messages > 0) {
    f.msgs_per_chapter = double(messages) / double(chapters.size());
    f.avg_msg_len = double(chars) / double(messages);
  }
  return f;
}

CorrelationReport correlation_report(const CourseLog& log, std::optional<ProgressBuckets> buckets) {
  CorrelationReport report;
  report.course_id = log.meta().course_id;
  report.students = log.students().size();
  report.buckets = buckets.value_or(ProgressBuckets::standard(log.chapter_count()));

  std::vector<int> bucketed;
  std::vector<double> progress;
  for (const auto& s : log.students()) {
    int p = log.completion(s.student_id).progress;
    bucketed.push_back(report.buckets.bucket_of(p));
    progress.push_back(p);
  }

  using Field = std::string StudentProfile::*;
  const std::pair<const char*, Field> fields[] = {{"college", &StudentProfile::college},
                                                  {"major", &StudentProfile::major},
                                                  {"gender", &StudentProfile::gender},
                                                  {"grade", &StudentProfile::grade}};
  for (const auto& [name, member] : fields) {
    CorrelationReport::ChiRow row{name, std::nullopt, {}};
    std::vector<std::string> labels;
    for (const auto& s : log.students()) labels.push_back(s.*member);
    try {
      row.result = chi_square(labels, bucketed);
    } catch (const DegenerateInput& e) {
      row.note = std::string("skipped: ") + e.what();
    }
    report.chi_square.push_back(std::move(row));
  }

  std::vector<std::size_t> with_traits;
  for (std::size_t i = 0; i < log.students().size(); ++i) {
    if (log.students()[i].traits) with_traits.push_back(i);
  }
  report.traits_missing = log.students().size() - with_traits.size();
  for (std::size_t t = 0; t < kTraitNames.size(); ++t) {
    CorrelationReport::PearsonRow row{std::string(kTraitNames[t]), std::nullopt, {}};
    std::vector<double> xs, ys;
    for (auto i : with_traits) {
      xs.push_back((*log.students()[i].traits)[t]);
      ys.push_back(progress[i]);
    }
    try {
      row.result = pearson(xs, ys);
    } catch (const DegenerateInput& e) {
      row.note = std::string("skipped: ") + e.what();
    }
    if (report.traits_missing > 0 && row.note.empty())
      row.note = std::to_string(report.traits_missing) + " students without traits excluded";
    report.pearson.push_back(std::move(row));
  }

  std::size_t completers = 0, droppers = 0;
  for (const auto& s : log.students()) {
    CorrelationReport::FeatureRow row{interaction_features(log, s.student_id),
                                      log.completion(s.student_id).progress};
    if (row.progress == log.chapter_count()) {
      ++completers;
      report.completer_mean_msgs_per_chapter += row.features.msgs_per_chapter;
      report.completer_mean_msg_len += row.features.avg_msg_len;
    } else {
      ++droppers;
      report.dropper_mean_msgs_per_chapter += row.features.msgs_per_chapter;
      report.dropper_mean_msg_len += row.features.avg_msg_len;
    }
    report.features.push_back(std::move(row));
  }
  if (completers) {
    report.completer_mean_msgs_per_chapter /= completers;
    report.completer_mean_msg_len /= completers;
  }
  if (droppers) {
    report.dropper_mean_msgs_per_chapter /= droppers;
    report.dropper_mean_msg_len /= droppers;
  }
  std::stable_sort(report.features.begin(), report.features.end(), [](const auto& a, const auto& b) {
    return a.progress != b.progress ? a.progress < b.progress
                                    : a.features.student_id < b.features.student_id;
  });
  return report;
}

std::string render_report_markdown(const CorrelationReport& report, int chapter_count) {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "# Correlation report: " << report.course_id << "\n\n";
  out << report.students << " students; progress buckets:";
  for (std::size_t b = 0; b < report.buckets.lower_bounds.size(); ++b)
    out << " [" << report.buckets.label(b, chapter_count) << "]";
  out << "\n\n";
  out << "Engagement: completers average " << report.completer_mean_msgs_per_chapter
      << " messages/chapter and " << report.completer_mean_msg_len << " chars/message; "
      << "non-completers average " << report.dropper_mean_msgs_per_chapter
      << " messages/chapter and " << report.dropper_mean_msg_len << " chars/message.\n\n";

  out << "## Basic information vs progress (chi-square)\n\n```tsv\nfield\tstatistic\tdof\tp_value\tnote\n";
  for (const auto& row : report.chi_square) {
    out << row.field << '\t';
    if (row.result)
      out << row.result->statistic << '\t' << row.result->dof << '\t' << row.result->p_value;
    else
      out << "-\t-\t-";
    out << '\t' << row.note << '\n';
  }
  out << "```\n\n## Traits vs progress (Pearson)\n\n```tsv\ntrait\tr\tn\tnote\n";
  for (const auto& row : report.pearson) {
    out << row.trait << '\t';
    if (row.result)
      out << row.result->r << '\t' << row.result->n;
    else
      out << "-\t-";
    out << '\t' << row.note << '\n';
  }
  out << "```\n\n## Interaction features\n\n```tsv\nstudent_id\tprogress\tmsgs_per_chapter\tavg_msg_len\n";
  for (const auto& row : report.features) {
    out << row.features.student_id << '\t' << row.progress << '\t' << row.features.msgs_per_chapter
        << '\t' << row.features.avg_msg_len << '\n';
  }
  out << "```\n";
  return out.str();
}

std::string render_report_json(const CorrelationReport& report) {
  using nlohmann::json;
  json j;
  j["course_id"] = report.course_id;
  j["students"] = report.students;
  j["traits_missing"] = report.traits_missing;
  j["progress_bucket_lower_bounds"] = report.buckets.lower_bounds;
  for (const auto& row : report.chi_square) {
    json r = {{"field", row.field}, {"note", row.note}};
    if (row.result) {
      r["statistic"] = row.result->statistic;
      r["dof"] = row.result->dof;
      r["p_value"] = row.result->p_value;
      json observed = json::array();
      for (Eigen::Index i = 0; i < row.result->observed.rows(); ++i) {
        json line = json::array();
        for (Eigen::Index k = 0; k < row.result->observed.cols(); ++k)
          line.push_back(static_cast<long long>(row.result->observed(i, k)));
        observed.push_back(line);
      }
      r["observed"] = observed;
      r["row_labels"] = row.result->row_labels;
      r["col_buckets"] = row.result->col_values;
    }
    j["chi_square"].push_back(r);
  }
  for (const auto& row : report.pearson) {
    json r = {{"trait", row.trait}, {"note", row.note}};
    if (row.result) {
      r["r"] = row.result->r;
      r["n"] = row.result->n;
    }
    j["pearson"].push_back(r);
  }
  for (const auto& row : report.features) {
    j["features"].push_back({{"student_id", row.features.student_id},
                             {"progress", row.progress},
                             {"msgs_per_chapter", row.features.msgs_per_chapter},
                             {"avg_msg_len", row.features.avg_msg_len}});
  }
  j["engagement"] = {{"completer_mean_msgs_per_chapter", report.completer_mean_msgs_per_chapter},
                     {"dropper_mean_msgs_per_chapter", report.dropper_mean_msgs_per_chapter},
                     {"completer_mean_msg_len", report.completer_mean_msg_len},
                     {"dropper_mean_msg_len", report.dropper_mean_msg_len}};
  return j.dump(2) + "\n";
}

}  // namespace dropkit
