#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dropkit/log_core.hpp"

namespace dropkit {

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
/// Series expansion below x < a + 1, Lentz continued fraction above.
double regularized_gamma_q(double a, double x);

/// Upper-tail probability of the chi-square distribution with `dof` degrees of freedom.
inline double chi_square_sf(double statistic, int dof) {
  return regularized_gamma_q(0.5 * dof, 0.5 * statistic);
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  Eigen::MatrixXd observed;  // rows: categories, cols: progress levels/buckets
  std::vector<std::string> row_labels;
  std::vector<int> col_values;
};

/// Pearson chi-square independence test on a contingency table of counts.
/// Needs >= 2 rows and >= 2 columns, each with a non-zero margin.
ChiSquareResult chi_square_table(const Eigen::MatrixXd& observed);

/// Cross-tabulates labels against values and tests independence.
ChiSquareResult chi_square(const std::vector<std::string>& labels, const std::vector<int>& values);

struct PearsonResult {
  double r = 0.0;
  std::size_t n = 0;
};

/// Product-moment correlation. Throws DegenerateInput on zero variance or n < 2.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

/// Bucket boundaries for progress: bucket i holds values in [lower[i], lower[i+1]).
/// Default for L chapters: {0}, {1..L-1}, {L}.
struct ProgressBuckets {
  std::vector<int> lower_bounds;

  static ProgressBuckets standard(int chapter_count) { return {{0, 1, chapter_count}}; }
  int bucket_of(int progress) const;
  std::string label(std::size_t bucket, int chapter_count) const;
};

struct InteractionFeatures {
  std::string student_id;
  double msgs_per_chapter = 0.0;
  double avg_msg_len = 0.0;
};

/// Student-authored engagement: messages per engaged chapter and mean characters per message.
InteractionFeatures interaction_features(const CourseLog& log, std::string_view student_id);

struct CorrelationReport {
  struct ChiRow {
    std::string field;
    std::optional<ChiSquareResult> result;
    std::string note;  // set when skipped
  };
  struct PearsonRow {
    std::string trait;
    std::optional<PearsonResult> result;
    std::string note;
  };
  struct FeatureRow {
    InteractionFeatures features;
    int progress = 0;
  };

  std::string course_id;
  std::size_t students = 0;
  std::size_t traits_missing = 0;
  ProgressBuckets buckets;
  std::vector<ChiRow> chi_square;
  std::vector<PearsonRow> pearson;
  std::vector<FeatureRow> features;  // sorted by progress, then student_id
  double completer_mean_msgs_per_chapter = 0.0;
  double dropper_mean_msgs_per_chapter = 0.0;
  double completer_mean_msg_len = 0.0;
  double dropper_mean_msg_len = 0.0;
};

CorrelationReport correlation_report(const CourseLog& log,
                                     std::optional<ProgressBuckets> buckets = std::nullopt);

/// Markdown summary followed by tab-separated, plot-ready tables.
std::string render_report_markdown(const CorrelationReport& report, int chapter_count);
std::string render_report_json(const CorrelationReport& report);

}  // namespace dropkit
