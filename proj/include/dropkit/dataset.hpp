#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dropkit/log_core.hpp"

namespace dropkit {

/// A (C_h, C_p) combination: history runs up to the start of `history_start`,
/// the prediction window runs from there to the end of `prediction_end`.
struct ChapterPair {
  int history_start = 1;
  int prediction_end = 1;

  int gap() const { return prediction_end - history_start; }
  auto operator<=>(const ChapterPair&) const = default;
};

struct PredictionInstance {
  std::string student_id;
  int history_start = 1;   // C_h
  int prediction_end = 1;  // C_p
  std::string transcript;  // serialized records before chapter C_h
  bool label = false;      // true = drops out by the end of C_p

  ChapterPair pair() const { return {history_start, prediction_end}; }
  bool operator==(const PredictionInstance&) const = default;
};

/// Every diagonal pair (c, c), plus (c, D) for c < D when the student drops at D.
/// Sorted by (C_h, C_p).
std::vector<ChapterPair> enumerate_pairs(std::optional<int> drop_chapter, int chapter_count);

/// True iff the student drops at or before the end of `prediction_end`.
inline bool dropout_label(std::optional<int> drop_chapter, int prediction_end) {
  return drop_chapter.has_value() && *drop_chapter <= prediction_end;
}

/// One instance per enumerated pair per student, in student order.
std::vector<PredictionInstance> build_dataset(const CourseLog& log);

/// Instance count per (C_h, C_p) cell; row = C_h - 1, column = C_p - 1.
Eigen::MatrixXi pair_count_matrix(const std::vector<PredictionInstance>& instances, int chapter_count);
std::string render_count_matrix(const Eigen::MatrixXi& counts);

struct DatasetSplit {
  std::vector<PredictionInstance> train;
  std::vector<PredictionInstance> test;
  std::uint64_t seed = 0;
  double ratio = 0.2;
};

/// Student-grouped split. Students are shuffled under `seed`; the test side takes the
/// earliest students (in shuffled order) whose instance counts sum to round(ratio * N),
/// or the closest reachable total when no subset sums to it exactly.
DatasetSplit split_dataset(const std::vector<PredictionInstance>& instances, double ratio,
                           std::uint64_t seed);

struct Dataset {
  std::string course_id;
  int chapter_count = 0;
  std::vector<PredictionInstance> instances;
};

/// Line-delimited: a `dataset.meta` header, then {student_id, C_h, C_p, label, transcript}.
std::string emit_dataset(const Dataset& dataset);
Dataset parse_dataset(std::istream& in);
Dataset parse_dataset_file(const std::string& path);

}  // namespace dropkit
