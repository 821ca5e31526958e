#include "dropkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

using nlohmann::json;

std::vector<ChapterPair> enumerate_pairs(std::optional<int> drop_chapter, int chapter_count) {
  std::vector<ChapterPair> pairs;
  for (int c = 1; c <= chapter_count; ++c) pairs.push_back({c, c});
  if (drop_chapter) {
    for (int c = 1; c < *drop_chapter; ++c) pairs.push_back({c, *drop_chapter});
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<PredictionInstance> build_dataset(const CourseLog& log) {
  std::vector<PredictionInstance> out;
  const int chapters = log.chapter_count();
  for (const auto& state : log.completions()) {
    // Transcripts depend on C_h only; serialize each prefix once.
    std::vector<std::string> transcripts(chapters + 1);
    for (int c = 1; c <= chapters; ++c)
      transcripts[c] = serialize_transcript(history_slice(log, state.student_id, c),
                                            log.meta().chapter_titles);
    for (const auto& pair : enumerate_pairs(state.drop_chapter, chapters)) {
      out.push_back({state.student_id, pair.history_start, pair.prediction_end,
                     transcripts[pair.history_start],
                     dropout_label(state.drop_chapter, pair.prediction_end)});
    }
  }
  return out;
}

Eigen::MatrixXi pair_count_matrix(const std::vector<PredictionInstance>& instances, int chapter_count) {
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(chapter_count, chapter_count);
  for (const auto& inst : instances) {
    if (inst.history_start < 1 || inst.prediction_end > chapter_count ||
        inst.prediction_end < inst.history_start)
      throw ValidationError("instance pair out of range");
    counts(inst.history_start - 1, inst.prediction_end - 1) += 1;
  }
  return counts;
}

std::string render_count_matrix(const Eigen::MatrixXi& counts) {
  std::ostringstream out;
  out << "C_h\\C_p";
  for (Eigen::Index c = 0; c < counts.cols(); ++c) out << '\t' << c + 1;
  out << '\n';
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    out << r + 1;
    for (Eigen::Index c = 0; c < counts.cols(); ++c) out << '\t' << counts(r, c);
    out << '\n';
  }
  return out.str();
}

DatasetSplit split_dataset(const std::vector<PredictionInstance>& instances, double ratio,
                           std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie in (0, 1)");
  std::vector<std::string> students;
  std::map<std::string, std::size_t> sizes;
  for (const auto& inst : instances) {
    if (sizes[inst.student_id]++ == 0) students.push_back(inst.student_id);
  }
  if (students.size() < 2) throw ValidationError("split needs at least two students");

  std::mt19937_64 rng(seed);
  std::shuffle(students.begin(), students.end(), rng);

  const std::size_t n = students.size();
  const std::size_t total = instances.size();
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));

  // reachable[i][t]: some subset of students[i..n) has exactly t instances.
  std::vector<std::vector<char>> reachable(n + 1, std::vector<char>(total + 1, 0));
  reachable[n][0] = 1;
  for (std::size_t i = n; i-- > 0;) {
    const std::size_t w = sizes[students[i]];
    for (std::size_t t = 0; t <= total; ++t)
      reachable[i][t] = reachable[i + 1][t] || (t >= w && reachable[i + 1][t - w]);
  }
  // Both partitions must be non-empty, so the test total lies strictly inside (0, total).
  std::size_t goal = 0;
  for (std::size_t d = 0; d <= total; ++d) {
    if (target >= d && target - d > 0 && target - d < total && reachable[0][target - d]) {
      goal = target - d;
      break;
    }
    if (target + d > 0 && target + d < total && reachable[0][target + d]) {
      goal = target + d;
      break;
    }
  }
  if (goal == 0) throw ValidationError("no non-trivial student-grouped split exists");

  std::set<std::string> test_students;
  std::size_t remaining = goal;
  for (std::size_t i = 0; i < n && remaining > 0; ++i) {
    const std::size_t w = sizes[students[i]];
    if (w <= remaining && reachable[i + 1][remaining - w]) {
      test_students.insert(students[i]);
      remaining -= w;
    }
  }

  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  for (const auto& inst : instances)
    (test_students.count(inst.student_id) ? split.test : split.train).push_back(inst);
  return split;
}

std::string emit_dataset(const Dataset& dataset) {
  std::ostringstream out;
  out << json{{"kind", "dataset.meta"},
              {"course_id", dataset.course_id},
              {"chapter_count", dataset.chapter_count},
              {"instances", dataset.instances.size()}}
             .dump()
      << '\n';
  for (const auto& inst : dataset.instances) {
    out << json{{"student_id", inst.student_id},
                {"C_h", inst.history_start},
                {"C_p", inst.prediction_end},
                {"label", inst.label},
                {"transcript", inst.transcript}}
               .dump()
        << '\n';
  }
  return out.str();
}

Dataset parse_dataset(std::istream& in) {
  Dataset dataset;
  std::string raw;
  std::size_t line = 0;
  bool have_meta = false;
  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) continue;
    json obj;
    try {
      obj = json::parse(raw);
      if (!have_meta) {
        if (obj.value("kind", "") != "dataset.meta") throw ParseError(line, "missing dataset.meta header");
        dataset.course_id = obj.at("course_id").get<std::string>();
        dataset.chapter_count = obj.at("chapter_count").get<int>();
        have_meta = true;
        continue;
      }
      PredictionInstance inst;
      inst.student_id = obj.at("student_id").get<std::string>();
      inst.history_start = obj.at("C_h").get<int>();
      inst.prediction_end = obj.at("C_p").get<int>();
      inst.label = obj.at("label").get<bool>();
      inst.transcript = obj.at("transcript").get<std::string>();
      if (inst.history_start < 1 || inst.history_start > inst.prediction_end ||
          inst.prediction_end > dataset.chapter_count)
        throw ParseError(line, "C_h/C_p outside 1 <= C_h <= C_p <= L");
      dataset.instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw ParseError(line, e.what());
    }
  }
  if (!have_meta) throw ParseError(line, "empty dataset file");
  return dataset;
}

Dataset parse_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorClass::io, "cannot open dataset " + path);
  return parse_dataset(in);
}

}  // namespace dropkit
