#pragma once

// Scripted logs and brute-force oracles shared by the unit tests and the acceptance runner.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dropkit/log_core.hpp"
#include "dropkit/simkit.hpp"
#include "dropkit/util.hpp"

namespace fixtures {

using namespace dropkit;

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dropkit-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Oracles

/// Chi-square by explicit loops over cells in long double: sum (O - E)^2 / E.
inline double chi_square_oracle(const Eigen::MatrixXd& o) {
  std::vector<long double> rows(o.rows(), 0.0L), cols(o.cols(), 0.0L);
  long double n = 0.0L;
  for (Eigen::Index i = 0; i < o.rows(); ++i)
    for (Eigen::Index j = 0; j < o.cols(); ++j) {
      rows[i] += o(i, j);
      cols[j] += o(i, j);
      n += o(i, j);
    }
  long double stat = 0.0L;
  for (Eigen::Index i = 0; i < o.rows(); ++i)
    for (Eigen::Index j = 0; j < o.cols(); ++j) {
      const long double e = rows[i] * cols[j] / n;
      const long double d = o(i, j) - e;
      stat += d * d / e;
    }
  return static_cast<double>(stat);
}

/// Two-pass textbook Pearson correlation in long double.
inline double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

/// A random contingency table with every margin non-zero.
inline Eigen::MatrixXd random_table(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(2, 6), count(0, 60);
  for (;;) {
    Eigen::MatrixXd t(dim(rng), dim(rng));
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = count(rng);
    if ((t.rowwise().sum().array() > 0).all() && (t.colwise().sum().array() > 0).all()) return t;
  }
}

/// Pairs a student contributes, found by filtering the full L x L grid with set logic
/// instead of generating them: keep (h, p) with h <= p when h == p, or when p == D and h < D.
inline std::set<std::pair<int, int>> pair_oracle(std::optional<int> drop, int chapters) {
  std::set<std::pair<int, int>> out;
  for (int h = 1; h <= chapters; ++h)
    for (int p = 1; p <= chapters; ++p)
      if (h == p || (drop && p == *drop && h < p)) out.insert({h, p});
  return out;
}

// ---------------------------------------------------------------------------
// Intervention-week cohort: 9 students return on their own, 8 return after an email.

inline std::int64_t at_day(std::int64_t day_zero, double days) {
  return day_zero + static_cast<std::int64_t>(std::llround(days * double(kMillisPerDay)));
}

inline int day_index(double days) { return static_cast<int>(std::floor(days)) + 1; }

inline std::string text_of_length(std::size_t n) {
  static const std::string words = "the model keeps asking good questions about prompts ";
  std::string s;
  while (s.size() < n) s += words;
  s.resize(n);
  if (!s.empty() && s.back() == ' ') s.back() = '.';
  return s;
}

struct InterventionWeek {
  CourseLog log;
  std::set<std::string> intervened;
  std::vector<std::string> self_initiated;
  std::vector<std::string> recalled;
  int day = 65;
  int window = 3;
};

inline InterventionWeek intervention_week() {
  const auto spec = CohortSpec::reference().resolved();
  CourseMeta meta{"maic-week", 6, spec.chapter_titles, spec.concepts, spec.day_zero_ms};
  const auto z = meta.day_zero_ms;
  const double cutoff = 65.0;

  struct Plan {
    std::string id;
    std::optional<double> offline;  // nullopt: never logged in before the cutoff
    int progress;
    std::vector<int> lengths;  // pre-cutoff student messages
    int returns;               // post-window logins
  };
  auto lengths_around = [](int mean, int count) {
    std::vector<int> out;
    for (int k = -(count / 2); out.size() < std::size_t(count); ++k)
      if (count % 2 == 1 || k != 0) out.push_back(mean + k);
    return out;
  };
  const std::vector<double> self_offline{3.5, 4.25, 5.0, 5.5, 6.75, 8.0, 9.5, 10.0, 16.44};
  const std::vector<int> self_progress{3, 3, 3, 3, 3, 2, 2, 2, 2};
  const std::vector<int> self_counts{9, 9, 9, 9, 9, 9, 9, 8, 8};
  const std::vector<int> self_means{100, 104, 106, 106, 108, 110, 112, 105, 108};
  const std::vector<std::optional<double>> rec_offline{30.2, 51.5, 45.5, 50.0, 55.1, 60.0, 63.5, std::nullopt};
  const std::vector<int> rec_progress{1, 1, 1, 1, 1, 1, 0, 0};

  std::vector<Plan> plans;
  InterventionWeek week;
  for (int i = 0; i < 9; ++i) {
    plans.push_back({"self" + std::to_string(i + 1), self_offline[i], self_progress[i],
                     lengths_around(self_means[i], self_counts[i]), i < 4 ? 2 : 1});
    week.self_initiated.push_back(plans.back().id);
  }
  for (int i = 0; i < 8; ++i) {
    std::vector<int> lengths = (i == 0 || i == 3) ? std::vector<int>{3} : std::vector<int>{};
    plans.push_back({"back" + std::to_string(i + 1), rec_offline[i], rec_progress[i], lengths, i < 4 ? 2 : 1});
    week.recalled.push_back(plans.back().id);
    week.intervened.insert(plans.back().id);
  }
  // Active before the intervention, absent after it.
  for (int i = 0; i < 14; ++i) plans.push_back({"busy" + std::to_string(i + 1), 65.0 - (62.2 + 0.2 * i), 4, {40, 50}, 0});
  // Emailed but never came back.
  for (int i = 0; i < 3; ++i) {
    plans.push_back({"gone" + std::to_string(i + 1), 40.0 + i, 1, {}, 0});
    week.intervened.insert(plans.back().id);
  }

  std::vector<StudentProfile> students;
  std::vector<InteractionRecord> records;
  std::vector<SessionEvent> events;
  std::vector<CompletionMarker> markers;
  for (const auto& p : plans) {
    StudentProfile s;
    s.student_id = p.id;
    s.name = p.id;
    students.push_back(s);
    if (p.offline) {
      const double last = cutoff - *p.offline;
      events.push_back({p.id, EventKind::login, 1, at_day(z, 0.3)});
      events.push_back({p.id, EventKind::login, day_index(last), at_day(z, last)});
    }
    for (int c = 1; c <= p.progress; ++c) markers.push_back({p.id, c, at_day(z, 0.4 + 0.01 * c)});
    for (std::size_t m = 0; m < p.lengths.size(); ++m) {
      const double t = 0.35 + 0.001 * double(m);
      records.push_back({p.id, 1, at_day(z, t), Role::ai_teacher, text_of_length(300)});
      records.push_back({p.id, 1, at_day(z, t + 0.0001), Role::student, text_of_length(p.lengths[m])});
    }
    for (int r = 0; r < p.returns; ++r) {
      const double t = 65.2 + r + (p.id.size() % 3) * 0.1;
      events.push_back({p.id, EventKind::login, day_index(t), at_day(z, t)});
      // Post-intervention activity must not leak into the comparison.
      records.push_back({p.id, std::max(1, p.progress), at_day(z, t + 0.01), Role::student, text_of_length(500)});
    }
  }
  week.log = CourseLog::build(meta, students, records, events, markers);
  return week;
}

/// Group means recomputed straight from the raw vectors, one student at a time.
struct GroupMeans {
  double offline = 0, progress = 0, messages = 0, length = 0;
};

inline GroupMeans group_means_oracle(const CourseLog& log, const std::vector<std::string>& ids, int day) {
  const auto cutoff = log.meta().day_zero_ms + std::int64_t(day) * kMillisPerDay;
  GroupMeans g;
  for (const auto& id : ids) {
    std::optional<std::int64_t> last;
    for (const auto& e : log.events())
      if (e.student_id == id && e.timestamp_ms < cutoff && (!last || e.timestamp_ms > *last)) last = e.timestamp_ms;
    g.offline += last ? double(cutoff - *last) / double(kMillisPerDay) : double(day);
    for (const auto& m : log.markers())
      if (m.student_id == id && m.timestamp_ms < cutoff) g.progress += 1;
    double n = 0, chars = 0;
    for (const auto& r : log.records())
      if (r.student_id == id && r.role == Role::student && r.timestamp_ms < cutoff) {
        n += 1;
        chars += double(utf8_length(r.text));
      }
    g.messages += n;
    g.length += n > 0 ? chars / n : 0.0;
  }
  const double k = double(ids.size());
  return {g.offline / k, g.progress / k, g.messages / k, g.length / k};
}

// ---------------------------------------------------------------------------
// A small simulated course plus Fred, who asked about hallucinations in chapter 1 and
// then stopped.

inline CourseLog course_with_fred(std::uint64_t seed = 5) {
  auto spec = CohortSpec::reference();
  spec.histogram = {3, 3, 2, 1, 1, 1, 4};
  spec.seed = seed;
  const auto cohort = generate_cohort(spec);
  const auto& base = cohort.log;
  auto students = base.students();
  auto records = base.records();
  auto events = base.events();
  auto markers = base.markers();
  for (auto& s : students) s.email = s.student_id + "@example.org";

  const auto z = base.meta().day_zero_ms;
  StudentProfile fred;
  fred.student_id = "fred";
  fred.name = "Fred";
  fred.email = "fred@example.org";
  students.push_back(fred);
  events.push_back({"fred", EventKind::login, 2, at_day(z, 1.5)});
  records.push_back({"fred", 1, at_day(z, 1.51), Role::ai_teacher, "Welcome to the course! Today we look at what AI is."});
  records.push_back({"fred", 1, at_day(z, 1.52), Role::student, "ok"});
  records.push_back({"fred", 1, at_day(z, 1.53), Role::ai_peer, "I liked the history part."});
  records.push_back({"fred", 1, at_day(z, 1.54), Role::student,
                     "I am confused about Hallucination, why would a model invent facts?"});
  markers.push_back({"fred", 1, at_day(z, 1.6)});
  return CourseLog::build(base.meta(), students, records, events, markers);
}

}  // namespace fixtures
