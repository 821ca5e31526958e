#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dropkit/clients.hpp"
#include "dropkit/dataset.hpp"
#include "dropkit/log_core.hpp"

namespace dropkit {

// ---------------------------------------------------------------------------
// Cohort generation

/// Per completion level k = 0..L (k = L are completers).
struct EngagementModel {
  std::vector<double> message_rate;    // mean student messages per engaged chapter
  std::vector<double> message_length;  // mean characters per student message
  double rate_noise = 0.15;            // sd of a per-student log-normal rate multiplier
  double length_sigma = 0.35;          // log-normal shape of single message lengths
  double drop_chapter_share = 0.4;     // share of the usual rate spent in the abandoned chapter

  static EngagementModel defaults(int chapter_count);
};

struct CohortSpec {
  std::string course_id = "sim-course";
  int chapter_count = 6;
  std::vector<std::string> chapter_titles;         // defaults when empty
  std::vector<std::vector<std::string>> concepts;  // defaults when empty
  std::vector<int> histogram;                      // students per completion level 0..L
  EngagementModel engagement;                      // defaults when the vectors are empty
  std::int64_t day_zero_ms = 1'725'148'800'000;  // 2024-09-01T00:00:00Z
  double traits_missing_rate = 0.1;
  std::uint64_t seed = 7;

  /// Fills defaults for titles, concepts and engagement, then checks invariants.
  CohortSpec resolved() const;
  void validate() const;

  /// 186 students with completion levels (34, 22, 8, 3, 7, 2, 110) over 6 chapters.
  static CohortSpec reference();
};

CohortSpec parse_cohort_spec(std::string_view json_text);
std::string cohort_spec_json(const CohortSpec& spec);

struct GroundTruth {
  std::string student_id;
  int progress = 0;
  std::optional<int> drop_chapter;
  bool operator==(const GroundTruth&) const = default;
};

struct SimulatedCohort {
  CourseLog log;
  std::vector<GroundTruth> truth;  // student order
};

/// Deterministic under spec.seed. Each student's chapters 1..min(P+1, L) are engaged;
/// completion markers cover 1..P; logins follow the study sessions.
SimulatedCohort generate_cohort(const CohortSpec& spec);

std::string emit_ground_truth(const std::vector<GroundTruth>& truth);
std::vector<GroundTruth> parse_ground_truth(std::string_view jsonl);

// ---------------------------------------------------------------------------
// Mock text clients

class FixedClient : public TextModelClient {
public:
  explicit FixedClient(bool dropout) : dropout_(dropout) {}
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override { return dropout_ ? "mock:fixed-dropout" : "mock:fixed-retain"; }

private:
  bool dropout_;
};

/// Verdict = majority label among the prompt's examples; ties and zero-shot prompts fall
/// back to `tie_dropout`.
class EchoMajorityClient : public TextModelClient {
public:
  explicit EchoMajorityClient(bool tie_dropout = false) : tie_dropout_(tie_dropout) {}
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override { return "mock:echo-majority"; }

private:
  bool tie_dropout_;
};

/// DROPOUT iff the query transcript holds fewer than chars_per_chapter * (C_h - 1)
/// student-written characters.
class LengthHeuristicClient : public TextModelClient {
public:
  explicit LengthHeuristicClient(double chars_per_chapter = 150.0) : chars_per_chapter_(chars_per_chapter) {}
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override;

private:
  double chars_per_chapter_;
};

/// Majority label per (C_h, C_p, transcript); what the diversity-sensitive mock "knows".
class TruthOracle {
public:
  explicit TruthOracle(const std::vector<PredictionInstance>& instances);
  std::optional<bool> lookup(int history_start, int prediction_end, std::string_view transcript) const;

private:
  std::map<std::string, std::pair<std::size_t, std::size_t>> votes_;  // key -> (dropout, retain)
  static std::string key(int history_start, int prediction_end, std::string_view transcript);
};

/// Answers correctly with probability q, where q depends only on the examples shown:
///   q = base + anchor   * [a retention example is shown]
///            + extremes * [a silent dropout and a highly engaged retention are both shown]
///            + casual   * [both extremes plus at least one other example]
///            - penalty  * (dropout examples that are not silent, when the extremes are absent)
/// clamped to [0, 1]. "Silent": student messages per engaged chapter <= silent_max.
/// "Highly engaged": messages per engaged chapter >= engaged_min. The draw is a common
/// random number per query, so a prompt with higher q is correct whenever a lower-q prompt
/// for the same query is.
struct DiversityParams {
  double base = 0.55;
  double anchor = 0.10;
  double extremes = 0.12;
  double casual = 0.05;
  double penalty = 0.06;
  double silent_max = 0.0;
  double engaged_min = 1e9;

  /// Sets engaged_min to the highest messages-per-chapter among retention examples of the pool.
  static DiversityParams calibrated(const std::vector<PredictionInstance>& pool);
};

class DiversitySensitiveClient : public TextModelClient {
public:
  DiversitySensitiveClient(std::shared_ptr<const TruthOracle> oracle, DiversityParams params, std::uint64_t seed);
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override;

  /// The q this client would use for the prompt's examples.
  double correctness_probability(std::string_view prompt) const;

private:
  std::shared_ptr<const TruthOracle> oracle_;
  DiversityParams params_;
  std::uint64_t seed_;
};

/// Throws TransportError for the first `failures` calls, then returns `then` (forever).
class FailingClient : public TextModelClient {
public:
  FailingClient(int failures, std::string then) : remaining_(failures), then_(std::move(then)) {}
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override { return "mock:failing"; }
  int calls() const { return calls_; }

private:
  std::mutex mutex_;
  int remaining_;
  int calls_ = 0;
  std::string then_;
};

/// Returns the scripted responses in order, then repeats the last one.
class ScriptedTextClient : public TextModelClient {
public:
  explicit ScriptedTextClient(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override { return "mock:scripted"; }
  std::vector<std::string> prompts() const;

private:
  mutable std::mutex mutex_;
  std::vector<std::string> responses_;
  std::vector<std::string> prompts_;
};

/// Writes a recall email from the fields of an email prompt (name, chapters, excerpts).
class EchoEmailClient : public TextModelClient {
public:
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override { return "mock:echo-email"; }
};

/// Behavior kind plus parameters, as stored in config files.
struct MockClientScript {
  std::string kind;  // fixed | echo_majority_example_label | length_heuristic | diversity_sensitive | failing | echo_email
  std::map<std::string, std::string> params;
  std::uint64_t seed = 0;
};

MockClientScript parse_mock_script(std::string_view json_text);

/// `truth` is required for diversity_sensitive (it supplies the oracle and calibration).
std::shared_ptr<TextModelClient> make_mock_client(const MockClientScript& script,
                                                  const std::vector<PredictionInstance>* truth = nullptr);

// ---------------------------------------------------------------------------

/// Signed feature hashing of character trigrams, L2-normalized. Texts that share trigrams
/// land close together; the empty text maps to the first basis vector.
class MockEmbeddingClient : public EmbeddingClient {
public:
  MockEmbeddingClient(int dimension, std::uint64_t seed);
  Eigen::VectorXd embed(const std::string& text) override;
  int dimension() const override { return dimension_; }
  std::string tag() const override;

private:
  int dimension_;
  std::uint64_t seed_;
};

}  // namespace dropkit
