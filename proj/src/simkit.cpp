#include "dropkit/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/prompt.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Spec

EngagementModel EngagementModel::defaults(int L) {
  EngagementModel m;
  for (int k = 0; k < L; ++k) {
    m.message_rate.push_back(1.0 + 1.0 * k);
    m.message_length.push_back(18.0 + 10.0 * k);
  }
  m.message_rate.push_back(3.0 + 1.0 * L);
  m.message_length.push_back(40.0 + 10.0 * L);
  return m;
}

namespace {

const std::vector<std::string> kDefaultTitles{
    "General Artificial Intelligence Overview", "Neural Networks and Deep Learning", "Large Language Models",
    "Prompt Engineering",                       "AI Agents and Tool Use",            "AI Ethics and Society"};

const std::vector<std::vector<std::string>> kDefaultConcepts{
    {"Turing Test", "Narrow AI", "General AI"},
    {"Neuron", "Backpropagation", "Gradient Descent"},
    {"Transformer", "Pretraining", "Hallucination"},
    {"Few-Shot Prompting", "Chain of Thought", "Role Prompting"},
    {"Planning", "Tool Calling", "Memory"},
    {"Bias", "Privacy", "Alignment"}};

}  // namespace

CohortSpec CohortSpec::resolved() const {
  CohortSpec s = *this;
  const int L = s.chapter_count;
  if (L < 1) throw ConfigError("cohort spec: chapters must be >= 1");
  if (s.chapter_titles.empty())
    for (int c = 1; c <= L; ++c)
      s.chapter_titles.push_back(L == 6 ? kDefaultTitles[c - 1] : "Chapter " + std::to_string(c));
  if (s.concepts.empty())
    for (int c = 1; c <= L; ++c)
      s.concepts.push_back(L == 6 ? kDefaultConcepts[c - 1]
                                  : std::vector<std::string>{"Topic " + std::to_string(c) + ".1",
                                                             "Topic " + std::to_string(c) + ".2"});
  const auto d = EngagementModel::defaults(L);
  if (s.engagement.message_rate.empty()) s.engagement.message_rate = d.message_rate;
  if (s.engagement.message_length.empty()) s.engagement.message_length = d.message_length;
  s.validate();
  return s;
}

void CohortSpec::validate() const {
  const int L = chapter_count;
  if (L < 1) throw ConfigError("cohort spec: chapters must be >= 1");
  if (static_cast<int>(histogram.size()) != L + 1)
    throw ConfigError("cohort spec: histogram needs " + std::to_string(L + 1) + " entries (levels 0..L)");
  if (std::any_of(histogram.begin(), histogram.end(), [](int n) { return n < 0; }))
    throw ConfigError("cohort spec: histogram entries must be >= 0");
  if (std::accumulate(histogram.begin(), histogram.end(), 0) == 0) throw ConfigError("cohort spec: histogram is all zero");
  if (static_cast<int>(chapter_titles.size()) != L) throw ConfigError("cohort spec: need one title per chapter");
  if (!concepts.empty() && static_cast<int>(concepts.size()) != L)
    throw ConfigError("cohort spec: need one concept list per chapter");
  const auto& e = engagement;
  if (static_cast<int>(e.message_rate.size()) != L + 1 || static_cast<int>(e.message_length.size()) != L + 1)
    throw ConfigError("cohort spec: engagement vectors need one entry per level 0..L");
  for (int k = 0; k <= L; ++k)
    if (!(e.message_rate[k] >= 0.0) || !(e.message_length[k] >= 1.0))
      throw ConfigError("cohort spec: rates must be >= 0 and lengths >= 1");
  if (e.rate_noise < 0 || e.length_sigma < 0 || e.drop_chapter_share < 0 || e.drop_chapter_share > 1)
    throw ConfigError("cohort spec: noise scales must be >= 0 and drop_chapter_share in [0, 1]");
  if (traits_missing_rate < 0 || traits_missing_rate > 1) throw ConfigError("cohort spec: traits_missing_rate in [0, 1]");
  // Completers must engage more than droppers on average.
  double dropper_rate = 0, droppers = 0;
  for (int k = 0; k < L; ++k) {
    dropper_rate += histogram[k] * e.message_rate[k];
    droppers += histogram[k];
  }
  if (droppers > 0 && !(e.message_rate[L] > dropper_rate / droppers))
    throw ConfigError("cohort spec: completer message rate must exceed the dropper mean rate");
}

CohortSpec CohortSpec::reference() {
  CohortSpec s;
  s.histogram = {34, 22, 8, 3, 7, 2, 110};
  return s.resolved();
}

CohortSpec parse_cohort_spec(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("cohort spec is not valid JSON: ") + e.what());
  }
  try {
    CohortSpec s;
    s.course_id = j.value("course_id", s.course_id);
    s.chapter_count = j.value("chapters", s.chapter_count);
    s.histogram = j.at("histogram").get<std::vector<int>>();
    if (j.contains("chapter_titles")) s.chapter_titles = j["chapter_titles"].get<std::vector<std::string>>();
    if (j.contains("concepts")) s.concepts = j["concepts"].get<std::vector<std::vector<std::string>>>();
    if (j.contains("engagement")) {
      const auto& e = j["engagement"];
      if (e.contains("message_rate")) s.engagement.message_rate = e["message_rate"].get<std::vector<double>>();
      if (e.contains("message_length")) s.engagement.message_length = e["message_length"].get<std::vector<double>>();
      s.engagement.rate_noise = e.value("rate_noise", s.engagement.rate_noise);
      s.engagement.length_sigma = e.value("length_sigma", s.engagement.length_sigma);
      s.engagement.drop_chapter_share = e.value("drop_chapter_share", s.engagement.drop_chapter_share);
    }
    s.day_zero_ms = j.value("day_zero_ms", s.day_zero_ms);
    s.traits_missing_rate = j.value("traits_missing_rate", s.traits_missing_rate);
    s.seed = j.value("seed", s.seed);
    return s.resolved();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed cohort spec: ") + e.what());
  }
}

std::string cohort_spec_json(const CohortSpec& s) {
  json j{{"course_id", s.course_id},
         {"chapters", s.chapter_count},
         {"histogram", s.histogram},
         {"chapter_titles", s.chapter_titles},
         {"concepts", s.concepts},
         {"engagement",
          {{"message_rate", s.engagement.message_rate},
           {"message_length", s.engagement.message_length},
           {"rate_noise", s.engagement.rate_noise},
           {"length_sigma", s.engagement.length_sigma},
           {"drop_chapter_share", s.engagement.drop_chapter_share}}},
         {"day_zero_ms", s.day_zero_ms},
         {"traits_missing_rate", s.traits_missing_rate},
         {"seed", s.seed}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Generation

namespace {

const std::vector<std::string> kFirstNames{"Ada",  "Bo",   "Chen", "Dana", "Emil", "Fred",  "Gita", "Hana",
                                           "Ivan", "Jun",  "Kai",  "Lena", "Mira", "Noor",  "Omar", "Pia"};
const std::vector<std::string> kLastNames{"Li",    "Smith", "Wang",  "Garcia", "Kim",   "Novak", "Okafor", "Silva",
                                          "Zhang", "Rossi", "Haddad", "Tanaka", "Meyer", "Singh", "Moreau", "Liu"};
const std::vector<std::string> kColleges{"Engineering", "Sciences", "Humanities", "Economics", "Medicine"};
const std::vector<std::string> kMajors{"Computer Science", "Physics", "Mathematics", "History",
                                       "Finance",          "Biology", "Law",         "Design"};
const std::vector<std::string> kGenders{"female", "male"};
const std::vector<std::string> kGrades{"freshman", "sophomore", "junior", "senior"};
const std::vector<std::string> kOpeners{"I think",     "Could you explain", "I'm confused about", "So basically",
                                        "Interesting,", "Why does",          "How does",           "Wait, is"};
const std::vector<std::string> kFiller{"the", "model", "idea", "example", "really", "works", "data", "learns",
                                       "this", "that", "because", "when", "means", "part", "step", "question"};
const std::vector<std::string> kReplies{
    "Good question. Let's look at {c} from another angle.",
    "Exactly, and {c} builds on that.",
    "Not quite. Think about how {c} behaves on new inputs.",
    "Nice. Here is a short example involving {c}.",
};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::string student_text(std::size_t length, const std::vector<std::string>& concepts, std::mt19937_64& rng) {
  std::string s = pick(kOpeners, rng);
  while (s.size() < length) {
    s += ' ';
    if (!concepts.empty() && std::uniform_int_distribution<int>(0, 3)(rng) == 0) s += pick(concepts, rng);
    else s += pick(kFiller, rng);
  }
  s.resize(length);
  while (!s.empty() && s.back() == ' ') s.back() = '?';
  return s;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) s.replace(at, from.size(), to);
  return s;
}

}  // namespace

SimulatedCohort generate_cohort(const CohortSpec& raw) {
  const CohortSpec spec = raw.resolved();
  const int L = spec.chapter_count;
  const auto& eng = spec.engagement;
  std::mt19937_64 rng(spec.seed);

  std::vector<int> levels;
  for (int k = 0; k <= L; ++k) levels.insert(levels.end(), static_cast<std::size_t>(spec.histogram[k]), k);
  std::shuffle(levels.begin(), levels.end(), rng);

  CourseMeta meta{spec.course_id, L, spec.chapter_titles, spec.concepts, spec.day_zero_ms};
  std::vector<StudentProfile> students;
  std::vector<InteractionRecord> records;
  std::vector<SessionEvent> events;
  std::vector<CompletionMarker> markers;
  std::vector<GroundTruth> truth;

  const int width = std::max<int>(4, static_cast<int>(std::to_string(levels.size()).size()));
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::string num = std::to_string(i + 1);
    const std::string id = "s" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    const int P = levels[i];
    std::mt19937_64 srng(derive_seed(spec.seed, id));

    StudentProfile p;
    p.student_id = id;
    p.name = pick(kFirstNames, srng) + " " + pick(kLastNames, srng);
    p.email = id + "@students.example";
    p.college = pick(kColleges, srng);
    p.major = pick(kMajors, srng);
    p.gender = pick(kGenders, srng);
    p.grade = pick(kGrades, srng);
    if (std::uniform_real_distribution<double>(0, 1)(srng) >= spec.traits_missing_rate) {
      TraitScores t;
      for (auto& v : t) v = std::uniform_int_distribution<int>(1, 5)(srng);
      p.traits = t;
    }
    students.push_back(p);
    truth.push_back({id, P, P < L ? std::optional<int>(P + 1) : std::nullopt});

    const double multiplier = std::exp(std::normal_distribution<double>(0.0, eng.rate_noise)(srng));
    const int start_day = std::uniform_int_distribution<int>(1, 7)(srng);
    const double pace = std::uniform_real_distribution<double>(3.0, 8.0)(srng);
    const double len_mu = std::log(eng.message_length[P]) - eng.length_sigma * eng.length_sigma / 2;
    std::lognormal_distribution<double> length_dist(len_mu, eng.length_sigma);

    int last_day = 0;
    const int engaged = std::min(P + 1, L);
    for (int k = 1; k <= engaged; ++k) {
      const auto& concepts = spec.concepts[k - 1];
      const int day = std::max(start_day + static_cast<int>(std::floor((k - 1) * pace)), last_day + 1);
      const bool abandoned = k == P + 1;
      const double lambda = eng.message_rate[P] * multiplier * (abandoned ? eng.drop_chapter_share : 1.0);
      const int messages = lambda > 0 ? std::poisson_distribution<int>(lambda)(srng) : 0;
      const int sessions = 1 + messages / 6;

      std::int64_t ts = 0;
      int m = 0;
      for (int s = 0; s < sessions; ++s) {
        const int d = day + s;
        last_day = d;
        ts = spec.day_zero_ms + std::int64_t(d - 1) * kMillisPerDay + 9 * 3'600'000LL +
             std::uniform_int_distribution<std::int64_t>(0, 120)(srng) * 60'000;
        events.push_back({id, EventKind::login, d, ts});
        ts += 10'000;
        if (s == 0) {
          std::string intro = "Welcome to Chapter " + std::to_string(k) + ": " + spec.chapter_titles[k - 1] + ".";
          if (!concepts.empty()) intro += " Today we cover " + concepts.front() + ".";
          records.push_back({id, k, ts, Role::ai_teacher, intro});
        }
        for (int n = 0; n < 6 && m < messages; ++n, ++m) {
          ts += std::uniform_int_distribution<std::int64_t>(30, 90)(srng) * 1000;
          const auto len = static_cast<std::size_t>(std::max(2.0, std::round(length_dist(srng))));
          records.push_back({id, k, ts, Role::student, student_text(len, concepts, srng)});
          ts += std::uniform_int_distribution<std::int64_t>(20, 60)(srng) * 1000;
          const Role role = std::array{Role::ai_teacher, Role::ai_ta, Role::ai_peer}[std::uniform_int_distribution<int>(0, 2)(srng)];
          const std::string concept_name = concepts.empty() ? spec.chapter_titles[k - 1] : pick(concepts, srng);
          records.push_back({id, k, ts, role, replace_all(pick(kReplies, srng), "{c}", concept_name)});
        }
      }
      if (k <= P) markers.push_back({id, k, ts + 60'000});
    }
  }
  return {CourseLog::build(std::move(meta), std::move(students), std::move(records), std::move(events),
                           std::move(markers)),
          std::move(truth)};
}

std::string emit_ground_truth(const std::vector<GroundTruth>& truth) {
  std::string out;
  for (const auto& t : truth) {
    json j{{"student_id", t.student_id}, {"progress", t.progress}};
    j["drop_chapter"] = t.drop_chapter ? json(*t.drop_chapter) : json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<GroundTruth> parse_ground_truth(std::string_view jsonl) {
  std::vector<GroundTruth> out;
  std::size_t n = 0;
  for (const auto& line : split_lines(jsonl)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      GroundTruth t;
      t.student_id = j.at("student_id").get<std::string>();
      t.progress = j.at("progress").get<int>();
      if (!j.at("drop_chapter").is_null()) t.drop_chapter = j["drop_chapter"].get<int>();
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ParseError(n, e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mock clients

namespace {

std::string verdict(bool dropout) { return std::string(dropout ? kVerdictDropout : kVerdictRetain) + "\n"; }

double per_engaged_chapter(std::string_view transcript) { return transcript_stats(transcript).messages_per_chapter(); }

}  // namespace

std::string FixedClient::complete(const std::string&, const DecodingParams&) { return verdict(dropout_); }

std::string EchoMajorityClient::complete(const std::string& prompt, const DecodingParams&) {
  const auto view = parse_prediction_prompt(prompt);
  long balance = 0;
  for (const auto& ex : view.examples)
    if (ex.label) balance += *ex.label ? 1 : -1;
  return verdict(balance == 0 ? tie_dropout_ : balance > 0);
}

std::string LengthHeuristicClient::complete(const std::string& prompt, const DecodingParams&) {
  const auto view = parse_prediction_prompt(prompt);
  if (!view.query) return "I could not find the student's transcript.";
  const auto stats = transcript_stats(view.query->transcript);
  return verdict(double(stats.student_chars) < chars_per_chapter_ * (view.query->history_start - 1));
}

std::string LengthHeuristicClient::tag() const {
  std::ostringstream out;
  out << "mock:length-heuristic:" << chars_per_chapter_;
  return out.str();
}

std::string TruthOracle::key(int h, int p, std::string_view transcript) {
  return std::to_string(h) + ":" + std::to_string(p) + ":" + sha256_hex(transcript);
}

TruthOracle::TruthOracle(const std::vector<PredictionInstance>& instances) {
  for (const auto& inst : instances) {
    auto& v = votes_[key(inst.history_start, inst.prediction_end, inst.transcript)];
    (inst.label ? v.first : v.second) += 1;
  }
}

std::optional<bool> TruthOracle::lookup(int h, int p, std::string_view transcript) const {
  auto it = votes_.find(key(h, p, transcript));
  if (it == votes_.end()) return std::nullopt;
  return it->second.first > it->second.second;
}

DiversityParams DiversityParams::calibrated(const std::vector<PredictionInstance>& pool) {
  DiversityParams p;
  double best = -1;
  for (const auto& inst : pool)
    if (!inst.label) best = std::max(best, per_engaged_chapter(inst.transcript));
  if (best >= 0) p.engaged_min = best;
  return p;
}

DiversitySensitiveClient::DiversitySensitiveClient(std::shared_ptr<const TruthOracle> oracle, DiversityParams params,
                                                   std::uint64_t seed)
    : oracle_(std::move(oracle)), params_(params), seed_(seed) {
  if (!oracle_) throw ConfigError("diversity-sensitive mock needs a truth oracle");
}

double DiversitySensitiveClient::correctness_probability(std::string_view prompt) const {
  const auto view = parse_prediction_prompt(prompt);
  bool retention = false, silent = false, engaged = false;
  int loud_dropouts = 0;
  for (const auto& ex : view.examples) {
    if (!ex.label) continue;
    const double mpc = per_engaged_chapter(ex.transcript);
    if (*ex.label) {
      if (mpc <= params_.silent_max) silent = true;
      else ++loud_dropouts;
    } else {
      retention = true;
      if (mpc >= params_.engaged_min) engaged = true;
    }
  }
  const bool extremes = silent && engaged;
  double q = params_.base;
  if (retention) q += params_.anchor;
  if (extremes) q += params_.extremes;
  if (extremes && view.examples.size() > 2) q += params_.casual;
  if (!extremes) q -= params_.penalty * loud_dropouts;
  return std::clamp(q, 0.0, 1.0);
}

std::string DiversitySensitiveClient::complete(const std::string& prompt, const DecodingParams&) {
  const auto view = parse_prediction_prompt(prompt);
  if (!view.query) return "No query found.";
  const auto& q = *view.query;
  const auto truth = oracle_->lookup(q.history_start, q.prediction_end, q.transcript);
  if (!truth) return verdict(false);
  // Common random number: depends on the query and seed only, never on the examples.
  const auto h = sha256_hex(std::to_string(seed_) + "|" + std::to_string(q.history_start) + "|" +
                            std::to_string(q.prediction_end) + "|" + q.transcript);
  const double u = double(std::stoull(h.substr(0, 13), nullptr, 16)) / double(1ULL << 52);
  const bool correct = u < correctness_probability(prompt);
  return verdict(correct ? *truth : !*truth);
}

std::string DiversitySensitiveClient::tag() const {
  std::ostringstream out;
  out << "mock:diversity:" << seed_ << ":" << params_.base << "," << params_.anchor << "," << params_.extremes << ","
      << params_.casual << "," << params_.penalty << "," << params_.silent_max << "," << params_.engaged_min;
  return out.str();
}

std::string FailingClient::complete(const std::string&, const DecodingParams&) {
  std::lock_guard lock(mutex_);
  ++calls_;
  if (remaining_ > 0) {
    --remaining_;
    throw TransportError("scripted transport failure");
  }
  return then_;
}

std::string ScriptedTextClient::complete(const std::string& prompt, const DecodingParams&) {
  std::lock_guard lock(mutex_);
  if (responses_.empty()) throw TransportError("scripted client has no responses");
  const std::size_t i = std::min(prompts_.size(), responses_.size() - 1);
  prompts_.push_back(prompt);
  return responses_[i];
}

std::vector<std::string> ScriptedTextClient::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

std::string EchoEmailClient::complete(const std::string& prompt, const DecodingParams&) {
  std::string name, last, next;
  std::vector<std::string> excerpts;
  bool in_excerpts = false;
  for (const auto& line : split_lines(prompt)) {
    auto field = [&](std::string_view label, std::string& out) {
      if (line.rfind(label, 0) == 0) out = std::string(trim(std::string_view(line).substr(label.size())));
    };
    field("Student name:", name);
    field("Last completed chapter:", last);
    field("Next chapter:", next);
    if (line.rfind("Things the student said earlier:", 0) == 0) {
      in_excerpts = true;
      continue;
    }
    if (in_excerpts) {
      if (line.rfind("- \"", 0) == 0 && line.size() >= 4) excerpts.push_back(line.substr(3, line.size() - 4));
      else in_excerpts = false;
    }
  }
  if (name.empty()) return "SUBJECT: Come back to the course\nBODY:\n" + prompt;
  std::string body = "Hi " + name + ",\n\n";
  if (!excerpts.empty())
    body += "Last time, while working on \"" + last + "\", you wrote: \"" + excerpts.front() +
            "\". That was a great question, and we would love to pick it up with you again.\n\n";
  else if (last != "none yet")
    body += "You already finished \"" + last + "\". It has been a while, and your classmates miss you.\n\n";
  else
    body += "You signed up a while ago and your first chapter is ready whenever you are.\n\n";
  body += "Next up is \"" + next + "\". Your AI teacher and classmates are ready when you are.\n\nSee you in class!";
  return "SUBJECT: " + name + ", \"" + next + "\" is waiting for you\nBODY:\n" + body + "\n";
}

// ---------------------------------------------------------------------------

MockClientScript parse_mock_script(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("mock client script is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("mock client script needs a \"kind\"");
  MockClientScript s;
  for (const auto& [k, v] : j.items()) {
    if (k == "kind") s.kind = v.get<std::string>();
    else if (k == "seed") s.seed = v.get<std::uint64_t>();
    else if (k == "params" && v.is_object())
      for (const auto& [pk, pv] : v.items()) s.params[pk] = pv.is_string() ? pv.get<std::string>() : pv.dump();
    else s.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  return s;
}

std::shared_ptr<TextModelClient> make_mock_client(const MockClientScript& script,
                                                  const std::vector<PredictionInstance>* truth) {
  auto get = [&](const std::string& key, const std::string& fallback) {
    auto it = script.params.find(key);
    return it == script.params.end() ? fallback : it->second;
  };
  auto number = [&](const std::string& key, double fallback) {
    auto it = script.params.find(key);
    if (it == script.params.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("mock client parameter '" + key + "' is not a number");
    }
  };
  auto verdict_param = [&](const std::string& key, const std::string& fallback) {
    const auto v = to_lower(get(key, fallback));
    if (v != "dropout" && v != "retain") throw ConfigError("mock client parameter '" + key + "' must be dropout|retain");
    return v == "dropout";
  };
  if (script.kind == "fixed") return std::make_shared<FixedClient>(verdict_param("verdict", "retain"));
  if (script.kind == "echo_majority_example_label")
    return std::make_shared<EchoMajorityClient>(verdict_param("tie", "retain"));
  if (script.kind == "length_heuristic")
    return std::make_shared<LengthHeuristicClient>(number("chars_per_chapter", 150.0));
  if (script.kind == "failing")
    return std::make_shared<FailingClient>(static_cast<int>(number("failures", 1)), get("then", verdict(false)));
  if (script.kind == "echo_email") return std::make_shared<EchoEmailClient>();
  if (script.kind == "diversity_sensitive") {
    if (!truth) throw ConfigError("diversity_sensitive mock needs labeled instances");
    auto p = DiversityParams::calibrated(*truth);
    p.base = number("base", p.base);
    p.anchor = number("anchor", p.anchor);
    p.extremes = number("extremes", p.extremes);
    p.casual = number("casual", p.casual);
    p.penalty = number("penalty", p.penalty);
    p.silent_max = number("silent_max", p.silent_max);
    p.engaged_min = number("engaged_min", p.engaged_min);
    return std::make_shared<DiversitySensitiveClient>(std::make_shared<TruthOracle>(*truth), p, script.seed);
  }
  throw ConfigError("unknown mock client kind '" + script.kind + "'");
}

// ---------------------------------------------------------------------------

MockEmbeddingClient::MockEmbeddingClient(int dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension < 2) throw ConfigError("mock embedding dimension must be >= 2");
}

Eigen::VectorXd MockEmbeddingClient::embed(const std::string& text) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension_);
  for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
    std::uint64_t h = 1469598103934665603ULL ^ seed_;
    for (std::size_t k = 0; k < 3; ++k) {
      h ^= static_cast<unsigned char>(text[i + k]);
      h *= 1099511628211ULL;
    }
    h ^= h >> 29;
    v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dimension_))) += (h >> 63) ? -1.0 : 1.0;
  }
  const double n = v.norm();
  if (n == 0.0) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / n;
}

std::string MockEmbeddingClient::tag() const {
  return "mock-embed:" + std::to_string(dimension_) + ":" + std::to_string(seed_);
}

}  // namespace dropkit
