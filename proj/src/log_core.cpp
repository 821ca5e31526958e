#include "dropkit/log_core.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::student: return "student";
    case Role::ai_teacher: return "ai_teacher";
    case Role::ai_ta: return "ai_ta";
    case Role::ai_peer: return "ai_peer";
  }
  return "student";
}

std::optional<Role> parse_role(std::string_view name) {
  if (name == "student") return Role::student;
  if (name == "ai_teacher") return Role::ai_teacher;
  if (name == "ai_ta") return Role::ai_ta;
  if (name == "ai_peer") return Role::ai_peer;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Completion

std::vector<CompletionState> compute_completion(const std::vector<StudentProfile>& students,
                                                const std::vector<CompletionMarker>& markers,
                                                int chapter_count) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<CompletionState> states(students.size());
  for (std::size_t i = 0; i < students.size(); ++i) {
    states[i].student_id = students[i].student_id;
    index.emplace(students[i].student_id, i);
  }
  for (const auto& m : markers) {
    auto it = index.find(m.student_id);
    if (it == index.end())
      throw ReferentialError("completion marker for unknown student '" + m.student_id + "'");
    if (m.chapter < 1 || m.chapter > chapter_count)
      throw ValidationError("completion marker chapter " + std::to_string(m.chapter) +
                            " outside [1, " + std::to_string(chapter_count) + "]");
    states[it->second].completed.insert(m.chapter);
  }
  for (auto& s : states) {
    s.progress = static_cast<int>(s.completed.size());
    // Sequential iff S = {1..P}; std::set is ordered so the last element must be P.
    if (!s.completed.empty() && *s.completed.rbegin() != s.progress) {
      int gap = 1;
      while (s.completed.count(gap)) ++gap;
      throw NonSequentialCompletion("student '" + s.student_id + "' completed chapter " +
                                    std::to_string(*s.completed.rbegin()) +
                                    " without chapter " + std::to_string(gap));
    }
    s.drop_chapter = s.progress < chapter_count ? std::optional<int>(s.progress + 1) : std::nullopt;
  }
  return states;
}

// ---------------------------------------------------------------------------
// CourseLog

CourseLog CourseLog::build(CourseMeta meta, std::vector<StudentProfile> students,
                           std::vector<InteractionRecord> records,
                           std::vector<SessionEvent> events,
                           std::vector<CompletionMarker> markers) {
  if (meta.chapter_count < 1) throw ValidationError("chapter_count must be >= 1");
  if (meta.chapter_titles.empty()) {
    for (int c = 1; c <= meta.chapter_count; ++c)
      meta.chapter_titles.push_back("Chapter " + std::to_string(c));
  }
  if (static_cast<int>(meta.chapter_titles.size()) != meta.chapter_count)
    throw ValidationError("chapter_titles has " + std::to_string(meta.chapter_titles.size()) +
                          " entries for " + std::to_string(meta.chapter_count) + " chapters");
  if (!meta.concepts.empty() && static_cast<int>(meta.concepts.size()) != meta.chapter_count)
    throw ValidationError("concepts must list one entry per chapter");

  CourseLog log;
  for (std::size_t i = 0; i < students.size(); ++i) {
    const auto& s = students[i];
    if (s.student_id.empty()) throw ValidationError("empty student_id");
    if (!log.index_.emplace(s.student_id, i).second)
      throw ValidationError("duplicate student_id '" + s.student_id + "'");
    if (s.traits) {
      for (int score : *s.traits) {
        if (score < 1 || score > 5)
          throw ValidationError("trait score " + std::to_string(score) + " for '" + s.student_id +
                                "' outside [1, 5]");
      }
    }
  }
  for (const auto& r : records) {
    if (!log.index_.count(r.student_id))
      throw ReferentialError("message for unknown student '" + r.student_id + "'");
    if (r.chapter < 1 || r.chapter > meta.chapter_count)
      throw ValidationError("message chapter " + std::to_string(r.chapter) + " outside [1, " +
                            std::to_string(meta.chapter_count) + "]");
    if (r.role == Role::student && trim(r.text).empty())
      throw ValidationError("empty student message from '" + r.student_id + "'");
  }
  for (const auto& e : events) {
    if (!log.index_.count(e.student_id))
      throw ReferentialError("login for unknown student '" + e.student_id + "'");
    if (e.day_index < 1) throw ValidationError("day_index must be >= 1");
  }

  auto by_time = [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; };
  std::stable_sort(records.begin(), records.end(), by_time);
  std::stable_sort(events.begin(), events.end(), by_time);
  std::stable_sort(markers.begin(), markers.end(), by_time);

  log.completions_ = compute_completion(students, markers, meta.chapter_count);
  log.per_student_records_.resize(students.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    log.per_student_records_[log.index_.at(records[i].student_id)].push_back(i);

  log.meta_ = std::move(meta);
  log.students_ = std::move(students);
  log.records_ = std::move(records);
  log.events_ = std::move(events);
  log.markers_ = std::move(markers);
  return log;
}

std::size_t CourseLog::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ReferentialError("unknown student '" + std::string(id) + "'");
  return it->second;
}

bool CourseLog::has_student(std::string_view id) const { return index_.count(std::string(id)) > 0; }
const StudentProfile& CourseLog::student(std::string_view id) const { return students_[index_of(id)]; }
const CompletionState& CourseLog::completion(std::string_view id) const {
  return completions_[index_of(id)];
}
const std::vector<std::size_t>& CourseLog::record_indices(std::string_view id) const {
  return per_student_records_[index_of(id)];
}

bool CourseLog::operator==(const CourseLog& other) const {
  return meta_ == other.meta_ && students_ == other.students_ && records_ == other.records_ &&
         events_ == other.events_ && markers_ == other.markers_;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

template <typename T>
T require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null())
    throw ParseError(line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(line, std::string("field '") + key + "' has the wrong type");
  }
}

std::string optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  return (it != obj.end() && it->is_string()) ? it->get<std::string>() : std::string{};
}

std::optional<TraitScores> parse_traits(const json& obj, std::size_t line) {
  auto it = obj.find("traits");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_object()) throw ParseError(line, "traits must be an object");
  TraitScores scores{};
  for (std::size_t k = 0; k < kTraitNames.size(); ++k) {
    auto t = it->find(std::string(kTraitNames[k]));
    if (t == it->end() || t->is_null()) return std::nullopt;
    if (!t->is_number_integer()) throw ParseError(line, "trait scores must be integers");
    scores[k] = t->get<int>();
  }
  return scores;
}

}  // namespace

CourseLog parse_course_log(std::istream& in) {
  std::optional<CourseMeta> meta;
  std::vector<StudentProfile> students;
  std::vector<InteractionRecord> records;
  std::vector<SessionEvent> events;
  std::vector<CompletionMarker> markers;
  std::unordered_map<std::string, std::size_t> declared;
  // (student_id, line) for every reference, checked once all students are known.
  std::vector<std::pair<std::string, std::size_t>> references;

  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (trim(raw).empty()) continue;
    json obj;
    try {
      obj = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line, "expected a JSON object");
    auto kind = require<std::string>(obj, "kind", line);

    if (!meta) {
      if (kind != "course.meta") throw ParseError(line, "first record must be course.meta");
      CourseMeta m;
      m.course_id = require<std::string>(obj, "course_id", line);
      m.chapter_count = require<int>(obj, "chapter_count", line);
      if (obj.contains("chapter_titles"))
        m.chapter_titles = require<std::vector<std::string>>(obj, "chapter_titles", line);
      if (obj.contains("concepts") && !obj["concepts"].is_null())
        m.concepts = require<std::vector<std::vector<std::string>>>(obj, "concepts", line);
      if (obj.contains("day_zero_ms")) m.day_zero_ms = require<std::int64_t>(obj, "day_zero_ms", line);
      meta = std::move(m);
      continue;
    }

    if (kind == "course.meta") {
      throw ParseError(line, "duplicate course.meta");
    } else if (kind == "student") {
      StudentProfile s;
      s.student_id = require<std::string>(obj, "student_id", line);
      s.name = optional_string(obj, "name");
      s.email = optional_string(obj, "email");
      s.college = optional_string(obj, "college");
      s.major = optional_string(obj, "major");
      s.gender = optional_string(obj, "gender");
      s.grade = optional_string(obj, "grade");
      s.traits = parse_traits(obj, line);
      if (s.traits) {
        for (int v : *s.traits)
          if (v < 1 || v > 5) throw ParseError(line, "trait score outside [1, 5]");
      }
      if (!declared.emplace(s.student_id, line).second)
        throw ParseError(line, "duplicate student_id '" + s.student_id + "'");
      students.push_back(std::move(s));
    } else if (kind == "message") {
      InteractionRecord r;
      r.student_id = require<std::string>(obj, "student_id", line);
      r.chapter = require<int>(obj, "chapter", line);
      r.timestamp_ms = require<std::int64_t>(obj, "timestamp", line);
      auto role = parse_role(require<std::string>(obj, "role", line));
      if (!role) throw ParseError(line, "unknown role");
      r.role = *role;
      r.text = require<std::string>(obj, "text", line);
      if (r.chapter < 1 || r.chapter > meta->chapter_count)
        throw ParseError(line, "chapter " + std::to_string(r.chapter) + " outside [1, " +
                                   std::to_string(meta->chapter_count) + "]");
      if (r.role == Role::student && trim(r.text).empty())
        throw ParseError(line, "empty student message");
      references.emplace_back(r.student_id, line);
      records.push_back(std::move(r));
    } else if (kind == "login") {
      SessionEvent e;
      e.student_id = require<std::string>(obj, "student_id", line);
      e.day_index = require<int>(obj, "day", line);
      e.timestamp_ms = require<std::int64_t>(obj, "timestamp", line);
      if (e.day_index < 1) throw ParseError(line, "day must be >= 1");
      references.emplace_back(e.student_id, line);
      events.push_back(std::move(e));
    } else if (kind == "chapter_complete") {
      CompletionMarker m;
      m.student_id = require<std::string>(obj, "student_id", line);
      m.chapter = require<int>(obj, "chapter", line);
      m.timestamp_ms = require<std::int64_t>(obj, "timestamp", line);
      if (m.chapter < 1 || m.chapter > meta->chapter_count)
        throw ParseError(line, "chapter " + std::to_string(m.chapter) + " outside [1, " +
                                   std::to_string(meta->chapter_count) + "]");
      references.emplace_back(m.student_id, line);
      markers.push_back(std::move(m));
    } else {
      throw ParseError(line, "unknown kind '" + kind + "'");
    }
  }
  if (!meta) throw ParseError(line, "missing course.meta header");
  for (const auto& [id, at] : references) {
    if (!declared.count(id))
      throw ReferentialError("line " + std::to_string(at) + ": unknown student_id '" + id + "'");
  }
  return CourseLog::build(std::move(*meta), std::move(students), std::move(records),
                          std::move(events), std::move(markers));
}

CourseLog parse_course_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorClass::io, "cannot open course log " + path);
  return parse_course_log(in);
}

std::string emit_course_log(const CourseLog& log) {
  std::ostringstream out;
  const auto& m = log.meta();
  json meta = {{"kind", "course.meta"},
               {"course_id", m.course_id},
               {"chapter_count", m.chapter_count},
               {"chapter_titles", m.chapter_titles},
               {"day_zero_ms", m.day_zero_ms}};
  if (!m.concepts.empty()) meta["concepts"] = m.concepts;
  out << meta.dump() << '\n';
  for (const auto& s : log.students()) {
    json j = {{"kind", "student"}, {"student_id", s.student_id}, {"name", s.name},
              {"email", s.email},  {"college", s.college},       {"major", s.major},
              {"gender", s.gender}, {"grade", s.grade}};
    if (s.traits) {
      json t = json::object();
      for (std::size_t k = 0; k < kTraitNames.size(); ++k) t[std::string(kTraitNames[k])] = (*s.traits)[k];
      j["traits"] = t;
    } else {
      j["traits"] = nullptr;
    }
    out << j.dump() << '\n';
  }
  for (const auto& mk : log.markers()) {
    out << json{{"kind", "chapter_complete"},
                {"student_id", mk.student_id},
                {"chapter", mk.chapter},
                {"timestamp", mk.timestamp_ms}}
               .dump()
        << '\n';
  }
  for (const auto& r : log.records()) {
    out << json{{"kind", "message"},
                {"student_id", r.student_id},
                {"chapter", r.chapter},
                {"timestamp", r.timestamp_ms},
                {"role", std::string(to_string(r.role))},
                {"text", r.text}}
               .dump()
        << '\n';
  }
  for (const auto& e : log.events()) {
    out << json{{"kind", "login"},
                {"student_id", e.student_id},
                {"day", e.day_index},
                {"timestamp", e.timestamp_ms}}
               .dump()
        << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Transcripts

std::vector<InteractionRecord> history_slice(const CourseLog& log, std::string_view student_id,
                                             int history_start) {
  if (history_start < 1 || history_start > log.chapter_count())
    throw ValidationError("history start chapter " + std::to_string(history_start) +
                          " outside [1, " + std::to_string(log.chapter_count()) + "]");
  std::vector<InteractionRecord> out;
  for (auto i : log.record_indices(student_id)) {
    const auto& r = log.records()[i];
    if (r.chapter < history_start) out.push_back(r);
  }
  return out;
}

namespace {

void append_escaped(std::string& out, std::string_view text) {
  for (char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
}

std::string unescape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      char n = text[++i];
      out.push_back(n == 'n' ? '\n' : n == 'r' ? '\r' : n);
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

constexpr std::string_view kChapterHeader = "## Chapter ";

}  // namespace

std::string serialize_transcript(const std::vector<InteractionRecord>& records,
                                 const std::vector<std::string>& chapter_titles) {
  if (records.empty()) return std::string(kNoPriorInteractions) + "\n";
  std::vector<const InteractionRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->chapter < b->chapter; });

  std::string out;
  int current = 0;
  for (const auto* r : order) {
    if (r->chapter != current) {
      current = r->chapter;
      out += kChapterHeader;
      out += std::to_string(current);
      if (current >= 1 && current <= static_cast<int>(chapter_titles.size())) {
        out += ": ";
        append_escaped(out, chapter_titles[current - 1]);
      }
      out += '\n';
    }
    out += to_string(r->role);
    out += ": ";
    append_escaped(out, r->text);
    out += '\n';
  }
  return out;
}

TranscriptStats transcript_stats(std::string_view transcript) {
  TranscriptStats stats;
  bool counted_chapter = false;
  for (const auto& line : split_lines(transcript)) {
    std::string_view view(line);
    if (view.substr(0, kChapterHeader.size()) == kChapterHeader) {
      counted_chapter = false;
      continue;
    }
    auto colon = view.find(": ");
    if (colon == std::string_view::npos) continue;
    auto role = parse_role(view.substr(0, colon));
    if (!role) continue;
    ++stats.total_lines;
    if (*role != Role::student) continue;
    ++stats.student_messages;
    stats.student_chars += utf8_length(unescape(view.substr(colon + 2)));
    if (!counted_chapter) {
      ++stats.chapters_engaged;
      counted_chapter = true;
    }
  }
  return stats;
}

}  // namespace dropkit
