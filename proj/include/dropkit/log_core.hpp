#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dropkit {

enum class Role { student, ai_teacher, ai_ta, ai_peer };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view name);

/// The five self-rated trait indicators, in this fixed order.
enum class Trait { LM = 0, ASE, LP, SR, LLMF };
inline constexpr std::array<std::string_view, 5> kTraitNames{"LM", "ASE", "LP", "SR", "LLMF"};
using TraitScores = std::array<int, 5>;

struct StudentProfile {
  std::string student_id;
  std::string name;
  std::string email;
  std::string college;
  std::string major;
  std::string gender;
  std::string grade;
  std::optional<TraitScores> traits;  // nullopt = traits missing

  bool traits_missing() const { return !traits.has_value(); }
  bool operator==(const StudentProfile&) const = default;
};

struct InteractionRecord {
  std::string student_id;
  int chapter = 1;
  std::int64_t timestamp_ms = 0;
  Role role = Role::student;
  std::string text;

  bool operator==(const InteractionRecord&) const = default;
};

enum class EventKind { login };

struct SessionEvent {
  std::string student_id;
  EventKind kind = EventKind::login;
  int day_index = 1;
  std::int64_t timestamp_ms = 0;

  bool operator==(const SessionEvent&) const = default;
};

struct CompletionMarker {
  std::string student_id;
  int chapter = 1;
  std::int64_t timestamp_ms = 0;

  bool operator==(const CompletionMarker&) const = default;
};

/// S, P = |S|, and the drop chapter D (nullopt for completers).
struct CompletionState {
  std::string student_id;
  std::set<int> completed;
  int progress = 0;
  std::optional<int> drop_chapter;

  bool is_completer() const { return !drop_chapter.has_value(); }
  bool operator==(const CompletionState&) const = default;
};

struct CourseMeta {
  std::string course_id;
  int chapter_count = 0;
  std::vector<std::string> chapter_titles;
  /// Optional outline terms per chapter (same length as titles when present).
  std::vector<std::vector<std::string>> concepts;
  /// Epoch ms at which day 1 begins; day d covers [day_zero + (d-1) days, day_zero + d days).
  std::int64_t day_zero_ms = 0;

  bool operator==(const CourseMeta&) const = default;
};

/// A validated course log. Immutable once built; safe to share between readers.
class CourseLog {
public:
  /// Validates references and bounds, sorts by timestamp (stable), and computes completion.
  static CourseLog build(CourseMeta meta, std::vector<StudentProfile> students,
                         std::vector<InteractionRecord> records, std::vector<SessionEvent> events,
                         std::vector<CompletionMarker> markers);

  const CourseMeta& meta() const { return meta_; }
  int chapter_count() const { return meta_.chapter_count; }
  const std::vector<StudentProfile>& students() const { return students_; }
  const std::vector<InteractionRecord>& records() const { return records_; }
  const std::vector<SessionEvent>& events() const { return events_; }
  const std::vector<CompletionMarker>& markers() const { return markers_; }
  /// One entry per student, in student declaration order.
  const std::vector<CompletionState>& completions() const { return completions_; }

  bool has_student(std::string_view id) const;
  const StudentProfile& student(std::string_view id) const;
  const CompletionState& completion(std::string_view id) const;
  /// Indices into records() for one student, time-ordered.
  const std::vector<std::size_t>& record_indices(std::string_view id) const;

  bool operator==(const CourseLog& other) const;

private:
  CourseMeta meta_;
  std::vector<StudentProfile> students_;
  std::vector<InteractionRecord> records_;
  std::vector<SessionEvent> events_;
  std::vector<CompletionMarker> markers_;
  std::vector<CompletionState> completions_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> per_student_records_;

  std::size_t index_of(std::string_view id) const;
};

CourseLog parse_course_log(std::istream& in);
CourseLog parse_course_log_file(const std::string& path);
/// Inverse of parse_course_log: one JSON object per line, `course.meta` first.
std::string emit_course_log(const CourseLog& log);

/// Builds completion state from explicit chapter_complete markers. Students without
/// markers get P = 0, D = 1. Gaps throw NonSequentialCompletion.
std::vector<CompletionState> compute_completion(const std::vector<StudentProfile>& students,
                                                const std::vector<CompletionMarker>& markers,
                                                int chapter_count);

/// The student's records with chapter < history_start, time-ordered.
std::vector<InteractionRecord> history_slice(const CourseLog& log, std::string_view student_id,
                                             int history_start);

inline constexpr std::string_view kNoPriorInteractions = "[NO PRIOR INTERACTIONS]";

/// Deterministic text form of a time-ordered record list: records are grouped by chapter
/// (ascending) under a `## Chapter k: title` header, each as `role: text`. Backslashes and
/// line breaks inside text are escaped so every record stays on one line.
std::string serialize_transcript(const std::vector<InteractionRecord>& records,
                                 const std::vector<std::string>& chapter_titles);

/// Student-authored engagement measured back from a serialized transcript.
struct TranscriptStats {
  std::size_t student_messages = 0;
  std::size_t student_chars = 0;
  std::size_t chapters_engaged = 0;  // chapters with >= 1 student message
  std::size_t total_lines = 0;       // all role lines, any author

  double mean_message_length() const {
    return student_messages == 0 ? 0.0 : double(student_chars) / double(student_messages);
  }
  double messages_per_chapter() const {
    return chapters_engaged == 0 ? 0.0 : double(student_messages) / double(chapters_engaged);
  }
};

TranscriptStats transcript_stats(std::string_view transcript);

}  // namespace dropkit
