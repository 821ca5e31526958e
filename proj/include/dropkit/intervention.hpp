#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dropkit/clients.hpp"
#include "dropkit/cpadp.hpp"
#include "dropkit/log_core.hpp"
#include "dropkit/mail.hpp"

namespace dropkit {

// ---------------------------------------------------------------------------
// At-risk selection

/// The chapter each non-completer is currently on: their drop chapter D.
std::map<std::string, int> current_chapters(const CourseLog& log);

struct AtRiskStudent {
  std::string student_id;
  int current_chapter = 1;
  double p_dropout = 0.0;
  Stage stage = Stage::zero_shot;
};

struct AtRiskResult {
  std::vector<AtRiskStudent> flagged;                       // p_dropout descending, then id
  std::vector<std::pair<std::string, std::string>> errors;  // student id, message
  std::size_t evaluated = 0;
};

/// Predicts C_h = C_p = current chapter for every listed student and keeps those predicted
/// to drop with p_dropout >= probability_floor. Completers are skipped before prediction.
AtRiskResult at_risk(const CourseLog& log, const std::map<std::string, int>& current_chapter,
                     const AdaptivePredictor& predictor, double probability_floor = 0.5,
                     std::size_t in_flight = 4);

// ---------------------------------------------------------------------------
// Email composition

struct EmailTemplate {
  std::string system;
  std::string request;  // {course} {name} {last_chapter} {next_chapter} {outline} {excerpts}
};

EmailTemplate default_email_template();
EmailTemplate parse_email_template(std::string_view text);
EmailTemplate load_email_template(const std::string& path);

struct EmailDraft {
  std::string student_id;
  std::string subject;
  std::string body;
  std::vector<std::string> referenced_topics;
  std::string prompt_sha256;

  /// Content id; stable for identical drafts.
  std::string id() const;
  bool operator==(const EmailDraft&) const = default;
};

/// Outline terms: every chapter title followed by that chapter's concepts.
std::vector<std::string> outline_terms(const CourseMeta& meta);

/// Up to `count` longest student messages, ties broken by earlier timestamp.
std::vector<std::string> salient_excerpts(const std::vector<InteractionRecord>& records, std::size_t count = 3);

std::string render_email_prompt(const EmailTemplate& tmpl, const StudentProfile& student,
                                const std::vector<InteractionRecord>& records, const CourseMeta& meta,
                                int progress);

/// Reads `SUBJECT: ...` and the text after `BODY:`. Throws MalformedResponse.
std::pair<std::string, std::string> parse_email_response(std::string_view response);

/// `records` are the student's own time-ordered records (may be empty).
EmailDraft compose_email(const StudentProfile& student, const std::vector<InteractionRecord>& records,
                         const CourseMeta& meta, int progress, TextModelClient& client,
                         const EmailTemplate& tmpl, const ClientCallConfig& call = {});

// ---------------------------------------------------------------------------
// Delivery

struct InterventionRecord {
  std::string student_id;
  std::string draft_id;
  int sent_day = 0;
  std::string channel;
  std::optional<std::string> receipt_id;  // nullopt = delivery failed
  int attempts = 0;
  std::string error;

  bool delivered() const { return receipt_id.has_value(); }
  bool operator==(const InterventionRecord&) const = default;
};

struct DeliveryPolicy {
  std::string from = "course-team@dropkit.invalid";
  int attempts = 3;
  std::chrono::milliseconds base_delay{500};
  std::function<void(std::chrono::milliseconds)> sleep;  // empty = std::this_thread::sleep_for
};

InterventionRecord deliver(const EmailDraft& draft, const std::string& to_address, int sent_day, MailSink& sink,
                           const DeliveryPolicy& policy = {});

// ---------------------------------------------------------------------------
// Campaign

struct CampaignConfig {
  int analysis_day = 1;
  int cooldown_days = 14;
  double probability_floor = 0.5;
  std::size_t in_flight = 4;
  ClientCallConfig call;
  DeliveryPolicy delivery;
};

struct CampaignResult {
  AtRiskResult at_risk;
  std::vector<std::string> skipped_cooldown;
  std::vector<EmailDraft> drafts;
  std::vector<InterventionRecord> records;  // one per draft, same order
  std::vector<std::pair<std::string, std::string>> compose_errors;
};

/// at_risk -> compose (parallel, bounded) -> deliver (serialized). Students with a delivered
/// record fewer than cooldown_days before analysis_day in `prior` are not contacted again.
CampaignResult run_campaign(const CourseLog& log, const AdaptivePredictor& predictor, TextModelClient& email_client,
                            const EmailTemplate& tmpl, MailSink& sink, const CampaignConfig& config,
                            const std::vector<InterventionRecord>& prior = {});

std::string campaign_manifest_json(const CampaignResult& result, int analysis_day);
/// Delivered records of a stored campaign manifest (for cooldown checks).
std::vector<InterventionRecord> parse_campaign_records(std::string_view manifest_json);

// ---------------------------------------------------------------------------
// Effect measurement

/// pre = logins on days [d-w+1, d]; post = logins on days [d+1, d+w].
std::pair<std::size_t, std::size_t> login_delta(const std::vector<SessionEvent>& events, int intervention_day,
                                                int window_days);

/// Students with at least one login in the post window.
std::set<std::string> post_window_students(const std::vector<SessionEvent>& events, int intervention_day,
                                           int window_days);

struct GroupStats {
  std::string name;
  std::size_t headcount = 0;
  double offline_days = 0.0;
  double progress = 0.0;
  double message_count = 0.0;
  double message_length = 0.0;
  bool means_defined() const { return headcount > 0; }
};

struct CohortComparison {
  GroupStats self_initiated;  // returned without an intervention
  GroupStats recalled;        // returned after an intervention
};

/// Splits the returning students by intervention and averages their pre-window behavior:
/// data strictly before the end of `analysis_day` only. Offline days are measured from the
/// last such login to the end of analysis_day (a student with no login counts from day 0).
/// Message length is the mean over students of each student's mean message length.
CohortComparison group_comparison(const CourseLog& log, const std::set<std::string>& post_window_logins,
                                  const std::set<std::string>& intervened, int analysis_day);

std::string render_comparison_tsv(const CohortComparison& comparison);

}  // namespace dropkit
