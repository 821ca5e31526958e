#include "dropkit/intervention.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/prompt.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

using nlohmann::json;

std::map<std::string, int> current_chapters(const CourseLog& log) {
  std::map<std::string, int> out;
  for (const auto& c : log.completions())
    if (c.drop_chapter) out[c.student_id] = *c.drop_chapter;
  return out;
}

AtRiskResult at_risk(const CourseLog& log, const std::map<std::string, int>& current_chapter,
                     const AdaptivePredictor& predictor, double probability_floor, std::size_t in_flight) {
  AtRiskResult result;
  std::vector<PredictionInstance> queries;
  for (const auto& [id, chapter] : current_chapter) {
    if (!log.has_student(id)) throw ReferentialError("unknown student '" + id + "'");
    if (log.completion(id).is_completer()) continue;
    if (chapter < 1 || chapter > log.chapter_count())
      throw ValidationError("current chapter " + std::to_string(chapter) + " out of range for '" + id + "'");
    PredictionInstance q;
    q.student_id = id;
    q.history_start = chapter;
    q.prediction_end = chapter;
    q.transcript = serialize_transcript(history_slice(log, id, chapter), log.meta().chapter_titles);
    queries.push_back(std::move(q));
  }
  result.evaluated = queries.size();
  std::vector<std::string> errors;
  auto outcomes = predictor.predict_batch(queries, in_flight, &errors);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!outcomes[i]) {
      result.errors.emplace_back(queries[i].student_id, errors[i]);
      continue;
    }
    const auto& o = *outcomes[i];
    if (o.label && o.p_dropout >= probability_floor)
      result.flagged.push_back({queries[i].student_id, queries[i].history_start, o.p_dropout, o.stage});
  }
  std::stable_sort(result.flagged.begin(), result.flagged.end(), [](const auto& a, const auto& b) {
    if (a.p_dropout != b.p_dropout) return a.p_dropout > b.p_dropout;
    return a.student_id < b.student_id;
  });
  return result;
}

// ---------------------------------------------------------------------------

EmailTemplate default_email_template() {
  return {
      "You write short, warm emails that invite students back to an online course taught by AI "
      "teachers and classmates. Be specific and friendly, never guilt-tripping.",
      "Course: {course}\n"
      "Student name: {name}\n"
      "Last completed chapter: {last_chapter}\n"
      "Next chapter: {next_chapter}\n"
      "Course outline:\n{outline}\n"
      "Things the student said earlier:\n{excerpts}\n\n"
      "Write an email to {name} that recalls one concrete moment from their earlier sessions, "
      "previews what the next chapter covers, and invites them to continue. Reply exactly as:\n"
      "SUBJECT: <one line>\n"
      "BODY:\n"
      "<email text>",
  };
}

EmailTemplate parse_email_template(std::string_view text) {
  auto sections = parse_sections(text);
  EmailTemplate t = default_email_template();
  if (auto it = sections.find("system"); it != sections.end()) t.system = it->second;
  if (auto it = sections.find("request"); it != sections.end()) t.request = it->second;
  for (const auto& [name, body] : sections)
    if (name != "system" && name != "request") throw ConfigError("unknown email template section [" + name + "]");
  return t;
}

EmailTemplate load_email_template(const std::string& path) { return parse_email_template(read_file(path)); }

std::string EmailDraft::id() const { return sha256_hex(student_id + "\n" + subject + "\n" + body).substr(0, 16); }

std::vector<std::string> outline_terms(const CourseMeta& meta) {
  std::vector<std::string> terms;
  for (std::size_t c = 0; c < meta.chapter_titles.size(); ++c) {
    terms.push_back(meta.chapter_titles[c]);
    if (c < meta.concepts.size())
      for (const auto& concept_name : meta.concepts[c]) terms.push_back(concept_name);
  }
  return terms;
}

namespace {

std::string one_line(std::string_view s) {
  std::string out;
  for (char c : s) out += (c == '\r' || c == '\n') ? ' ' : c;
  return out;
}

}  // namespace

std::vector<std::string> salient_excerpts(const std::vector<InteractionRecord>& records, std::size_t count) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].role == Role::student && !trim(records[i].text).empty()) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto la = utf8_length(records[a].text), lb = utf8_length(records[b].text);
    if (la != lb) return la > lb;
    return records[a].timestamp_ms < records[b].timestamp_ms;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < idx.size() && i < count; ++i) out.push_back(one_line(trim(records[idx[i]].text)));
  return out;
}

std::string render_email_prompt(const EmailTemplate& tmpl, const StudentProfile& student,
                                const std::vector<InteractionRecord>& records, const CourseMeta& meta,
                                int progress) {
  const int L = meta.chapter_count;
  if (progress < 0 || progress > L) throw ValidationError("progress out of range");
  auto title = [&](int chapter) {
    return chapter >= 1 && chapter <= static_cast<int>(meta.chapter_titles.size())
               ? meta.chapter_titles[static_cast<std::size_t>(chapter - 1)]
               : "Chapter " + std::to_string(chapter);
  };
  std::string outline;
  for (int c = 1; c <= L; ++c) {
    outline += std::to_string(c) + ". " + title(c);
    if (c - 1 < static_cast<int>(meta.concepts.size()) && !meta.concepts[static_cast<std::size_t>(c - 1)].empty()) {
      outline += " (";
      const auto& cs = meta.concepts[static_cast<std::size_t>(c - 1)];
      for (std::size_t k = 0; k < cs.size(); ++k) outline += (k ? ", " : "") + cs[k];
      outline += ")";
    }
    if (c < L) outline += "\n";
  }
  std::string excerpts;
  const auto picked = salient_excerpts(records);
  if (picked.empty()) excerpts = "(no earlier messages)";
  for (std::size_t i = 0; i < picked.size(); ++i) excerpts += (i ? "\n" : "") + ("- \"" + picked[i] + "\"");

  const std::map<std::string, std::string> values{
      {"course", meta.course_id},
      {"name", student.name.empty() ? student.student_id : student.name},
      {"last_chapter", progress >= 1 ? title(progress) : "none yet"},
      {"next_chapter", progress < L ? title(progress + 1) : "none, the course is finished"},
      {"outline", outline},
      {"excerpts", excerpts},
  };
  return substitute(tmpl.system, values) + "\n\n" + substitute(tmpl.request, values) + "\n";
}

std::pair<std::string, std::string> parse_email_response(std::string_view response) {
  const auto lines = split_lines(response);
  std::optional<std::string> subject;
  std::optional<std::size_t> body_at;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto t = trim(lines[i]);
    auto lower = to_lower(t);
    if (!subject && lower.rfind("subject:", 0) == 0) subject = std::string(trim(t.substr(8)));
    if (lower.rfind("body:", 0) == 0) {
      body_at = i;
      break;
    }
  }
  if (!subject || subject->empty()) throw MalformedResponse("email response has no SUBJECT line");
  if (!body_at) throw MalformedResponse("email response has no BODY section");
  std::string body(trim(trim(lines[*body_at]).substr(5)));
  for (std::size_t i = *body_at + 1; i < lines.size(); ++i) body += (body.empty() ? "" : "\n") + lines[i];
  while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
  if (trim(body).empty()) throw MalformedResponse("email response has an empty body");
  return {*subject, body};
}

EmailDraft compose_email(const StudentProfile& student, const std::vector<InteractionRecord>& records,
                         const CourseMeta& meta, int progress, TextModelClient& client, const EmailTemplate& tmpl,
                         const ClientCallConfig& call) {
  const auto prompt = render_email_prompt(tmpl, student, records, meta, progress);
  for (int attempt = 0;; ++attempt) {
    DecodingParams params = call.params;
    params.seed += static_cast<std::uint64_t>(attempt);
    try {
      auto [subject, body] = parse_email_response(client.complete(prompt, params));
      EmailDraft d;
      d.student_id = student.student_id;
      d.subject = std::move(subject);
      d.body = std::move(body);
      d.prompt_sha256 = sha256_hex(prompt);
      const std::string text = d.subject + "\n" + d.body;
      for (const auto& term : outline_terms(meta))
        if (contains_icase(text, term) &&
            std::find(d.referenced_topics.begin(), d.referenced_topics.end(), term) == d.referenced_topics.end())
          d.referenced_topics.push_back(term);
      return d;
    } catch (const TransportError&) {
      if (attempt >= call.retry_budget) throw;
    } catch (const MalformedResponse&) {
      if (attempt >= call.retry_budget) throw;
    }
  }
}

// ---------------------------------------------------------------------------

InterventionRecord deliver(const EmailDraft& draft, const std::string& to_address, int sent_day, MailSink& sink,
                           const DeliveryPolicy& policy) {
  if (trim(draft.body).empty()) throw ValidationError("refusing to deliver an empty draft");
  InterventionRecord rec;
  rec.student_id = draft.student_id;
  rec.draft_id = draft.id();
  rec.sent_day = sent_day;
  rec.channel = sink.channel();
  const MailMessage message{rec.draft_id, policy.from, to_address, draft.subject, draft.body};
  auto delay = policy.base_delay;
  for (int attempt = 1; attempt <= std::max(1, policy.attempts); ++attempt) {
    rec.attempts = attempt;
    try {
      rec.receipt_id = sink.send(message);
      rec.error.clear();
      return rec;
    } catch (const TransportError& e) {
      rec.error = e.what();
    }
    if (attempt < policy.attempts) {
      if (policy.sleep) policy.sleep(delay);
      else std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------

CampaignResult run_campaign(const CourseLog& log, const AdaptivePredictor& predictor, TextModelClient& email_client,
                            const EmailTemplate& tmpl, MailSink& sink, const CampaignConfig& config,
                            const std::vector<InterventionRecord>& prior) {
  CampaignResult result;
  result.at_risk = at_risk(log, current_chapters(log), predictor, config.probability_floor, config.in_flight);

  std::vector<AtRiskStudent> targets;
  for (const auto& s : result.at_risk.flagged) {
    const bool cooling = std::any_of(prior.begin(), prior.end(), [&](const InterventionRecord& r) {
      return r.delivered() && r.student_id == s.student_id && r.sent_day <= config.analysis_day &&
             config.analysis_day - r.sent_day < config.cooldown_days;
    });
    if (cooling) result.skipped_cooldown.push_back(s.student_id);
    else targets.push_back(s);
  }

  struct Composed {
    std::optional<EmailDraft> draft;
    std::string error;
  };
  auto composed = parallel_map(targets, config.in_flight, [&](const AtRiskStudent& s) {
    Composed c;
    try {
      std::vector<InteractionRecord> records;
      for (auto i : log.record_indices(s.student_id)) records.push_back(log.records()[i]);
      c.draft = compose_email(log.student(s.student_id), records, log.meta(), log.completion(s.student_id).progress,
                              email_client, tmpl, config.call);
    } catch (const Error& e) {
      c.error = e.what();
    }
    return c;
  });

  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!composed[i].draft) {
      result.compose_errors.emplace_back(targets[i].student_id, composed[i].error);
      continue;
    }
    const auto& draft = *composed[i].draft;
    result.records.push_back(
        deliver(draft, log.student(draft.student_id).email, config.analysis_day, sink, config.delivery));
    result.drafts.push_back(draft);
  }
  return result;
}

namespace {

json record_to_json(const InterventionRecord& r) {
  json j{{"student_id", r.student_id}, {"draft_id", r.draft_id}, {"sent_day", r.sent_day},
         {"channel", r.channel},       {"attempts", r.attempts}};
  j["receipt_id"] = r.receipt_id ? json(*r.receipt_id) : json(nullptr);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

}  // namespace

std::string campaign_manifest_json(const CampaignResult& result, int analysis_day) {
  json j;
  j["analysis_day"] = analysis_day;
  j["at_risk"] = json::array();
  for (const auto& s : result.at_risk.flagged)
    j["at_risk"].push_back({{"student_id", s.student_id},
                            {"current_chapter", s.current_chapter},
                            {"p_dropout", s.p_dropout},
                            {"stage", std::string(to_string(s.stage))}});
  j["at_risk_evaluated"] = result.at_risk.evaluated;
  j["prediction_errors"] = json::array();
  for (const auto& [id, msg] : result.at_risk.errors) j["prediction_errors"].push_back({{"student_id", id}, {"error", msg}});
  j["skipped_cooldown"] = result.skipped_cooldown;
  j["drafts"] = json::array();
  for (const auto& d : result.drafts)
    j["drafts"].push_back({{"id", d.id()},
                           {"student_id", d.student_id},
                           {"subject", d.subject},
                           {"body", d.body},
                           {"referenced_topics", d.referenced_topics},
                           {"prompt_sha256", d.prompt_sha256}});
  j["records"] = json::array();
  for (const auto& r : result.records) j["records"].push_back(record_to_json(r));
  j["compose_errors"] = json::array();
  for (const auto& [id, msg] : result.compose_errors) j["compose_errors"].push_back({{"student_id", id}, {"error", msg}});
  return j.dump(2) + "\n";
}

std::vector<InterventionRecord> parse_campaign_records(std::string_view manifest_json) {
  try {
    const auto j = json::parse(manifest_json);
    std::vector<InterventionRecord> out;
    for (const auto& r : j.at("records")) {
      InterventionRecord rec;
      rec.student_id = r.at("student_id").get<std::string>();
      rec.draft_id = r.at("draft_id").get<std::string>();
      rec.sent_day = r.at("sent_day").get<int>();
      rec.channel = r.at("channel").get<std::string>();
      rec.attempts = r.at("attempts").get<int>();
      if (!r.at("receipt_id").is_null()) rec.receipt_id = r.at("receipt_id").get<std::string>();
      rec.error = r.value("error", "");
      out.push_back(std::move(rec));
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed campaign manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

std::pair<std::size_t, std::size_t> login_delta(const std::vector<SessionEvent>& events, int d, int w) {
  if (w < 1) throw ValidationError("window_days must be >= 1");
  std::size_t pre = 0, post = 0;
  for (const auto& e : events) {
    if (e.kind != EventKind::login) continue;
    if (e.day_index >= d - w + 1 && e.day_index <= d) ++pre;
    else if (e.day_index >= d + 1 && e.day_index <= d + w) ++post;
  }
  return {pre, post};
}

std::set<std::string> post_window_students(const std::vector<SessionEvent>& events, int d, int w) {
  if (w < 1) throw ValidationError("window_days must be >= 1");
  std::set<std::string> out;
  for (const auto& e : events)
    if (e.kind == EventKind::login && e.day_index >= d + 1 && e.day_index <= d + w) out.insert(e.student_id);
  return out;
}

CohortComparison group_comparison(const CourseLog& log, const std::set<std::string>& post_window_logins,
                                  const std::set<std::string>& intervened, int analysis_day) {
  const std::int64_t cutoff = log.meta().day_zero_ms + std::int64_t(analysis_day) * kMillisPerDay;

  struct Acc {
    double offline = 0, progress = 0, count = 0, length = 0;
    std::size_t n = 0;
  };
  std::map<std::string, std::int64_t> last_login;
  for (const auto& e : log.events())
    if (e.kind == EventKind::login && e.timestamp_ms < cutoff) {
      auto [it, fresh] = last_login.emplace(e.student_id, e.timestamp_ms);
      if (!fresh) it->second = std::max(it->second, e.timestamp_ms);
    }

  Acc self, recalled;
  for (const auto& id : post_window_logins) {
    if (!log.has_student(id)) throw ReferentialError("unknown student '" + id + "'");
    Acc& acc = intervened.count(id) ? recalled : self;
    auto it = last_login.find(id);
    acc.offline += it == last_login.end() ? double(analysis_day) : double(cutoff - it->second) / double(kMillisPerDay);
    std::size_t done = 0;
    for (const auto& m : log.markers())
      if (m.student_id == id && m.timestamp_ms < cutoff) ++done;
    acc.progress += double(done);
    std::size_t msgs = 0, chars = 0;
    for (auto i : log.record_indices(id)) {
      const auto& r = log.records()[i];
      if (r.role != Role::student || r.timestamp_ms >= cutoff) continue;
      ++msgs;
      chars += utf8_length(r.text);
    }
    acc.count += double(msgs);
    acc.length += msgs == 0 ? 0.0 : double(chars) / double(msgs);
    ++acc.n;
  }
  auto finish = [](const Acc& a, std::string name) {
    GroupStats g;
    g.name = std::move(name);
    g.headcount = a.n;
    if (a.n > 0) {
      g.offline_days = a.offline / double(a.n);
      g.progress = a.progress / double(a.n);
      g.message_count = a.count / double(a.n);
      g.message_length = a.length / double(a.n);
    }
    return g;
  };
  return {finish(self, "self_initiated"), finish(recalled, "recalled")};
}

std::string render_comparison_tsv(const CohortComparison& c) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "group\theadcount\toffline_days\tchapter\tmsg_num\tmsg_length\n";
  for (const auto* g : {&c.self_initiated, &c.recalled}) {
    out << g->name << '\t' << g->headcount;
    if (g->means_defined())
      out << '\t' << g->offline_days << '\t' << g->progress << '\t' << g->message_count << '\t' << g->message_length;
    else
      out << "\tundefined\tundefined\tundefined\tundefined";
    out << '\n';
  }
  return out.str();
}

}  // namespace dropkit
