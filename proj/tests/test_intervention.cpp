#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <thread>

#include "dropkit/error.hpp"
#include "dropkit/intervention.hpp"
#include "dropkit/mail.hpp"
#include "dropkit/simkit.hpp"
#include "fixtures.hpp"

using namespace dropkit;

namespace {

EmailDraft sample_draft() { return {"fred", "Come back", "Hi Fred,\n.\nSee you", {}, "sha"}; }

DeliveryPolicy instant(int attempts, std::vector<std::chrono::milliseconds>* waits = nullptr) {
  DeliveryPolicy p;
  p.attempts = attempts;
  p.base_delay = std::chrono::milliseconds(100);
  p.sleep = [waits](std::chrono::milliseconds d) {
    if (waits) waits->push_back(d);
  };
  return p;
}

AdaptivePredictor zero_shot(TextModelClient& judge, int chapters) {
  PredictionContext ctx;
  ctx.client = &judge;
  ctx.chapter_count = chapters;
  ctx.forced_stage = Stage::zero_shot;
  return AdaptivePredictor(ctx, {});
}

/// Accepts one SMTP session on a loopback port and keeps the DATA section.
class FakeSmtpServer {
public:
  FakeSmtpServer() {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    ::listen(fd_, 1);
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }
  ~FakeSmtpServer() {
    thread_.join();
    ::close(fd_);
  }
  int port() const { return port_; }
  void wait() { thread_.join(), thread_ = std::thread([] {}); }
  std::string data, rcpt;

private:
  int fd_ = -1;
  int port_ = 0;
  std::thread thread_;

  void serve() {
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c < 0) return;
    auto say = [c](const std::string& s) { (void)!::write(c, s.data(), s.size()); };
    std::string buffer;
    auto next_line = [&](std::string& line) {
      for (;;) {
        if (auto pos = buffer.find("\r\n"); pos != std::string::npos) {
          line = buffer.substr(0, pos);
          buffer.erase(0, pos + 2);
          return true;
        }
        char chunk[512];
        const auto n = ::read(c, chunk, sizeof chunk);
        if (n <= 0) return false;
        buffer.append(chunk, std::size_t(n));
      }
    };
    say("220 fake ESMTP\r\n");
    std::string line;
    bool in_data = false;
    while (next_line(line)) {
      if (in_data) {
        if (line == ".") {
          in_data = false;
          say("250 queued\r\n");
        } else {
          data += line + "\n";
        }
        continue;
      }
      const auto verb = line.substr(0, 4);
      if (verb == "EHLO" || verb == "HELO") say("250 fake\r\n");
      else if (verb == "MAIL") say("250 ok\r\n");
      else if (verb == "RCPT") rcpt = line, say("250 ok\r\n");
      else if (verb == "DATA") in_data = true, say("354 go ahead\r\n");
      else if (verb == "QUIT") {
        say("221 bye\r\n");
        break;
      } else say("250 ok\r\n");
    }
    ::close(c);
  }
};

}  // namespace

TEST_SUITE("intervention") {
  TEST_CASE("rfc822 rendering") {
    const auto text = render_rfc822({"abc", "team@x.org", "s@y.org", "Zurück zum Kurs", "Hi\n.hidden\nbye"});
    CHECK(text.find("Message-ID: <abc@dropkit>\r\n") != std::string::npos);
    CHECK(text.find("Subject: =?UTF-8?B?") != std::string::npos);
    CHECK(text.find("\r\n..hidden\r\n") != std::string::npos);
    CHECK(text.find("\n\n") == std::string::npos);
    CHECK(render_rfc822({"a", "f", "t", "plain", "x"}).find("Subject: plain\r\n") != std::string::npos);
  }

  TEST_CASE("delivery retries with exponential backoff") {
    ScriptedSink sink({false, false}, true);
    std::vector<std::chrono::milliseconds> waits;
    const auto rec = deliver(sample_draft(), "fred@example.org", 40, sink, instant(3, &waits));
    CHECK(rec.delivered());
    CHECK(rec.attempts == 3);
    CHECK(*rec.receipt_id == "scripted:3");
    CHECK(rec.draft_id == sample_draft().id());
    CHECK(waits == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(100), std::chrono::milliseconds(200)});
    REQUIRE(sink.delivered().size() == 1);
    CHECK(sink.delivered()[0].to == "fred@example.org");
    CHECK(!sink.delivered()[0].from.empty());
  }

  TEST_CASE("delivery that keeps failing has no receipt") {
    ScriptedSink sink({}, false);
    const auto rec = deliver(sample_draft(), "fred@example.org", 40, sink, instant(3));
    CHECK_FALSE(rec.delivered());
    CHECK(rec.attempts == 3);
    CHECK(sink.calls() == 3);
    CHECK(!rec.error.empty());
    EmailDraft empty = sample_draft();
    empty.body = "  ";
    CHECK_THROWS_AS(deliver(empty, "x", 1, sink, instant(1)), ValidationError);
  }

  TEST_CASE("file sink writes one eml per message") {
    const auto dir = fixtures::scratch_dir("file-sink");
    FileSink sink(dir);
    const auto rec = deliver(sample_draft(), "fred@example.org", 1, sink, instant(1));
    REQUIRE(rec.delivered());
    CHECK(*rec.receipt_id == "file:" + rec.draft_id + ".eml");
    std::ifstream in(dir / (rec.draft_id + ".eml"));
    std::string all((std::istreambuf_iterator<char>(in)), {});
    CHECK(all.find("To: fred@example.org") != std::string::npos);
    CHECK(all.find("From: course-team@dropkit.invalid") != std::string::npos);
  }

  TEST_CASE("smtp sink talks to a server") {
    FakeSmtpServer server;
    SmtpConfig config;
    config.host = "127.0.0.1";
    config.port = server.port();
    config.tls = false;
    config.from = "team@example.org";
    SmtpSink sink(config);
    const auto receipt = sink.send({"m1", "team@example.org", "fred@example.org", "Hello", "Body line\n.dot"});
    server.wait();
    CHECK(receipt == "smtp:<m1@dropkit>");
    CHECK(server.rcpt.find("fred@example.org") != std::string::npos);
    CHECK(server.data.find("Subject: Hello") != std::string::npos);
    CHECK(server.data.find("..dot") != std::string::npos);

    SmtpConfig missing = config;
    missing.from.clear();
    CHECK_THROWS_AS(SmtpSink{missing}, ConfigError);
  }

  TEST_CASE("smtp sink reports unreachable servers as transport errors") {
    // Bind and close a port so nothing listens on it.
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    SmtpSink sink({"127.0.0.1", ntohs(addr.sin_port), "", "", "team@example.org", false});
    CHECK_THROWS_AS(sink.send({"m", "", "a@b.c", "s", "b"}), TransportError);
  }

  TEST_CASE("email prompt and response parsing") {
    const auto log = fixtures::course_with_fred();
    const auto& fred = log.student("fred");
    std::vector<InteractionRecord> mine;
    for (auto i : log.record_indices("fred")) mine.push_back(log.records()[i]);
    const auto excerpts = salient_excerpts(mine);
    REQUIRE(excerpts.size() == 2);
    CHECK(excerpts[0].find("Hallucination") != std::string::npos);

    const auto prompt = render_email_prompt(default_email_template(), fred, mine, log.meta(), 1);
    CHECK(prompt.find("Student name: Fred") != std::string::npos);
    CHECK(prompt.find("Last completed chapter: General Artificial Intelligence Overview") != std::string::npos);
    CHECK(prompt.find("Next chapter: Neural Networks and Deep Learning") != std::string::npos);
    CHECK(prompt.find("{") == std::string::npos);

    const auto [subject, body] = parse_email_response("SUBJECT: Hello\nBODY:\nline 1\nline 2");
    CHECK(subject == "Hello");
    CHECK(body == "line 1\nline 2");
    CHECK_THROWS_AS(parse_email_response("BODY: x"), MalformedResponse);
    CHECK_THROWS_AS(parse_email_response("SUBJECT: x"), MalformedResponse);

    const auto shipped = load_email_template(std::string(DROPKIT_SOURCE_DIR) + "/templates/email.txt");
    CHECK(shipped.system == default_email_template().system);
    CHECK(shipped.request == default_email_template().request);
    CHECK_THROWS_AS(parse_email_template("[footer]\nx"), ConfigError);
  }

  TEST_CASE("compose_email retries malformed answers and finds topics") {
    const auto log = fixtures::course_with_fred();
    std::vector<InteractionRecord> mine;
    for (auto i : log.record_indices("fred")) mine.push_back(log.records()[i]);
    ScriptedTextClient client({"I cannot", "SUBJECT: Hallucination again?\nBODY:\nRemember the Turing Test?"});
    const auto draft = compose_email(log.student("fred"), mine, log.meta(), 1, client, default_email_template());
    CHECK(draft.subject == "Hallucination again?");
    CHECK(draft.referenced_topics == std::vector<std::string>{"Turing Test", "Hallucination"});
    CHECK(client.prompts().size() == 2);
    CHECK(draft.prompt_sha256 == sha256_hex(client.prompts()[0]));
  }

  TEST_CASE("at-risk selection skips completers and sorts by probability") {
    const auto log = fixtures::course_with_fred();
    LengthHeuristicClient judge;
    const auto predictor = zero_shot(judge, log.chapter_count());
    const auto current = current_chapters(log);
    for (const auto& [id, c] : current) CHECK_FALSE(log.completion(id).is_completer());
    const auto result = at_risk(log, current, predictor);
    CHECK(result.evaluated == current.size());
    CHECK(result.errors.empty());
    bool has_fred = false;
    for (const auto& s : result.flagged) {
      CHECK(s.p_dropout >= 0.5);
      has_fred |= s.student_id == "fred";
    }
    CHECK(has_fred);

    FixedClient never(false);
    CHECK(at_risk(log, current, zero_shot(never, log.chapter_count())).flagged.empty());
    CHECK_THROWS_AS(at_risk(log, {{"nobody", 1}}, predictor), ReferentialError);
  }

  TEST_CASE("campaign: cooldown, manifest round-trip and failed deliveries") {
    const auto log = fixtures::course_with_fred();
    FixedClient judge(true);
    const auto predictor = zero_shot(judge, log.chapter_count());
    EchoEmailClient writer;
    ScriptedSink sink({}, true);
    CampaignConfig config;
    config.analysis_day = 20;
    config.delivery = instant(2);
    const auto first = run_campaign(log, predictor, writer, default_email_template(), sink, config);
    CHECK(first.drafts.size() == current_chapters(log).size());
    CHECK(sink.delivered().size() == first.drafts.size());

    const auto stored = parse_campaign_records(campaign_manifest_json(first, 20));
    CHECK(stored == first.records);

    config.analysis_day = 33;
    CHECK(run_campaign(log, predictor, writer, default_email_template(), sink, config, stored).drafts.empty());
    config.analysis_day = 34;
    CHECK(run_campaign(log, predictor, writer, default_email_template(), sink, config, stored).drafts.size() ==
          first.drafts.size());

    ScriptedSink down({}, false);
    config.analysis_day = 20;
    const auto failed = run_campaign(log, predictor, writer, default_email_template(), down, config);
    for (const auto& r : failed.records) CHECK_FALSE(r.delivered());
    // Undelivered emails do not start a cooldown.
    const auto undelivered = parse_campaign_records(campaign_manifest_json(failed, 20));
    config.analysis_day = 21;
    CHECK(run_campaign(log, predictor, writer, default_email_template(), sink, config, undelivered).drafts.size() ==
          first.drafts.size());
  }

  TEST_CASE("login delta window boundaries") {
    std::vector<SessionEvent> events;
    for (int day = 60; day <= 70; ++day) events.push_back({"s", EventKind::login, day, 0});
    // pre = [63, 65], post = [66, 68]
    CHECK(login_delta(events, 65, 3) == std::pair<std::size_t, std::size_t>{3, 3});
    CHECK(login_delta(events, 65, 1) == std::pair<std::size_t, std::size_t>{1, 1});
    CHECK(post_window_students(events, 70, 3).empty());
    CHECK_THROWS_AS(login_delta(events, 65, 0), ValidationError);
  }

  TEST_CASE("group comparison on the scripted intervention week") {
    const auto week = fixtures::intervention_week();
    CHECK(login_delta(week.log.events(), 65, 3) == std::pair<std::size_t, std::size_t>{14, 25});
    const auto returning = post_window_students(week.log.events(), 65, 3);
    CHECK(returning.size() == 17);
    const auto cmp = group_comparison(week.log, returning, week.intervened, 65);
    const auto self = fixtures::group_means_oracle(week.log, week.self_initiated, 65);
    CHECK(cmp.self_initiated.offline_days == doctest::Approx(self.offline).epsilon(1e-12));
    CHECK(cmp.self_initiated.message_length == doctest::Approx(self.length).epsilon(1e-12));
    CHECK(cmp.recalled.progress == doctest::Approx(0.75));

    const auto nobody = group_comparison(week.log, returning, week.log.has_student("x") ? week.intervened : std::set<std::string>{}, 65);
    CHECK(nobody.recalled.headcount == 0);
    CHECK(render_comparison_tsv(nobody).find("undefined") != std::string::npos);
  }
}
