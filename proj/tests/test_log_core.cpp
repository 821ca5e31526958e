#include <doctest.h>

#include <sstream>

#include "dropkit/error.hpp"
#include "dropkit/log_core.hpp"
#include "dropkit/simkit.hpp"
#include "dropkit/util.hpp"

using namespace dropkit;

namespace {

const char* kSmallLog =
    R"({"kind":"course.meta","course_id":"c1","chapter_count":3,"chapter_titles":["Intro","Middle","End"],"day_zero_ms":0}
{"kind":"student","student_id":"a","traits":{"LM":3,"ASE":4,"LP":2,"SR":5,"LLMF":1}}
{"kind":"student","student_id":"b"}
{"kind":"message","student_id":"a","chapter":1,"timestamp":2000,"role":"student","text":"hello"}
{"kind":"message","student_id":"a","chapter":1,"timestamp":1000,"role":"ai_teacher","text":"welcome"}
{"kind":"message","student_id":"a","chapter":2,"timestamp":3000,"role":"student","text":"line one\nline two"}
{"kind":"login","student_id":"a","day":1,"timestamp":500}
{"kind":"chapter_complete","student_id":"a","chapter":1,"timestamp":2500}
{"kind":"chapter_complete","student_id":"a","chapter":2,"timestamp":3500}
)";

CourseLog small_log() {
  std::istringstream in(kSmallLog);
  return parse_course_log(in);
}

template <typename F>
ErrorClass error_class_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.error_class();
  }
  FAIL("expected an error");
  return ErrorClass::usage;
}

}  // namespace

TEST_SUITE("log-core") {
  TEST_CASE("parse sorts records by time and computes completion") {
    const auto log = small_log();
    REQUIRE(log.records().size() == 3);
    CHECK(log.records()[0].role == Role::ai_teacher);
    CHECK(log.records()[1].text == "hello");
    CHECK(log.completion("a").progress == 2);
    CHECK(log.completion("a").drop_chapter == 3);
    CHECK(log.completion("b").progress == 0);
    CHECK(log.completion("b").drop_chapter == 1);
    CHECK(log.student("b").traits_missing());
    CHECK((*log.student("a").traits)[int(Trait::SR)] == 5);
  }

  TEST_CASE("emit and parse round-trip") {
    const auto log = small_log();
    std::istringstream again(emit_course_log(log));
    CHECK(parse_course_log(again) == log);

    const auto cohort = generate_cohort([] {
      auto s = CohortSpec::reference();
      s.histogram = {2, 1, 1, 0, 1, 0, 3};
      return s;
    }());
    std::istringstream in(emit_course_log(cohort.log));
    CHECK(parse_course_log(in) == cohort.log);
  }

  TEST_CASE("malformed lines report their line number") {
    std::string text = kSmallLog;
    text += "{not json}\n";
    std::istringstream in(text);
    try {
      parse_course_log(in);
      FAIL("should throw");
    } catch (const ParseError& e) {
      CHECK(e.line() == 10);
      CHECK(e.error_class() == ErrorClass::data);
    }
  }

  TEST_CASE("schema violations") {
    auto parse = [](std::string extra) {
      std::istringstream in(std::string(kSmallLog) + extra + "\n");
      return parse_course_log(in);
    };
    CHECK_THROWS_AS(parse(R"({"kind":"message","student_id":"zz","chapter":1,"timestamp":1,"role":"student","text":"x"})"),
                    ReferentialError);
    CHECK_THROWS_AS(parse(R"({"kind":"message","student_id":"a","chapter":9,"timestamp":1,"role":"student","text":"x"})"),
                    ParseError);
    CHECK_THROWS_AS(parse(R"({"kind":"message","student_id":"a","chapter":1,"timestamp":1,"role":"robot","text":"x"})"),
                    ParseError);
    CHECK_THROWS_AS(parse(R"({"kind":"message","student_id":"a","chapter":1,"timestamp":1,"role":"student","text":""})"),
                    ParseError);
    CHECK_THROWS_AS(parse(R"({"kind":"student","student_id":"a"})"), ParseError);
    CHECK_THROWS_AS(parse(R"({"kind":"mystery"})"), ParseError);
    CHECK_THROWS_AS(parse(R"({"kind":"login","student_id":"a","day":0,"timestamp":1})"), ParseError);
    CHECK_THROWS_AS(parse(R"({"kind":"student","student_id":"c","traits":{"LM":7,"ASE":4,"LP":2,"SR":5,"LLMF":1}})"),
                    ParseError);
    std::istringstream headless(R"({"kind":"student","student_id":"a"})");
    CHECK_THROWS_AS(parse_course_log(headless), ParseError);
  }

  TEST_CASE("non-sequential completion is rejected") {
    std::vector<StudentProfile> students{{"a", "", "", "", "", "", "", std::nullopt}};
    std::vector<CompletionMarker> markers{{"a", 1, 0}, {"a", 3, 0}};
    CHECK_THROWS_AS(compute_completion(students, markers, 4), NonSequentialCompletion);
    markers = {{"a", 1, 0}, {"a", 2, 0}, {"a", 3, 0}, {"a", 4, 0}};
    const auto state = compute_completion(students, markers, 4);
    CHECK(state[0].is_completer());
    CHECK(state[0].progress == 4);
  }

  TEST_CASE("history slice stops before the history chapter") {
    const auto log = small_log();
    CHECK(history_slice(log, "a", 1).empty());
    CHECK(history_slice(log, "a", 2).size() == 2);
    CHECK(history_slice(log, "a", 3).size() == 3);
    CHECK_THROWS(history_slice(log, "a", 5));
  }

  TEST_CASE("transcript serialization is deterministic and one record per line") {
    const auto log = small_log();
    const auto titles = log.meta().chapter_titles;
    CHECK(serialize_transcript({}, titles) == std::string(kNoPriorInteractions) + "\n");
    const auto text = serialize_transcript(history_slice(log, "a", 3), titles);
    CHECK(text == serialize_transcript(history_slice(log, "a", 3), titles));
    CHECK(text.find("## Chapter 1: Intro") != std::string::npos);
    CHECK(text.find("## Chapter 2: Middle") != std::string::npos);
    CHECK(text.find("line one\\nline two") != std::string::npos);

    const auto stats = transcript_stats(text);
    CHECK(stats.student_messages == 2);
    CHECK(stats.student_chars == 5 + 17);
    CHECK(stats.chapters_engaged == 2);
    CHECK(stats.total_lines == 3);
  }

  TEST_CASE("utilities") {
    CHECK(utf8_length("héllo") == 5);
    CHECK(utf8_length("") == 0);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(derive_seed(1, "split") == derive_seed(1, "split"));
    CHECK(derive_seed(1, "split") != derive_seed(1, "train"));
    CHECK(trim("  x \n") == "x");
    CHECK(contains_icase("General AI", "general ai"));
    CHECK(error_class_of([] { read_file("/nonexistent/dropkit/file"); }) == ErrorClass::io);
  }
}
