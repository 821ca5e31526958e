#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dropkit/dataset.hpp"

namespace dropkit {

/// Prediction prompt pieces. Each piece may use the placeholders {C_h}, {C_p}, {L};
/// `example` and `query` also take {transcript}, and `example` takes {verdict}.
struct PromptTemplate {
  std::string system;
  std::string task;
  std::string example;
  std::string query;
  std::string verdict_format;
};

PromptTemplate default_prediction_template();

/// Reads a sectioned text file: `[system]`, `[task]`, `[example]`, `[query]`,
/// `[verdict_format]`, each followed by its text. Missing sections keep their defaults.
PromptTemplate load_prediction_template(const std::string& path);
PromptTemplate parse_prediction_template(std::string_view text);

/// Splits `[name]` sectioned text into name -> body (trailing blank lines dropped).
std::map<std::string, std::string> parse_sections(std::string_view text);

/// Replaces `{name}` occurrences in one pass; unknown names are left as written.
std::string substitute(std::string_view text, const std::map<std::string, std::string>& values);

inline constexpr std::string_view kVerdictDropout = "VERDICT: DROPOUT";
inline constexpr std::string_view kVerdictRetain = "VERDICT: RETAIN";

/// Renders the full prompt. The examples block is omitted when `examples` is empty,
/// which gives the zero-shot prompt.
std::string render_prompt(const PromptTemplate& tmpl, const PredictionInstance& query,
                          const std::vector<PredictionInstance>& examples, int chapter_count);

/// First case-insensitive `verdict: dropout|retain` wins. Throws MalformedResponse.
bool parse_verdict(std::string_view response);

/// Structured read-back of a rendered prediction prompt (used by the mock clients).
struct PromptView {
  struct Case {
    int history_start = 0;
    int prediction_end = 0;
    std::string transcript;
    std::optional<bool> label;  // examples only
  };
  std::vector<Case> examples;
  std::optional<Case> query;
};

PromptView parse_prediction_prompt(std::string_view prompt);

}  // namespace dropkit
