#include "dropkit/prompt.hpp"

#include <cstdio>
#include <sstream>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

namespace {

constexpr std::string_view kExamplesHeader = "=== EXAMPLES ===";
constexpr std::string_view kExampleHeader = "--- Example ";
constexpr std::string_view kQueryHeader = "=== QUERY ";
constexpr std::string_view kTranscriptOpen = "<transcript>";
constexpr std::string_view kTranscriptClose = "</transcript>";

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::string pair_tag(const PredictionInstance& inst) {
  return "(C_h=" + std::to_string(inst.history_start) + ", C_p=" + std::to_string(inst.prediction_end) + ")";
}

std::map<std::string, std::string> placeholders(const PredictionInstance& inst, int chapter_count) {
  return {{"C_h", std::to_string(inst.history_start)},
          {"C_p", std::to_string(inst.prediction_end)},
          {"L", std::to_string(chapter_count)},
          {"transcript", std::string(kTranscriptOpen) + "\n" + inst.transcript + "\n" +
                             std::string(kTranscriptClose)},
          {"verdict", std::string(inst.label ? kVerdictDropout : kVerdictRetain)}};
}

// Parses "(C_h=a, C_p=b)" starting anywhere in `line`.
bool parse_pair_tag(std::string_view line, int& ch, int& cp) {
  auto at = line.find("(C_h=");
  if (at == std::string_view::npos) return false;
  std::string rest(line.substr(at));
  return std::sscanf(rest.c_str(), "(C_h=%d, C_p=%d)", &ch, &cp) == 2;
}

}  // namespace

PromptTemplate default_prediction_template() {
  return {
      "You are a learning-analytics assistant for an online course in which students study "
      "by chatting with an AI teacher, AI teaching assistants and AI classmates.",
      "The course has {L} chapters. Below are a student's interaction records from before the "
      "start of Chapter {C_h}. Decide whether the student will drop out of the course (stop "
      "before completing every chapter) at some point between the start of Chapter {C_h} and "
      "the end of Chapter {C_p}. Students who message often and write longer messages tend to "
      "keep going; long silences and very short replies are warning signs.",
      "History before Chapter {C_h}; prediction window ends with Chapter {C_p}.\n{transcript}\n"
      "Answer: {verdict}",
      "History before Chapter {C_h}; prediction window ends with Chapter {C_p}.\n{transcript}",
      "Think briefly, then finish with exactly one line that is either `VERDICT: DROPOUT` or "
      "`VERDICT: RETAIN`.",
  };
}

std::map<std::string, std::string> parse_sections(std::string_view text) {
  std::map<std::string, std::string> sections;
  std::string current;
  std::string body;
  bool in_section = false;
  auto flush = [&] {
    if (in_section) sections[current] = strip_trailing_newlines(body);
  };
  for (const auto& line : split_lines(text)) {
    auto t = trim(line);
    if (t.size() >= 3 && t.front() == '[' && t.back() == ']' && t.find(' ') == std::string_view::npos) {
      flush();
      current = std::string(t.substr(1, t.size() - 2));
      body.clear();
      in_section = true;
      continue;
    }
    if (in_section) {
      body += line;
      body += '\n';
    }
  }
  flush();
  return sections;
}

PromptTemplate parse_prediction_template(std::string_view text) {
  auto sections = parse_sections(text);
  PromptTemplate tmpl = default_prediction_template();
  auto take = [&](const char* name, std::string& field) {
    if (auto it = sections.find(name); it != sections.end()) field = it->second;
  };
  take("system", tmpl.system);
  take("task", tmpl.task);
  take("example", tmpl.example);
  take("query", tmpl.query);
  take("verdict_format", tmpl.verdict_format);
  if (tmpl.query.find("{transcript}") == std::string::npos)
    throw ConfigError("prediction template [query] must contain {transcript}");
  return tmpl;
}

PromptTemplate load_prediction_template(const std::string& path) {
  return parse_prediction_template(read_file(path));
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

std::string render_prompt(const PromptTemplate& tmpl, const PredictionInstance& query,
                          const std::vector<PredictionInstance>& examples, int chapter_count) {
  std::string out;
  const auto query_values = placeholders(query, chapter_count);
  out += substitute(tmpl.system, query_values);
  out += "\n\n";
  out += substitute(tmpl.task, query_values);
  out += "\n\n";
  if (!examples.empty()) {
    out += kExamplesHeader;
    out += '\n';
    for (std::size_t i = 0; i < examples.size(); ++i) {
      out += kExampleHeader;
      out += std::to_string(i + 1) + " " + pair_tag(examples[i]) + " ---\n";
      out += substitute(tmpl.example, placeholders(examples[i], chapter_count));
      out += "\n\n";
    }
  }
  out += kQueryHeader;
  out += pair_tag(query) + " ===\n";
  out += substitute(tmpl.query, query_values);
  out += "\n\n";
  out += substitute(tmpl.verdict_format, query_values);
  out += '\n';
  return out;
}

bool parse_verdict(std::string_view response) {
  const std::string lower = to_lower(response);
  constexpr std::string_view kKey = "verdict:";
  for (auto at = lower.find(kKey); at != std::string::npos; at = lower.find(kKey, at + 1)) {
    auto p = at + kKey.size();
    while (p < lower.size() && (lower[p] == ' ' || lower[p] == '\t')) ++p;
    std::string_view rest(lower.data() + p, lower.size() - p);
    if (rest.substr(0, 7) == "dropout") return true;
    if (rest.substr(0, 6) == "retain") return false;
  }
  std::string excerpt(response.substr(0, 80));
  throw MalformedResponse("no verdict token in response: '" + excerpt + "'");
}

PromptView parse_prediction_prompt(std::string_view prompt) {
  PromptView view;
  std::optional<PromptView::Case> current;
  bool is_query = false;
  bool in_transcript = false;
  auto finish = [&] {
    if (!current) return;
    if (is_query)
      view.query = std::move(*current);
    else
      view.examples.push_back(std::move(*current));
    current.reset();
  };
  for (const auto& line : split_lines(prompt)) {
    std::string_view v(line);
    if (in_transcript) {
      if (v == kTranscriptClose) {
        in_transcript = false;
        // Rendering adds one newline before the closing tag.
        if (!current->transcript.empty()) current->transcript.pop_back();
      } else {
        current->transcript += line;
        current->transcript += '\n';
      }
      continue;
    }
    int ch = 0, cp = 0;
    if (v.substr(0, kExampleHeader.size()) == kExampleHeader && parse_pair_tag(v, ch, cp)) {
      finish();
      current = PromptView::Case{ch, cp, {}, std::nullopt};
      is_query = false;
    } else if (v.substr(0, kQueryHeader.size()) == kQueryHeader && parse_pair_tag(v, ch, cp)) {
      finish();
      current = PromptView::Case{ch, cp, {}, std::nullopt};
      is_query = true;
    } else if (current && v == kTranscriptOpen) {
      in_transcript = true;
    } else if (current && !is_query && !current->label) {
      const auto lower = to_lower(v);
      if (lower.find("verdict: dropout") != std::string::npos) current->label = true;
      else if (lower.find("verdict: retain") != std::string::npos) current->label = false;
    }
  }
  finish();
  return view;
}

}  // namespace dropkit
