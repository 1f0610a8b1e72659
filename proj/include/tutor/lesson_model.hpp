#pragma once

// Lesson packs: paired snippets, ordered highlight steps, tests and survey.
// See docs/formats.md for the on-disk JSON layout.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tutor/error.hpp"
#include "tutor/lexer.hpp"
#include "tutor/text.hpp"

namespace tutor {

inline constexpr int kPackFormatVersion = 1;

enum class AnnotationKind { PositiveTransfer, NegativeTransfer, NewFact };
enum class Side { Known, Target, Both };
enum class QuestionKind { SingleChoice, MultiAnswer };

inline std::string_view to_string(AnnotationKind k) {
  switch (k) {
    case AnnotationKind::PositiveTransfer: return "transfer";
    case AnnotationKind::NegativeTransfer: return "gotcha";
    case AnnotationKind::NewFact: return "newfact";
  }
  return "?";
}
inline std::string_view to_string(Side s) {
  switch (s) {
    case Side::Known: return "known";
    case Side::Target: return "target";
    case Side::Both: return "both";
  }
  return "?";
}
inline std::string_view to_string(QuestionKind k) {
  return k == QuestionKind::SingleChoice ? "single" : "multi";
}

inline std::optional<AnnotationKind> parse_annotation_kind(std::string_view s) {
  if (s == "transfer") return AnnotationKind::PositiveTransfer;
  if (s == "gotcha") return AnnotationKind::NegativeTransfer;
  if (s == "newfact") return AnnotationKind::NewFact;
  return std::nullopt;
}
inline std::optional<Side> parse_side(std::string_view s) {
  if (s == "known") return Side::Known;
  if (s == "target") return Side::Target;
  if (s == "both") return Side::Both;
  return std::nullopt;
}
inline std::optional<QuestionKind> parse_question_kind(std::string_view s) {
  if (s == "single") return QuestionKind::SingleChoice;
  if (s == "multi") return QuestionKind::MultiAnswer;
  return std::nullopt;
}

inline bool covers(Side annotation_side, Side pane) {
  return annotation_side == Side::Both || annotation_side == pane;
}

struct Snippet {
  Language language = Language::Python;
  std::string source;
  friend bool operator==(const Snippet&, const Snippet&) = default;
};

struct Annotation {
  AnnotationKind kind = AnnotationKind::PositiveTransfer;
  Side side = Side::Both;
  std::string rule;  // transfer-rule id; may be empty for ad-hoc notes
  std::string text;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Step {
  std::size_t index = 0;
  std::vector<Span> known_spans;
  std::vector<Span> target_spans;
  std::vector<Annotation> annotations;

  const std::vector<Span>& spans(Side pane) const {
    return pane == Side::Known ? known_spans : target_spans;
  }
  friend bool operator==(const Step&, const Step&) = default;
};

struct OutputBox {
  std::string known_output;
  std::string target_output;
  std::string caption;
  friend bool operator==(const OutputBox&, const OutputBox&) = default;
};

struct Lesson {
  std::string id;
  std::string title;
  Snippet known_snippet;
  Snippet target_snippet;
  std::vector<Step> steps;
  std::optional<OutputBox> output;

  const Snippet& snippet(Side pane) const {
    return pane == Side::Known ? known_snippet : target_snippet;
  }
  friend bool operator==(const Lesson&, const Lesson&) = default;
};

struct Question {
  std::string id;
  std::string prompt;
  QuestionKind kind = QuestionKind::SingleChoice;
  std::vector<std::string> choices;
  std::set<std::size_t> correct;
  friend bool operator==(const Question&, const Question&) = default;
};

struct SurveyStatement {
  std::string id;
  std::string text;
  friend bool operator==(const SurveyStatement&, const SurveyStatement&) = default;
};

struct LessonPack {
  std::string id;
  std::string title;
  Language known_language = Language::Python;
  Language target_language = Language::R;
  std::vector<Lesson> lessons;
  std::vector<Question> pretest;
  std::vector<Question> posttest;
  std::vector<SurveyStatement> survey;

  const std::vector<Question>& test(bool post) const { return post ? posttest : pretest; }
  std::size_t total_steps() const {
    std::size_t n = 0;
    for (const auto& l : lessons) n += l.steps.size();
    return n;
  }
  friend bool operator==(const LessonPack&, const LessonPack&) = default;
};

struct Violation {
  std::string lesson_id;  // empty for pack-level violations
  std::optional<std::size_t> step;
  std::string rule;
  std::string message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
  bool has(std::string_view rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.rule == rule; });
  }
};

inline std::string format_violation(const Violation& v) {
  std::string where = v.lesson_id.empty() ? "pack" : v.lesson_id;
  if (v.step) where += ":" + std::to_string(*v.step);
  return where + ": [" + v.rule + "] " + v.message;
}

// ---------------------------------------------------------------------------
// JSON reading

namespace detail {

using nlohmann::json;

class DocReader {
 public:
  [[noreturn]] static void malformed(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::MalformedDocument, (path.empty() ? "/" : path) + ": " + what, path);
  }

  static const json& field(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) malformed(path, std::string("missing field '") + key + "'");
    return *it;
  }

  static void only_fields(const json& obj, const std::string& path,
                          std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) malformed(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
        throw Error(ErrorCode::UnknownField, path + "/" + it.key() + ": unknown field", path + "/" + it.key());
    }
  }

  static std::string str(const json& obj, const std::string& path, const char* key) {
    const json& v = field(obj, path, key);
    if (!v.is_string()) malformed(path + "/" + key, "expected a string");
    return v.get<std::string>();
  }

  static const json& array(const json& obj, const std::string& path, const char* key) {
    const json& v = field(obj, path, key);
    if (!v.is_array()) malformed(path + "/" + key, "expected an array");
    return v;
  }

  static std::size_t index(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) malformed(path, "expected a non-negative integer");
    return v.get<std::size_t>();
  }

  static Span span(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) malformed(path, "span must be a [start, end] array");
    return Span{index(v[0], path + "/0"), index(v[1], path + "/1")};
  }

  static Language language(const json& obj, const std::string& path, const char* key) {
    auto tag = str(obj, path, key);
    try {
      return parse_language(tag);
    } catch (const Error&) {
      malformed(path + "/" + key, "unsupported language '" + tag + "'");
    }
  }
};

inline Snippet read_snippet(const json& j, const std::string& path) {
  DocReader::only_fields(j, path, {"language", "source"});
  return Snippet{DocReader::language(j, path, "language"),
                 text::normalize_source(DocReader::str(j, path, "source"))};
}

inline Annotation read_annotation(const json& j, const std::string& path) {
  DocReader::only_fields(j, path, {"kind", "side", "rule", "text"});
  Annotation a;
  auto kind = parse_annotation_kind(DocReader::str(j, path, "kind"));
  if (!kind) DocReader::malformed(path + "/kind", "expected \"transfer\", \"gotcha\" or \"newfact\"");
  a.kind = *kind;
  auto side = parse_side(DocReader::str(j, path, "side"));
  if (!side) DocReader::malformed(path + "/side", "expected \"known\", \"target\" or \"both\"");
  a.side = *side;
  if (j.contains("rule")) a.rule = DocReader::str(j, path, "rule");
  a.text = DocReader::str(j, path, "text");
  return a;
}

inline Step read_step(const json& j, const std::string& path) {
  DocReader::only_fields(j, path, {"index", "known_spans", "target_spans", "annotations"});
  Step s;
  s.index = DocReader::index(DocReader::field(j, path, "index"), path + "/index");
  const auto& ks = DocReader::array(j, path, "known_spans");
  for (std::size_t i = 0; i < ks.size(); ++i)
    s.known_spans.push_back(DocReader::span(ks[i], path + "/known_spans/" + std::to_string(i)));
  const auto& ts = DocReader::array(j, path, "target_spans");
  for (std::size_t i = 0; i < ts.size(); ++i)
    s.target_spans.push_back(DocReader::span(ts[i], path + "/target_spans/" + std::to_string(i)));
  const auto& as = DocReader::array(j, path, "annotations");
  for (std::size_t i = 0; i < as.size(); ++i)
    s.annotations.push_back(read_annotation(as[i], path + "/annotations/" + std::to_string(i)));
  return s;
}

inline Lesson read_lesson(const json& j, const std::string& path) {
  DocReader::only_fields(j, path, {"id", "title", "known_snippet", "target_snippet", "steps", "output"});
  Lesson l;
  l.id = DocReader::str(j, path, "id");
  l.title = DocReader::str(j, path, "title");
  l.known_snippet = read_snippet(DocReader::field(j, path, "known_snippet"), path + "/known_snippet");
  l.target_snippet = read_snippet(DocReader::field(j, path, "target_snippet"), path + "/target_snippet");
  const auto& steps = DocReader::array(j, path, "steps");
  for (std::size_t i = 0; i < steps.size(); ++i)
    l.steps.push_back(read_step(steps[i], path + "/steps/" + std::to_string(i)));
  if (auto it = j.find("output"); it != j.end() && !it->is_null()) {
    const std::string op = path + "/output";
    DocReader::only_fields(*it, op, {"known_output", "target_output", "caption"});
    l.output = OutputBox{DocReader::str(*it, op, "known_output"), DocReader::str(*it, op, "target_output"),
                         DocReader::str(*it, op, "caption")};
  }
  return l;
}

inline Question read_question(const json& j, const std::string& path) {
  DocReader::only_fields(j, path, {"id", "prompt", "kind", "choices", "correct"});
  Question q;
  q.id = DocReader::str(j, path, "id");
  q.prompt = DocReader::str(j, path, "prompt");
  auto kind = parse_question_kind(DocReader::str(j, path, "kind"));
  if (!kind) DocReader::malformed(path + "/kind", "expected \"single\" or \"multi\"");
  q.kind = *kind;
  const auto& choices = DocReader::array(j, path, "choices");
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (!choices[i].is_string()) DocReader::malformed(path + "/choices/" + std::to_string(i), "expected a string");
    q.choices.push_back(choices[i].get<std::string>());
  }
  const auto& correct = DocReader::array(j, path, "correct");
  for (std::size_t i = 0; i < correct.size(); ++i)
    q.correct.insert(DocReader::index(correct[i], path + "/correct/" + std::to_string(i)));
  return q;
}

}  // namespace detail

/// Parses a pack document. Checks well-formedness only; see validate_pack.
inline LessonPack parse_pack(std::string_view document) {
  using detail::DocReader;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("JSON syntax error: ") + e.what(),
                "byte " + std::to_string(e.byte));
  }
  DocReader::only_fields(j, "", {"format_version", "id", "title", "known_language", "target_language",
                                 "lessons", "pretest", "posttest", "survey"});
  const auto& version = DocReader::field(j, "", "format_version");
  if (!version.is_number_integer() || version.get<int>() != kPackFormatVersion)
    DocReader::malformed("/format_version", "unsupported format version (expected " +
                                                std::to_string(kPackFormatVersion) + ")");
  LessonPack p;
  p.id = DocReader::str(j, "", "id");
  p.title = DocReader::str(j, "", "title");
  p.known_language = DocReader::language(j, "", "known_language");
  p.target_language = DocReader::language(j, "", "target_language");
  const auto& lessons = DocReader::array(j, "", "lessons");
  if (lessons.empty()) DocReader::malformed("/lessons", "a pack needs at least one lesson");
  for (std::size_t i = 0; i < lessons.size(); ++i)
    p.lessons.push_back(detail::read_lesson(lessons[i], "/lessons/" + std::to_string(i)));
  for (const char* key : {"pretest", "posttest"}) {
    const auto& qs = DocReader::array(j, "", key);
    auto& dest = std::string_view(key) == "pretest" ? p.pretest : p.posttest;
    for (std::size_t i = 0; i < qs.size(); ++i)
      dest.push_back(detail::read_question(qs[i], std::string("/") + key + "/" + std::to_string(i)));
  }
  const auto& survey = DocReader::array(j, "", "survey");
  for (std::size_t i = 0; i < survey.size(); ++i) {
    const std::string path = "/survey/" + std::to_string(i);
    DocReader::only_fields(survey[i], path, {"id", "text"});
    p.survey.push_back({DocReader::str(survey[i], path, "id"), DocReader::str(survey[i], path, "text")});
  }
  return p;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw Error(ErrorCode::MissingFile, "no such file: " + path.string(), path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LessonPack load_pack(const std::filesystem::path& path) {
  return parse_pack(read_file(path));
}

// ---------------------------------------------------------------------------
// JSON writing

inline nlohmann::ordered_json span_to_json(const Span& s) { return {s.start, s.end}; }

inline nlohmann::ordered_json question_to_json(const Question& q) {
  nlohmann::ordered_json j;
  j["id"] = q.id;
  j["prompt"] = q.prompt;
  j["kind"] = to_string(q.kind);
  j["choices"] = q.choices;
  j["correct"] = std::vector<std::size_t>(q.correct.begin(), q.correct.end());
  return j;
}

inline nlohmann::ordered_json pack_to_json(const LessonPack& p) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["format_version"] = kPackFormatVersion;
  j["id"] = p.id;
  j["title"] = p.title;
  j["known_language"] = to_string(p.known_language);
  j["target_language"] = to_string(p.target_language);
  j["lessons"] = oj::array();
  for (const auto& l : p.lessons) {
    oj lj;
    lj["id"] = l.id;
    lj["title"] = l.title;
    lj["known_snippet"] = {{"language", to_string(l.known_snippet.language)}, {"source", l.known_snippet.source}};
    lj["target_snippet"] = {{"language", to_string(l.target_snippet.language)}, {"source", l.target_snippet.source}};
    lj["steps"] = oj::array();
    for (const auto& s : l.steps) {
      oj sj;
      sj["index"] = s.index;
      sj["known_spans"] = oj::array();
      for (const auto& sp : s.known_spans) sj["known_spans"].push_back(span_to_json(sp));
      sj["target_spans"] = oj::array();
      for (const auto& sp : s.target_spans) sj["target_spans"].push_back(span_to_json(sp));
      sj["annotations"] = oj::array();
      for (const auto& a : s.annotations) {
        oj aj;
        aj["kind"] = to_string(a.kind);
        aj["side"] = to_string(a.side);
        if (!a.rule.empty()) aj["rule"] = a.rule;
        aj["text"] = a.text;
        sj["annotations"].push_back(std::move(aj));
      }
      lj["steps"].push_back(std::move(sj));
    }
    if (l.output)
      lj["output"] = {{"known_output", l.output->known_output},
                      {"target_output", l.output->target_output},
                      {"caption", l.output->caption}};
    j["lessons"].push_back(std::move(lj));
  }
  j["pretest"] = oj::array();
  for (const auto& q : p.pretest) j["pretest"].push_back(question_to_json(q));
  j["posttest"] = oj::array();
  for (const auto& q : p.posttest) j["posttest"].push_back(question_to_json(q));
  j["survey"] = oj::array();
  for (const auto& s : p.survey) j["survey"].push_back({{"id", s.id}, {"text", s.text}});
  return j;
}

inline std::string serialize_pack(const LessonPack& p) { return pack_to_json(p).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Validation

namespace detail {

class PackValidator {
 public:
  explicit PackValidator(const LessonPack& pack) : pack_(pack) {}

  ValidationReport run() {
    check_pack();
    std::set<std::string> lesson_ids;
    for (const auto& lesson : pack_.lessons) {
      if (!lesson_ids.insert(lesson.id).second)
        add(lesson.id, {}, "duplicate-lesson-id", "lesson id '" + lesson.id + "' is used more than once");
      check_lesson(lesson);
    }
    check_tests();
    check_survey();
    return std::move(report_);
  }

 private:
  void add(const std::string& lesson, std::optional<std::size_t> step, std::string rule, std::string message) {
    report_.violations.push_back({lesson, step, std::move(rule), std::move(message)});
  }

  void check_pack() {
    if (pack_.id.empty()) add("", {}, "empty-id", "pack id is empty");
    if (pack_.known_language == pack_.target_language)
      add("", {}, "same-language", "known and target language are both '" +
                                       std::string(to_string(pack_.known_language)) + "'");
    if (pack_.lessons.empty()) add("", {}, "no-lessons", "pack has no lessons");
  }

  void check_snippet(const Lesson& lesson, Side pane, std::optional<TokenList>& tokens) {
    const Snippet& s = lesson.snippet(pane);
    const Language expected = pane == Side::Known ? pack_.known_language : pack_.target_language;
    const std::string side(to_string(pane));
    if (s.language != expected)
      add(lesson.id, {}, "snippet-language", side + " snippet language does not match the pack");
    if (s.source.empty()) add(lesson.id, {}, "empty-source", side + " snippet source is empty");
    if (s.source != text::normalize_source(s.source))
      add(lesson.id, {}, "unnormalized-source", side + " snippet has CR or trailing newline characters");
    try {
      tokens = tokenize(s.language, s.source);
    } catch (const Error& e) {
      add(lesson.id, {}, "lex-error", side + " snippet: " + e.what());
    }
  }

  void check_spans(const Lesson& lesson, const Step& step, Side pane, const std::optional<TokenList>& tokens) {
    const auto& spans = step.spans(pane);
    const std::string side(to_string(pane));
    const std::size_t len = text::length(lesson.snippet(pane).source);
    std::vector<Span> in_bounds;
    for (const auto& sp : spans) {
      const std::string where = side + " span [" + std::to_string(sp.start) + ", " + std::to_string(sp.end) + ")";
      if (sp.start >= sp.end) {
        add(lesson.id, step.index, "span-empty", where + " is empty or reversed");
      } else if (sp.end > len) {
        add(lesson.id, step.index, "span-out-of-bounds", where + " exceeds source length " + std::to_string(len));
      } else {
        in_bounds.push_back(sp);
      }
    }
    for (std::size_t i = 0; i < spans.size(); ++i)
      for (std::size_t k = i + 1; k < spans.size(); ++k)
        if (spans[i].overlaps(spans[k]))
          add(lesson.id, step.index, "span-overlap",
              side + " spans " + std::to_string(i) + " and " + std::to_string(k) + " overlap");
    if (tokens) {
      auto aligned = spans_on_token_boundaries(*tokens, in_bounds);
      for (std::size_t i = 0; i < in_bounds.size(); ++i)
        if (!aligned[i])
          add(lesson.id, step.index, "span-not-token-aligned",
              side + " span [" + std::to_string(in_bounds[i].start) + ", " + std::to_string(in_bounds[i].end) +
                  ") does not fall on token boundaries");
    }
  }

  void check_lesson(const Lesson& lesson) {
    if (lesson.id.empty()) add(lesson.id, {}, "empty-id", "lesson id is empty");
    if (lesson.title.empty()) add(lesson.id, {}, "empty-title", "lesson title is empty");
    std::optional<TokenList> known_tokens, target_tokens;
    check_snippet(lesson, Side::Known, known_tokens);
    check_snippet(lesson, Side::Target, target_tokens);
    if (lesson.steps.empty()) add(lesson.id, {}, "no-steps", "lesson has no steps");
    for (std::size_t i = 0; i < lesson.steps.size(); ++i) {
      const Step& step = lesson.steps[i];
      if (step.index != i)
        add(lesson.id, step.index, "step-index",
            "step at position " + std::to_string(i) + " has index " + std::to_string(step.index));
      if (step.known_spans.empty() && step.target_spans.empty())
        add(lesson.id, step.index, "step-without-spans", "step highlights nothing");
      check_spans(lesson, step, Side::Known, known_tokens);
      check_spans(lesson, step, Side::Target, target_tokens);
      check_annotations(lesson, step);
    }
    if (lesson.output) {
      if (lesson.output->known_output.empty() || lesson.output->target_output.empty())
        add(lesson.id, {}, "empty-output", "output box needs both renderings");
    }
  }

  void check_annotations(const Lesson& lesson, const Step& step) {
    if (step.annotations.empty()) add(lesson.id, step.index, "no-annotations", "step has no annotations");
    for (const auto& a : step.annotations) {
      if (a.text.empty()) add(lesson.id, step.index, "empty-annotation-text", "annotation text is empty");
      for (Side pane : {Side::Known, Side::Target})
        if (covers(a.side, pane) && step.spans(pane).empty())
          add(lesson.id, step.index, "annotation-side-without-spans",
              std::string(to_string(a.kind)) + " annotation targets the " + std::string(to_string(pane)) +
                  " side, which has no spans");
    }
    // Each highlighted span gets one kind, so annotations sharing a pane must agree.
    for (Side pane : {Side::Known, Side::Target}) {
      std::optional<AnnotationKind> seen;
      for (const auto& a : step.annotations) {
        if (!covers(a.side, pane)) continue;
        if (seen && *seen != a.kind) {
          add(lesson.id, step.index, "side-kind-conflict",
              "annotations on the " + std::string(to_string(pane)) + " side disagree on kind");
          break;
        }
        seen = a.kind;
      }
    }
  }

  void check_question(const Question& q, const std::string& test) {
    const std::string where = test + " question '" + q.id + "'";
    if (q.id.empty()) add("", {}, "empty-id", test + " question id is empty");
    if (q.prompt.empty()) add("", {}, "empty-prompt", where + " has an empty prompt");
    if (q.choices.size() < 2) add("", {}, "too-few-choices", where + " needs at least two choices");
    if (q.kind == QuestionKind::SingleChoice && q.correct.size() != 1)
      add("", {}, "bad-answer-key", where + " is single choice but has " + std::to_string(q.correct.size()) +
                                        " correct choices");
    if (q.kind == QuestionKind::MultiAnswer && q.correct.empty())
      add("", {}, "bad-answer-key", where + " has no correct choices");
    for (auto c : q.correct)
      if (c >= q.choices.size())
        add("", {}, "bad-answer-key", where + " marks out-of-range choice " + std::to_string(c));
  }

  void check_tests() {
    for (bool post : {false, true}) {
      const auto& qs = pack_.test(post);
      const std::string name = post ? "posttest" : "pretest";
      std::set<std::string> ids;
      for (const auto& q : qs) {
        if (!ids.insert(q.id).second)
          add("", {}, "duplicate-question-id", name + " question id '" + q.id + "' is used more than once");
        check_question(q, name);
      }
    }
    auto by_id = [](std::vector<Question> qs) {
      std::sort(qs.begin(), qs.end(), [](const Question& a, const Question& b) { return a.id < b.id; });
      return qs;
    };
    if (by_id(pack_.pretest) != by_id(pack_.posttest))
      add("", {}, "posttest-mismatch", "posttest must contain exactly the pretest questions");
  }

  void check_survey() {
    std::set<std::string> ids;
    for (const auto& s : pack_.survey) {
      if (!ids.insert(s.id).second)
        add("", {}, "duplicate-statement-id", "survey statement id '" + s.id + "' is used more than once");
      if (s.text.empty()) add("", {}, "empty-statement", "survey statement '" + s.id + "' has no text");
    }
  }

  const LessonPack& pack_;
  ValidationReport report_;
};

}  // namespace detail

/// Structural checks; violations are reported in a stable order.
inline ValidationReport validate_pack(const LessonPack& pack) {
  return detail::PackValidator(pack).run();
}

}  // namespace tutor
