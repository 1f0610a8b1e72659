#pragma once

// The known→target construct mapping and a token-level linter that flags
// negative-transfer idioms in target-language code.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tutor/error.hpp"
#include "tutor/lesson_model.hpp"
#include "tutor/lexer.hpp"

namespace tutor {

inline constexpr int kRulesFormatVersion = 1;

struct Construct {
  std::string name;
  std::string pattern;  // space-separated token lexemes; empty when there is no counterpart
  friend bool operator==(const Construct&, const Construct&) = default;
};

struct TransferRule {
  std::string id;
  AnnotationKind kind = AnnotationKind::PositiveTransfer;
  Construct known;
  Construct target;
  std::string explanation;  // may contain {known} and {target}
  std::string detector;     // lint detector name, empty if the rule is not linted

  std::string render() const {
    std::string out = explanation;
    for (auto [key, value] : {std::pair{std::string("{known}"), known.name}, {std::string("{target}"), target.name}}) {
      for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
        out.replace(pos, key.size(), value);
    }
    return out;
  }
  friend bool operator==(const TransferRule&, const TransferRule&) = default;
};

enum class Severity { Gotcha, Note };

inline std::string_view to_string(Severity s) { return s == Severity::Gotcha ? "gotcha" : "note"; }

struct Finding {
  std::string rule_id;
  Span span;
  std::string message;
  Severity severity = Severity::Gotcha;
  friend bool operator==(const Finding&, const Finding&) = default;
};

/// `file:offset: [gotcha rule-id] message`
inline std::string format_diagnostic(std::string_view file, const Finding& f) {
  return std::string(file) + ":" + std::to_string(f.span.start) + ": [" + std::string(to_string(f.severity)) + " " +
         f.rule_id + "] " + f.message;
}

// ---------------------------------------------------------------------------
// Detectors. Each returns the spans it matched in a token stream.

namespace lint {

using Frames = std::set<std::string>;

class Cursor {
 public:
  explicit Cursor(const TokenList& tokens) : tokens_(tokens), sig_(significant_indices(tokens)) {}

  std::size_t size() const { return sig_.size(); }
  const Token& at(std::size_t i) const { return tokens_[sig_[i]]; }
  bool valid(std::size_t i) const { return i < sig_.size(); }
  bool is(std::size_t i, TokenKind k, std::string_view lexeme) const { return valid(i) && at(i).is(k, lexeme); }
  bool delim(std::size_t i, std::string_view lexeme) const { return is(i, TokenKind::Delimiter, lexeme); }

  /// Whether trivia between significant tokens i-1 and i contains a line break.
  bool newline_before(std::size_t i) const {
    const std::size_t lo = i == 0 ? 0 : sig_[i - 1] + 1;
    for (std::size_t k = lo; k < sig_[i]; ++k)
      if (tokens_[k].kind == TokenKind::Whitespace && tokens_[k].lexeme.find('\n') != std::string::npos) return true;
    return false;
  }

  /// Index of the delimiter closing the opener at `open`, if any.
  std::optional<std::size_t> matching(std::size_t open) const {
    int depth = 0;
    for (std::size_t i = open; i < sig_.size(); ++i) {
      const Token& t = at(i);
      if (t.kind != TokenKind::Delimiter) continue;
      if (t.lexeme == "(" || t.lexeme == "[" || t.lexeme == "[[" || t.lexeme == "{") ++depth;
      if (t.lexeme == ")" || t.lexeme == "]" || t.lexeme == "]]" || t.lexeme == "}") {
        if (--depth == 0) return i;
      }
    }
    return std::nullopt;
  }

  /// Significant indices strictly inside (open, close) at nesting depth zero.
  std::vector<std::size_t> top_level(std::size_t open, std::size_t close) const {
    std::vector<std::size_t> out;
    int depth = 0;
    for (std::size_t i = open + 1; i < close; ++i) {
      const Token& t = at(i);
      const bool opener = t.kind == TokenKind::Delimiter &&
                          (t.lexeme == "(" || t.lexeme == "[" || t.lexeme == "[[" || t.lexeme == "{");
      const bool closer = t.kind == TokenKind::Delimiter &&
                          (t.lexeme == ")" || t.lexeme == "]" || t.lexeme == "]]" || t.lexeme == "}");
      if (closer) --depth;
      if (depth == 0 && !closer) out.push_back(i);
      if (opener) ++depth;
    }
    return out;
  }

 private:
  const TokenList& tokens_;
  std::vector<std::size_t> sig_;
};

inline bool is_zero_literal(const Token& t) {
  if (t.kind != TokenKind::NumberLiteral) return false;
  std::string digits = t.lexeme;
  if (!digits.empty() && digits.back() == 'L') digits.pop_back();
  return !digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0' || c == '.'; });
}

// `== NA` / `NA != x`: comparisons with NA yield NA.
inline std::vector<Span> na_comparison(const Cursor& c, const Frames&) {
  std::vector<Span> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Token& t = c.at(i);
    if (t.kind != TokenKind::Operator || (t.lexeme != "==" && t.lexeme != "!=")) continue;
    if (c.is(i + 1, TokenKind::Keyword, "NA")) out.push_back({t.span.start, c.at(i + 1).span.end});
    else if (i > 0 && c.is(i - 1, TokenKind::Keyword, "NA")) out.push_back({c.at(i - 1).span.start, t.span.end});
  }
  return out;
}

// A literal 0 used directly as an index, a range endpoint or one bracket argument.
inline std::vector<Span> zero_index(const Cursor& c, const Frames&) {
  std::vector<Span> out;
  std::vector<std::size_t> open;  // stack of bracket opener indices
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Token& t = c.at(i);
    if (t.kind == TokenKind::Delimiter) {
      if (t.lexeme == "[" || t.lexeme == "[[" || t.lexeme == "(" || t.lexeme == "{") open.push_back(i);
      else if ((t.lexeme == "]" || t.lexeme == "]]" || t.lexeme == ")" || t.lexeme == "}") && !open.empty())
        open.pop_back();
      continue;
    }
    if (!is_zero_literal(t) || open.empty()) continue;
    const Token& opener = c.at(open.back());
    if (opener.lexeme != "[" && opener.lexeme != "[[") continue;
    const bool after = c.delim(i - 1, "[") || c.delim(i - 1, "[[") || c.delim(i - 1, ",");
    const bool before = c.delim(i + 1, "]") || c.delim(i + 1, "]]") || c.delim(i + 1, ",") ||
                        c.is(i + 1, TokenKind::Operator, ":");
    if (after && before) out.push_back(t.span);
  }
  return out;
}

// `df.Score` where `df` is a known data frame: R reads it as one identifier.
inline std::vector<Span> dot_column_access(const Cursor& c, const Frames& frames) {
  std::vector<Span> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Token& t = c.at(i);
    if (t.kind != TokenKind::Identifier) continue;
    const auto dot = t.lexeme.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= t.lexeme.size()) continue;
    if (frames.contains(t.lexeme.substr(0, dot))) out.push_back(t.span);
  }
  return out;
}

// `df[cond]` / `df[1:5]` on a frame: without a comma `[` selects columns.
inline std::vector<Span> bracket_rows(const Cursor& c, const Frames& frames) {
  std::vector<Span> out;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    const Token& t = c.at(i);
    if (t.kind != TokenKind::Identifier || !frames.contains(t.lexeme) || !c.delim(i + 1, "[")) continue;
    auto close = c.matching(i + 1);
    if (!close) continue;
    bool comma = false, rowlike = false;
    for (auto k : c.top_level(i + 1, *close)) {
      const Token& inner = c.at(k);
      if (inner.is(TokenKind::Delimiter, ",")) comma = true;
      if (inner.kind == TokenKind::Operator &&
          (inner.lexeme == ":" || inner.lexeme == ">" || inner.lexeme == "<" || inner.lexeme == ">=" ||
           inner.lexeme == "<=" || inner.lexeme == "==" || inner.lexeme == "!=" || inner.lexeme == "!"))
        rowlike = true;
    }
    if (!comma && rowlike) out.push_back({c.at(i + 1).span.start, c.at(*close).span.end});
  }
  return out;
}

// `[[` with several columns: `[[` extracts exactly one element.
inline std::vector<Span> double_bracket(const Cursor& c, const Frames&) {
  std::vector<Span> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.delim(i, "[[")) continue;
    auto close = c.matching(i);
    if (!close) continue;
    bool multi = false;
    for (auto k : c.top_level(i, *close)) {
      if (c.delim(k, ",")) multi = true;
      if (c.is(k, TokenKind::Identifier, "c") && c.delim(k + 1, "(")) multi = true;
    }
    if (multi) out.push_back({c.at(i).span.start, c.at(*close).span.end});
  }
  return out;
}

// `x = 1` as a statement: legal, but `<-` is the idiomatic assignment.
inline std::vector<Span> equals_assignment(const Cursor& c, const Frames&) {
  std::vector<Span> out;
  int depth = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Token& t = c.at(i);
    const bool statement_start =
        depth == 0 && (i == 0 || c.newline_before(i) || c.delim(i - 1, ";") || c.delim(i - 1, "{"));
    if (statement_start && t.kind == TokenKind::Identifier && c.is(i + 1, TokenKind::Operator, "="))
      out.push_back(c.at(i + 1).span);
    if (t.kind == TokenKind::Delimiter) {
      if (t.lexeme == "(" || t.lexeme == "[" || t.lexeme == "[[") ++depth;
      if ((t.lexeme == ")" || t.lexeme == "]" || t.lexeme == "]]") && depth > 0) --depth;
    }
  }
  return out;
}

using Detector = std::vector<Span> (*)(const Cursor&, const Frames&);

inline const std::map<std::string, Detector, std::less<>>& detectors() {
  static const std::map<std::string, Detector, std::less<>> table{
      {"na-comparison", &na_comparison},       {"zero-index", &zero_index},
      {"dot-column-access", &dot_column_access}, {"bracket-rows", &bracket_rows},
      {"double-bracket", &double_bracket},     {"equals-assignment", &equals_assignment},
  };
  return table;
}

}  // namespace lint

// ---------------------------------------------------------------------------

struct RuleSet {
  Language known_language = Language::Python;
  Language target_language = Language::R;
  std::vector<TransferRule> rules;

  const TransferRule* find(std::string_view id) const {
    auto it = std::find_if(rules.begin(), rules.end(), [&](const TransferRule& r) { return r.id == id; });
    return it == rules.end() ? nullptr : &*it;
  }
  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

inline const TransferRule& lookup(const RuleSet& rules, std::string_view construct_id) {
  if (const auto* r = rules.find(construct_id)) return *r;
  throw Error(ErrorCode::UnknownConstruct, "unknown construct '" + std::string(construct_id) + "'");
}

inline RuleSet parse_rules(std::string_view document) {
  using detail::DocReader;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("JSON syntax error: ") + e.what(),
                "byte " + std::to_string(e.byte));
  }
  DocReader::only_fields(j, "", {"format_version", "known_language", "target_language", "rules"});
  const auto& version = DocReader::field(j, "", "format_version");
  if (!version.is_number_integer() || version.get<int>() != kRulesFormatVersion)
    DocReader::malformed("/format_version", "unsupported format version");
  RuleSet set;
  set.known_language = DocReader::language(j, "", "known_language");
  set.target_language = DocReader::language(j, "", "target_language");
  const auto& rules = DocReader::array(j, "", "rules");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string path = "/rules/" + std::to_string(i);
    const auto& rj = rules[i];
    DocReader::only_fields(rj, path, {"id", "kind", "known", "target", "explanation", "detector"});
    TransferRule r;
    r.id = DocReader::str(rj, path, "id");
    if (!ids.insert(r.id).second) DocReader::malformed(path + "/id", "duplicate rule id '" + r.id + "'");
    auto kind = parse_annotation_kind(DocReader::str(rj, path, "kind"));
    if (!kind) DocReader::malformed(path + "/kind", "expected \"transfer\", \"gotcha\" or \"newfact\"");
    r.kind = *kind;
    for (auto [key, dest] : {std::pair{"known", &r.known}, {"target", &r.target}}) {
      const std::string cp = path + "/" + key;
      const auto& cj = DocReader::field(rj, path, key);
      DocReader::only_fields(cj, cp, {"construct", "pattern"});
      dest->name = DocReader::str(cj, cp, "construct");
      if (cj.contains("pattern")) dest->pattern = DocReader::str(cj, cp, "pattern");
    }
    r.explanation = DocReader::str(rj, path, "explanation");
    if (rj.contains("detector")) {
      r.detector = DocReader::str(rj, path, "detector");
      if (!lint::detectors().contains(r.detector))
        DocReader::malformed(path + "/detector", "unknown detector '" + r.detector + "'");
    }
    if (r.kind == AnnotationKind::NewFact && !r.known.pattern.empty())
      DocReader::malformed(path + "/known/pattern", "new-fact rules have no known-language pattern");
    if (r.kind == AnnotationKind::NegativeTransfer && r.explanation.empty())
      DocReader::malformed(path + "/explanation", "gotcha rules need a warning explanation");
    set.rules.push_back(std::move(r));
  }
  return set;
}

inline RuleSet load_rules(const std::filesystem::path& path) { return parse_rules(read_file(path)); }

inline std::string serialize_rules(const RuleSet& set) {
  nlohmann::ordered_json j;
  j["format_version"] = kRulesFormatVersion;
  j["known_language"] = to_string(set.known_language);
  j["target_language"] = to_string(set.target_language);
  j["rules"] = nlohmann::ordered_json::array();
  for (const auto& r : set.rules) {
    nlohmann::ordered_json rj;
    rj["id"] = r.id;
    rj["kind"] = to_string(r.kind);
    for (auto [key, c] : {std::pair{"known", &r.known}, {"target", &r.target}}) {
      nlohmann::ordered_json cj;
      cj["construct"] = c->name;
      if (!c->pattern.empty()) cj["pattern"] = c->pattern;
      rj[key] = std::move(cj);
    }
    rj["explanation"] = r.explanation;
    if (!r.detector.empty()) rj["detector"] = r.detector;
    j["rules"].push_back(std::move(rj));
  }
  return j.dump(2) + "\n";
}

/// Token-pattern lint of target-language source; findings sorted by span start.
inline std::vector<Finding> lint_target(const RuleSet& rules, std::string_view source,
                                        const std::set<std::string>& frames = {}) {
  const TokenList tokens = tokenize(rules.target_language, source);
  const lint::Cursor cursor(tokens);
  std::vector<Finding> out;
  for (const auto& rule : rules.rules) {
    if (rule.detector.empty()) continue;
    const auto detect = lint::detectors().find(rule.detector)->second;
    const Severity sev = rule.kind == AnnotationKind::NegativeTransfer ? Severity::Gotcha : Severity::Note;
    for (const auto& span : detect(cursor, frames)) out.push_back({rule.id, span, rule.render(), sev});
  }
  std::stable_sort(out.begin(), out.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.span.start, a.span.end, a.rule_id) < std::tie(b.span.start, b.span.end, b.rule_id);
  });
  return out;
}

/// Cross-checks pack annotations against the knowledge base.
inline ValidationReport check_pack_rules(const LessonPack& pack, const RuleSet& rules) {
  ValidationReport report;
  if (pack.known_language != rules.known_language || pack.target_language != rules.target_language)
    report.violations.push_back({"", {}, "rules-language-mismatch", "rule corpus is for a different language pair"});
  for (const auto& lesson : pack.lessons) {
    for (const auto& step : lesson.steps) {
      for (const auto& a : step.annotations) {
        if (a.rule.empty()) {
          report.violations.push_back({lesson.id, step.index, "missing-rule", "annotation cites no rule"});
          continue;
        }
        const TransferRule* r = rules.find(a.rule);
        if (!r) {
          report.violations.push_back({lesson.id, step.index, "unknown-rule", "annotation cites unknown rule '" + a.rule + "'"});
        } else if (r->kind != a.kind) {
          report.violations.push_back({lesson.id, step.index, "rule-kind-mismatch",
                                       "annotation is " + std::string(to_string(a.kind)) + " but rule '" + a.rule +
                                           "' is " + std::string(to_string(r->kind))});
        }
      }
    }
  }
  return report;
}

}  // namespace tutor
