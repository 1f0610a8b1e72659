#pragma once

// Lossless tokenizers for the Python-like and R-like snippet surfaces.
//
// Every scalar value of the input lands in exactly one token, so joining the
// lexemes reproduces the source byte for byte. Unrecognized ASCII punctuation
// becomes a one-character Operator rather than an error.

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tutor/error.hpp"
#include "tutor/text.hpp"

namespace tutor {

enum class Language { Python, R };

inline std::string_view to_string(Language lang) {
  return lang == Language::Python ? "python" : "r";
}

inline Language parse_language(std::string_view tag) {
  if (tag == "python") return Language::Python;
  if (tag == "r") return Language::R;
  throw Error(ErrorCode::UnsupportedLanguage, "unsupported language tag '" + std::string(tag) + "'");
}

enum class TokenKind {
  Identifier,
  Operator,
  Delimiter,
  NumberLiteral,
  StringLiteral,
  Keyword,
  Whitespace,
  Comment,
};

inline std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Operator: return "operator";
    case TokenKind::Delimiter: return "delimiter";
    case TokenKind::NumberLiteral: return "number";
    case TokenKind::StringLiteral: return "string";
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Whitespace: return "whitespace";
    case TokenKind::Comment: return "comment";
  }
  return "?";
}

struct Token {
  TokenKind kind;
  std::string lexeme;
  Span span;

  bool trivia() const { return kind == TokenKind::Whitespace || kind == TokenKind::Comment; }
  bool is(TokenKind k, std::string_view text) const { return kind == k && lexeme == text; }
  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenList {
  Language language;
  std::vector<Token> tokens;

  std::string reconstruct() const {
    std::string out;
    for (const auto& t : tokens) out += t.lexeme;
    return out;
  }
  std::size_t size() const { return tokens.size(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }
};

namespace detail {

class Lexer {
 public:
  Lexer(Language lang, std::string_view source)
      : lang_(lang), src_(text::decode_utf8(source)) {}

  TokenList run() {
    TokenList out{lang_, {}};
    while (pos_ < src_.size()) out.tokens.push_back(next());
    return out;
  }

 private:
  static bool ascii_alpha(char32_t c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
  static bool digit(char32_t c) { return c >= '0' && c <= '9'; }
  static bool space(char32_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\f' || c == '\v'; }

  bool ident_start(char32_t c) const {
    if (ascii_alpha(c) || c >= 0x80) return true;
    if (c == '_') return lang_ == Language::Python;
    if (c == '.') return lang_ == Language::R && !digit(peek(1));
    return false;
  }
  bool ident_char(char32_t c) const {
    return ascii_alpha(c) || digit(c) || c >= 0x80 || c == '_' || (c == '.' && lang_ == Language::R);
  }

  char32_t peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : U'\0';
  }
  bool looking_at(std::u32string_view s) const {
    return src_.size() - pos_ >= s.size() && std::u32string_view(src_).substr(pos_, s.size()) == s;
  }

  Token make(TokenKind kind, std::size_t start) const {
    return Token{kind, text::encode_utf8(std::u32string_view(src_).substr(start, pos_ - start)),
                 Span{start, pos_}};
  }

  Token next() {
    const std::size_t start = pos_;
    const char32_t c = peek();

    if (space(c)) {
      while (pos_ < src_.size() && space(peek())) ++pos_;
      return make(TokenKind::Whitespace, start);
    }
    if (c == '#') {
      while (pos_ < src_.size() && peek() != '\n') ++pos_;
      return make(TokenKind::Comment, start);
    }
    if (c == '\'' || c == '"') return string_literal(c, start);
    if (lang_ == Language::R && c == '`') return backtick_name(start);
    if (digit(c) || (c == '.' && digit(peek(1)))) return number(start);
    if (ident_start(c)) {
      while (pos_ < src_.size() && ident_char(peek())) ++pos_;
      Token t = make(TokenKind::Identifier, start);
      if (is_keyword(t.lexeme)) t.kind = TokenKind::Keyword;
      return t;
    }
    return lang_ == Language::R ? r_punct(start) : python_punct(start);
  }

  bool is_keyword(const std::string& word) const {
    if (lang_ == Language::R) return word == "TRUE" || word == "FALSE" || word == "NA";
    return word == "True" || word == "False" || word == "None";
  }

  Token string_literal(char32_t quote, std::size_t start) {
    ++pos_;
    while (true) {
      if (pos_ >= src_.size() || peek() == '\n')
        throw Error(ErrorCode::UnterminatedString,
                    "unterminated string literal starting at offset " + std::to_string(start),
                    std::to_string(start));
      const char32_t c = peek();
      if (c == '\\' && (peek(1) == '\'' || peek(1) == '"')) {
        pos_ += 2;
        continue;
      }
      ++pos_;
      if (c == quote) break;
    }
    return make(TokenKind::StringLiteral, start);
  }

  Token backtick_name(std::size_t start) {
    ++pos_;
    while (pos_ < src_.size() && peek() != '`' && peek() != '\n') ++pos_;
    if (peek() != '`')
      throw Error(ErrorCode::UnterminatedString,
                  "unterminated backtick name starting at offset " + std::to_string(start),
                  std::to_string(start));
    ++pos_;
    return make(TokenKind::Identifier, start);
  }

  Token number(std::size_t start) {
    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      pos_ += 2;
      while (digit(peek()) || (peek() >= 'a' && peek() <= 'f') || (peek() >= 'A' && peek() <= 'F')) ++pos_;
    } else {
      while (digit(peek())) ++pos_;
      if (peek() == '.' && (lang_ == Language::R || digit(peek(1)) || !ident_start(peek(1)))) {
        ++pos_;
        while (digit(peek())) ++pos_;
      }
      if ((peek() == 'e' || peek() == 'E') &&
          (digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && digit(peek(2))))) {
        pos_ += 2;
        while (digit(peek())) ++pos_;
      }
    }
    if (lang_ == Language::R && (peek() == 'L' || peek() == 'i')) ++pos_;
    if (lang_ == Language::Python && (peek() == 'j' || peek() == 'J')) ++pos_;
    return make(TokenKind::NumberLiteral, start);
  }

  Token longest(std::size_t start, std::initializer_list<std::u32string_view> ops, TokenKind kind) {
    for (auto op : ops) {
      if (looking_at(op)) {
        pos_ += op.size();
        return make(kind, start);
      }
    }
    ++pos_;
    return make(TokenKind::Operator, start);
  }

  Token python_punct(std::size_t start) {
    switch (peek()) {
      case '(': case ')': case '[': case ']': case '{': case '}':
      case ',': case ':': case '.': case ';':
        ++pos_;
        return make(TokenKind::Delimiter, start);
      default:
        break;
    }
    return longest(start,
                   {U"**=", U"//=", U">>=", U"<<=", U"**", U"//", U"==", U"!=", U"<=", U">=",
                    U"<<", U">>", U"+=", U"-=", U"*=", U"/=", U"%=", U"->"},
                   TokenKind::Operator);
  }

  Token r_punct(std::size_t start) {
    const char32_t c = peek();
    if (c == '[') {
      if (peek(1) == '[') {
        pos_ += 2;
        brackets_.push_back(true);
      } else {
        ++pos_;
        brackets_.push_back(false);
      }
      return make(TokenKind::Delimiter, start);
    }
    if (c == ']') {
      // `]]` only closes a `[[`; `x[y[1]]` closes two single brackets.
      const bool dbl = !brackets_.empty() && brackets_.back() && peek(1) == ']';
      if (!brackets_.empty()) brackets_.pop_back();
      pos_ += dbl ? 2 : 1;
      return make(TokenKind::Delimiter, start);
    }
    switch (c) {
      case '(': case ')': case '{': case '}': case ',': case ';':
        ++pos_;
        return make(TokenKind::Delimiter, start);
      case '%': {
        std::size_t end = pos_ + 1;
        while (end < src_.size() && src_[end] != '%' && src_[end] != '\n') ++end;
        if (end < src_.size() && src_[end] == '%') {
          pos_ = end + 1;
          return make(TokenKind::Operator, start);
        }
        ++pos_;
        return make(TokenKind::Operator, start);
      }
      default:
        break;
    }
    return longest(start,
                   {U"<<-", U"->>", U":::", U"<-", U"->", U"::", U"==", U"!=", U"<=", U">=",
                    U"&&", U"||", U"|>"},
                   TokenKind::Operator);
  }

  Language lang_;
  std::u32string src_;
  std::size_t pos_ = 0;
  std::vector<bool> brackets_;  // true = `[[`
};

}  // namespace detail

/// Tokenizes `source` losslessly. Throws UnterminatedString or InvalidUtf8.
inline TokenList tokenize(Language language, std::string_view source) {
  return detail::Lexer(language, source).run();
}

inline TokenList tokenize(std::string_view language_tag, std::string_view source) {
  return tokenize(parse_language(language_tag), source);
}

/// For each span, whether it starts at some token start and ends at some token end.
inline std::vector<bool> spans_on_token_boundaries(const TokenList& tokens,
                                                   const std::vector<Span>& spans) {
  std::unordered_set<std::size_t> starts, ends;
  for (const auto& t : tokens.tokens) {
    starts.insert(t.span.start);
    ends.insert(t.span.end);
  }
  std::vector<bool> out;
  out.reserve(spans.size());
  for (const auto& s : spans) out.push_back(starts.contains(s.start) && ends.contains(s.end));
  return out;
}

/// Indices of non-trivia tokens, in order.
inline std::vector<std::size_t> significant_indices(const TokenList& tokens) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (!tokens[i].trivia()) idx.push_back(i);
  return idx;
}

}  // namespace tutor
