#pragma once

// Random source generator for the lexer round-trip property. Fragments are
// biased towards the constructs the lexers special-case, plus arbitrary
// printable ASCII and a few multibyte scalars.

#include <array>
#include <random>
#include <string>

#include "tutor/lexer.hpp"

namespace tutor::testing {

class SnippetGenerator {
 public:
  SnippetGenerator(Language lang, std::uint64_t seed) : lang_(lang), rng_(seed) {}

  std::string next() {
    std::string out;
    const int parts = pick(1, 24);
    for (int i = 0; i < parts; ++i) out += fragment();
    return out;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  template <std::size_t N>
  const char* any(const std::array<const char*, N>& a) {
    return a[static_cast<std::size_t>(pick(0, static_cast<int>(N) - 1))];
  }

  std::string fragment() {
    static const std::array<const char*, 12> idents{"df", "read.csv", "x", "Score", "is.na", "pd", "iloc",
                                                    ".hidden", "sort_values", "n2", "na_rm", "caf\xC3\xA9"};
    static const std::array<const char*, 14> r_ops{"<-", "<<-", "->", "$", "@", "==", "!=", ">=", "%in%", "%%", "|>",
                                                   "::", "[[", "]]"};
    static const std::array<const char*, 12> py_ops{"=", "==", "**", "//", "->", ">=", "+=", ":", ".", "@", "%", "!="};
    static const std::array<const char*, 10> numbers{"0", "1", "3.14", "1e5", "2.5e-3", "0x1F", "10L", "1i", ".5", "7j"};
    static const std::array<const char*, 7> spaces{" ", "  ", "\n", "\t", " \n  ", "\f", "\n\n"};
    static const std::array<const char*, 8> delims{"(", ")", "[", "]", "{", "}", ",", ";"};
    switch (pick(0, 9)) {
      case 0: return any(idents);
      case 1: return lang_ == Language::R ? any(r_ops) : any(py_ops);
      case 2: return any(numbers);
      case 3: return any(spaces);
      case 4: return any(delims);
      case 5: return string_literal();
      case 6: return "# note " + std::string(any(idents)) + "\n";
      case 7: return std::string(1, static_cast<char>(pick(0x21, 0x7E)));
      case 8: return lang_ == Language::R ? "`odd name`" : "\xE2\x86\x90";
      default: return lang_ == Language::R ? "TRUE" : "None";
    }
  }

  std::string string_literal() {
    const char q = pick(0, 1) ? '\'' : '"';
    std::string s(1, q);
    const int n = pick(0, 6);
    for (int i = 0; i < n; ++i) {
      switch (pick(0, 4)) {
        case 0: s += "\\"; s += q; break;
        case 1: s += "\xC3\xA9"; break;
        case 2: s += q == '\'' ? '"' : '\''; break;
        default: s += static_cast<char>(pick('a', 'z'));
      }
    }
    return s + q;
  }

  Language lang_;
  std::mt19937_64 rng_;
};

}  // namespace tutor::testing
