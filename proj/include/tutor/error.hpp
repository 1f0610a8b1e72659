#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tutor {

enum class ErrorCode {
  MissingFile,
  MalformedDocument,
  UnknownField,
  UnsupportedLanguage,
  UnterminatedString,
  InvalidUtf8,
  UnknownConstruct,
  InvalidPack,
  WrongPhase,
  NoPrevious,
  AlreadyAnswered,
  BadSelection,
  UnknownQuestion,
  UnknownStatement,
  LevelOutOfRange,
  MissingAnswer,
  LengthMismatch,
  NotFound,
  CorruptRecord,
  Io,
};

/// Stable, lowercase-kebab code string used in diagnostics and API payloads.
constexpr std::string_view code_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "missing-file";
    case ErrorCode::MalformedDocument: return "malformed-document";
    case ErrorCode::UnknownField: return "unknown-field";
    case ErrorCode::UnsupportedLanguage: return "unsupported-language";
    case ErrorCode::UnterminatedString: return "unterminated-string";
    case ErrorCode::InvalidUtf8: return "invalid-utf8";
    case ErrorCode::UnknownConstruct: return "unknown-construct";
    case ErrorCode::InvalidPack: return "invalid-pack";
    case ErrorCode::WrongPhase: return "wrong-phase";
    case ErrorCode::NoPrevious: return "no-previous";
    case ErrorCode::AlreadyAnswered: return "already-answered";
    case ErrorCode::BadSelection: return "bad-selection";
    case ErrorCode::UnknownQuestion: return "unknown-question";
    case ErrorCode::UnknownStatement: return "unknown-statement";
    case ErrorCode::LevelOutOfRange: return "level-out-of-range";
    case ErrorCode::MissingAnswer: return "missing-answer";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::CorruptRecord: return "corrupt-record";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string detail = {})
      : std::runtime_error(std::move(message)), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace tutor
