#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rlac {

enum class ErrorCode {
  EmptyRubricSet,
  NotEnumerable,
  UnknownInstruction,
  ShapeMismatch,
  NoCandidates,
  NonFinite,
  DivergedUpdate,
  FitFailed,
  UndefinedPrecision,
  IncomparableRuns,
  Io,
  Config,
  MissingField,
  DuplicateTestcase,
  NonIntegerSentence,
  EndpointUnavailable,
  ProtocolError,
  ValidatorTimeout,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyRubricSet: return "EmptyRubricSet";
    case ErrorCode::NotEnumerable: return "NotEnumerable";
    case ErrorCode::UnknownInstruction: return "UnknownInstruction";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DivergedUpdate: return "DivergedUpdate";
    case ErrorCode::FitFailed: return "FitFailed";
    case ErrorCode::UndefinedPrecision: return "UndefinedPrecision";
    case ErrorCode::IncomparableRuns: return "IncomparableRuns";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::DuplicateTestcase: return "DuplicateTestcase";
    case ErrorCode::NonIntegerSentence: return "NonIntegerSentence";
    case ErrorCode::EndpointUnavailable: return "EndpointUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::ValidatorTimeout: return "ValidatorTimeout";
  }
  return "Unknown";
}

/// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace rlac
