#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace presstrain {

enum class ErrorCode {
  InvalidInput,
  InvalidData,
  RankDeficient,
  DegenerateVariance,
  UseApproximation,
  TrialAborted,
  NotFound,
  SourceFailure,
  Busy,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidData: return "InvalidData";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::UseApproximation: return "UseApproximation";
    case ErrorCode::TrialAborted: return "TrialAborted";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::SourceFailure: return "SourceFailure";
    case ErrorCode::Busy: return "Busy";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace presstrain
