#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace locpoly {

enum class ErrorCode {
  InvalidArgument,
  ZeroScale,
  InsufficientSamples,
  RankDeficient,
  OperatorOrderTooHigh,
  TooFewSamples,
  NoMajorityBall,
  TooFewPoints,
  SpecInvalid,
  ParseError,
  IoError,
  NoData,
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroScale: return "ZeroScale";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::OperatorOrderTooHigh: return "OperatorOrderTooHigh";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NoMajorityBall: return "NoMajorityBall";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NoData: return "NoData";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI, the experiment harness) can dispatch without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::InvalidArgument, message);
}

} // namespace locpoly
