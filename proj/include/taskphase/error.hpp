#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taskphase {

enum class ErrorCode {
  InvalidArgument,
  NonConvergent,
  ShapeMismatch,
  BetaOutOfRange,
  EmptyDataset,
  ZeroReward,
  UnsupportedAction,
  InsufficientHistory,
  WrongMode,
  DegeneratePolicy,
  InvalidSpec,
  WrongCurveKind,
  StalledSchedule,
  ConfigInvalid,
  UnknownParameter,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BetaOutOfRange: return "BetaOutOfRange";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ZeroReward: return "ZeroReward";
    case ErrorCode::UnsupportedAction: return "UnsupportedAction";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::DegeneratePolicy: return "DegeneratePolicy";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::WrongCurveKind: return "WrongCurveKind";
    case ErrorCode::StalledSchedule: return "StalledSchedule";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
  }
  return "Unknown";
}

/// Every failure raised by the toolkit carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace taskphase
