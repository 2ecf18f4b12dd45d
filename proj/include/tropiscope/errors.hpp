#pragma once

#include <stdexcept>
#include <string>

namespace trop {

enum class ErrorCode {
  SyntaxError,
  UnknownIdentifier,
  VarIndexOutOfRange,
  NotPolynomial,
  NegativePowerInEntireContext,
  SeriesDepthExceeded,
  EmptySupport,
  NonFiniteValue,
  ZeroVector,
  DimensionTooLarge,
  MonomialInput,
  NotCompact,
  BadBounds,
  BadArgument,
  ShellUnreachable,
  RootFindingBudgetExceeded,
  NoPointsNearDirection,
  EmptyAfterCutoff,
  DegenerateScales,
  EmptyBox,
  IoError,
};

const char* error_code_name(ErrorCode code);

/// All library errors carry a machine-checkable code plus a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace trop
