#pragma once

#include <stdexcept>
#include <string>

namespace p2p {

enum class ErrorCode {
  InvalidParameter,
  BalanceViolation,
  AlreadyDischarging,
  Infeasible,
  SizeExceeded,
  NotConverged,
  DegenerateState,
  DegenerateTopology,
  InvertedRange,
  OutOfOrder,
  DegenerateRange,
  NonpositiveBound,
  EmptyInterval,
  SegmentOverflow,
  ParseError,
  SchemaError,
  InvariantError,
  ValidationFailed,
};

const char* to_string(ErrorCode code) noexcept;

// Every library failure surfaces as an Error; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace p2p
