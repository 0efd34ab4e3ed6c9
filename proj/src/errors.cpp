#include "p2p/errors.hpp"

namespace p2p {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::BalanceViolation: return "BalanceViolation";
    case ErrorCode::AlreadyDischarging: return "AlreadyDischarging";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::SizeExceeded: return "SizeExceeded";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::DegenerateState: return "DegenerateState";
    case ErrorCode::DegenerateTopology: return "DegenerateTopology";
    case ErrorCode::InvertedRange: return "InvertedRange";
    case ErrorCode::OutOfOrder: return "OutOfOrder";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::NonpositiveBound: return "NonpositiveBound";
    case ErrorCode::EmptyInterval: return "EmptyInterval";
    case ErrorCode::SegmentOverflow: return "SegmentOverflow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvariantError: return "InvariantError";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
  }
  return "Unknown";
}

}  // namespace p2p
