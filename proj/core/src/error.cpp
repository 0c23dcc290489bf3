#include "sfdde/error.hpp"

namespace sfdde {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonIntegrable: return "NonIntegrable";
    case ErrorCode::InfiniteRate: return "InfiniteRate";
    case ErrorCode::AtomOffGrid: return "AtomOffGrid";
    case ErrorCode::OffsetOutOfRange: return "OffsetOutOfRange";
    case ErrorCode::ModeViolation: return "ModeViolation";
    case ErrorCode::StateNotMaintained: return "StateNotMaintained";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InsufficientIterates: return "InsufficientIterates";
    case ErrorCode::NotFactorized: return "NotFactorized";
    case ErrorCode::ShiftBeyondHorizon: return "ShiftBeyondHorizon";
    case ErrorCode::JumpDetected: return "JumpDetected";
    case ErrorCode::MissingJumpLog: return "MissingJumpLog";
    case ErrorCode::HorizonExceedsDelay: return "HorizonExceedsDelay";
    case ErrorCode::GridMisaligned: return "GridMisaligned";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace sfdde
