#pragma once

#include <stdexcept>
#include <string>

namespace sfdde {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonIntegrable,
  InfiniteRate,
  AtomOffGrid,
  OffsetOutOfRange,
  ModeViolation,
  StateNotMaintained,
  EmptyEnsemble,
  NonFinite,
  InsufficientIterates,
  NotFactorized,
  ShiftBeyondHorizon,
  JumpDetected,
  MissingJumpLog,
  HorizonExceedsDelay,
  GridMisaligned,
  TooManyFailures,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception type thrown by every module. The code identifies the failure
/// class; the message carries context (step index, coefficient name, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sfdde
