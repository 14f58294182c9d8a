#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace aggmogp {

enum class ErrorCode {
  EmptySupport,
  LengthMismatch,
  OverlapError,
  OutOfBounds,
  EmptyPartition,
  InvalidGeometry,
  DimensionMismatch,
  DegenerateInterval,
  InvariantViolation,
  CholeskyFailure,
  NonFiniteElbo,
  ZeroTruth,
  InvalidArgument,
  IncompatibleModel,
  ParseError,
  UnsupportedVersion,
  IoError,
};

const char *to_string(ErrorCode code);

/// Exception carrying a machine-readable code plus the ids (support ids,
/// indices, iteration numbers) the failure refers to.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message,
        std::vector<std::string> subjects = {});

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string> &subjects() const noexcept {
    return subjects_;
  }

  /// True for errors caused by bad input rather than numerics.
  bool is_validation() const noexcept;

private:
  ErrorCode code_;
  std::vector<std::string> subjects_;
};

} // namespace aggmogp
