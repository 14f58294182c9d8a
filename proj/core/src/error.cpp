#include "aggmogp/error.hpp"

namespace aggmogp {

const char *to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::EmptySupport: return "EmptySupport";
  case ErrorCode::LengthMismatch: return "LengthMismatch";
  case ErrorCode::OverlapError: return "OverlapError";
  case ErrorCode::OutOfBounds: return "OutOfBounds";
  case ErrorCode::EmptyPartition: return "EmptyPartition";
  case ErrorCode::InvalidGeometry: return "InvalidGeometry";
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::DegenerateInterval: return "DegenerateInterval";
  case ErrorCode::InvariantViolation: return "InvariantViolation";
  case ErrorCode::CholeskyFailure: return "CholeskyFailure";
  case ErrorCode::NonFiniteElbo: return "NonFiniteELBO";
  case ErrorCode::ZeroTruth: return "ZeroTruth";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::IncompatibleModel: return "IncompatibleModel";
  case ErrorCode::ParseError: return "ParseError";
  case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
  case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string &message,
                     const std::vector<std::string> &subjects) {
  std::string out = std::string(to_string(code)) + ": " + message;
  if (!subjects.empty()) {
    out += " [";
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      if (i > 0)
        out += ", ";
      out += subjects[i];
    }
    out += "]";
  }
  return out;
}

} // namespace

Error::Error(ErrorCode code, const std::string &message,
             std::vector<std::string> subjects)
    : std::runtime_error(decorate(code, message, subjects)), code_(code),
      subjects_(std::move(subjects)) {}

bool Error::is_validation() const noexcept {
  switch (code_) {
  case ErrorCode::CholeskyFailure:
  case ErrorCode::NonFiniteElbo:
    return false;
  default:
    return true;
  }
}

} // namespace aggmogp
