#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lqrflow {

enum class ErrorKind {
  DimensionMismatch,
  NonFinite,
  SingularMatrix,
  NoConvergence,
  NotSymmetric,
  NotPD,
  InvalidInstance,
  NotInSigmaSet,
  NotStabilizing,
  MaxIterExceeded,
  DegenerateStart,
  GenerationFailure,
  SamplingFailure,
  InvalidArgument,
  ParseError,
  UnsupportedDimensions,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NotPD: return "NotPD";
    case ErrorKind::InvalidInstance: return "InvalidInstance";
    case ErrorKind::NotInSigmaSet: return "NotInSigmaSet";
    case ErrorKind::NotStabilizing: return "NotStabilizing";
    case ErrorKind::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorKind::DegenerateStart: return "DegenerateStart";
    case ErrorKind::GenerationFailure: return "GenerationFailure";
    case ErrorKind::SamplingFailure: return "SamplingFailure";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnsupportedDimensions: return "UnsupportedDimensions";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind so
/// callers (the CLI in particular) can map it onto a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lqrflow
