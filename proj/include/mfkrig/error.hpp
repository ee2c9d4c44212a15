#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfkrig {

enum class ErrorCode {
  NotSymmetric,
  NotPositiveDefinite,
  DimensionMismatch,
  IndexOutOfRange,
  ObjectiveNonFinite,
  AllStartsFailed,
  DomainViolation,
  RankDeficientBasis,
  FactorizationFailure,
  DegenerateResidual,
  SingularNormalEquations,
  NonMonotoneEM,
  ConstantTruth,
  EmptyGrid,
  InvalidConfig,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can dispatch on the kind instead of the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ObjectiveNonFinite: return "ObjectiveNonFinite";
    case ErrorCode::AllStartsFailed: return "AllStartsFailed";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::RankDeficientBasis: return "RankDeficientBasis";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::DegenerateResidual: return "DegenerateResidual";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::NonMonotoneEM: return "NonMonotoneEM";
    case ErrorCode::ConstantTruth: return "ConstantTruth";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace mfkrig
