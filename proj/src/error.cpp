#include "cdnlb/error.hpp"

namespace cdnlb {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::RowSumViolation: return "RowSumViolation";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadPartition: return "BadPartition";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::NegativeLoad: return "NegativeLoad";
    case ErrorCode::OutOfRangeControl: return "OutOfRangeControl";
    case ErrorCode::BadInterval: return "BadInterval";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::InfeasibleEverywhere: return "InfeasibleEverywhere";
    case ErrorCode::UnreachableCategory: return "UnreachableCategory";
    case ErrorCode::BadInitialPoint: return "BadInitialPoint";
    case ErrorCode::NotAFixedPoint: return "NotAFixedPoint";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::BoundaryTouched: return "BoundaryTouched";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::GeneratorFailure: return "GeneratorFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, long row, long col, double value)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      row_(row),
      col_(col),
      value_(value) {}

}  // namespace cdnlb
