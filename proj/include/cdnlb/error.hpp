#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace cdnlb {

enum class ErrorCode {
  NonSquare,
  RowSumViolation,
  NegativeEntry,
  DimensionMismatch,
  BadPartition,
  InvalidValue,
  NegativeLoad,
  OutOfRangeControl,
  BadInterval,
  NonPositiveInput,
  InfeasibleEverywhere,
  UnreachableCategory,
  BadInitialPoint,
  NotAFixedPoint,
  OutOfRange,
  NotConverged,
  BoundaryTouched,
  NotFound,
  GeneratorFailure,
  EmptyInput,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Single exception type for every component. The code identifies the failure
/// class; row/col/value carry the offending location when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, long row = -1, long col = -1,
        double value = std::numeric_limits<double>::quiet_NaN());

  ErrorCode code() const noexcept { return code_; }
  long row() const noexcept { return row_; }
  long col() const noexcept { return col_; }
  double value() const noexcept { return value_; }

 private:
  ErrorCode code_;
  long row_;
  long col_;
  double value_;
};

}  // namespace cdnlb
