#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wcdiff {

enum class ErrorCode {
  NonSquare,
  NegativeWeight,
  ColumnSumViolation,
  NonPrimitiveSource,
  IsolatedRAgent,
  NoConvergence,
  SingularSystem,
  DimensionMismatch,
  NotAnRAgent,
  Diverged,
  InsufficientData,
  SingularAggregateHessian,
  NonPositive,
  InvalidArgument,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::ColumnSumViolation: return "ColumnSumViolation";
    case ErrorCode::NonPrimitiveSource: return "NonPrimitiveSource";
    case ErrorCode::IsolatedRAgent: return "IsolatedRAgent";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotAnRAgent: return "NotAnRAgent";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SingularAggregateHessian: return "SingularAggregateHessian";
    case ErrorCode::NonPositive: return "NonPositive";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

/// Single exception type for the library. `index` and `other` carry the
/// offending agent / column / iteration where one applies (-1 otherwise),
/// `value` an offending numeric quantity.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, long index = -1,
        long other = -1, double value = 0.0)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        index_(index),
        other_(other),
        value_(value) {}

  ErrorCode code() const noexcept { return code_; }
  long index() const noexcept { return index_; }
  long other() const noexcept { return other_; }
  double value() const noexcept { return value_; }

 private:
  ErrorCode code_;
  long index_;
  long other_;
  double value_;
};

}  // namespace wcdiff
