#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wproj {

enum class ErrorCode {
  EmptyInput,
  NonFinite,
  InvalidWeights,
  DimensionMismatch,
  BadMixWeights,
  MissingColumn,
  ParseError,
  AllRowsDropped,
  AllZeroImage,
  ImageFormat,
  Io,
  SizeBudgetExceeded,
  Infeasible,
  OracleSizeExceeded,
  ZeroRowMass,
  BaseMismatch,
  BadWeights,
  OutOfRange,
  PartialFailure,
  InsufficientSamples,
  MissingPeriodData,
  NonPSDCovariance,
  Config,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wproj
