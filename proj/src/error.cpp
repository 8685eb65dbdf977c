#include "wproj/error.hpp"

namespace wproj {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadMixWeights: return "BadMixWeights";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::AllRowsDropped: return "AllRowsDropped";
    case ErrorCode::AllZeroImage: return "AllZeroImage";
    case ErrorCode::ImageFormat: return "ImageFormat";
    case ErrorCode::Io: return "Io";
    case ErrorCode::SizeBudgetExceeded: return "SizeBudgetExceeded";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::OracleSizeExceeded: return "OracleSizeExceeded";
    case ErrorCode::ZeroRowMass: return "ZeroRowMass";
    case ErrorCode::BaseMismatch: return "BaseMismatch";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::PartialFailure: return "PartialFailure";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::MissingPeriodData: return "MissingPeriodData";
    case ErrorCode::NonPSDCovariance: return "NonPSDCovariance";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace wproj
