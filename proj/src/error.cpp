#include "plantcast/error.hpp"

namespace plantcast {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::ZeroDimension: return "ZeroDimension";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonMonotonic: return "NonMonotonic";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotScalarLoss: return "NotScalarLoss";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::OddHeadDim: return "OddHeadDim";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace plantcast
