#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plantcast {

enum class ErrorCode {
  DimensionMismatch,
  EmptyMask,
  ZeroDimension,
  IoFailure,
  SchemaMismatch,
  ParseError,
  NonMonotonic,
  NoOverlap,
  TooFewPoints,
  MissingChannel,
  ShapeMismatch,
  NotScalarLoss,
  InsufficientHistory,
  OddHeadDim,
  NonPositiveSigma,
  EmptySplit,
  TooFewSamples,
  LengthMismatch,
  FormatError,
  UsageError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every library failure is reported through this type; `code()` lets callers
// (the CLI in particular) distinguish usage errors from data errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace plantcast
