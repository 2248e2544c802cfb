#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pitchlab {

enum class ErrorCode {
  OutOfBounds,
  InsufficientFrames,
  InsufficientCorrespondences,
  DegenerateConfiguration,
  ProjectionAtInfinity,
  DegenerateInterpolation,
  InsufficientObservations,
  DimensionError,
  NumericalInstability,
  TrainingDiverged,
  GridMismatch,
  RangeError,
  HorizonUnderrun,
  EmptyReport,
  PolicyFault,
  ParseError,
  IoError,
  TooFewMatches,
  InvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every recoverable failure in the library. The code lets
/// callers (the CLI in particular) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& reason)
      : Error(ErrorCode::ParseError,
              source + ":" + std::to_string(line) + ": " + reason),
        source_(std::move(source)),
        line_(line),
        reason_(reason) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string reason_;
};

}  // namespace pitchlab
