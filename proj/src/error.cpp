#include "pitchlab/error.hpp"

namespace pitchlab {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::ProjectionAtInfinity: return "ProjectionAtInfinity";
    case ErrorCode::DegenerateInterpolation: return "DegenerateInterpolation";
    case ErrorCode::InsufficientObservations: return "InsufficientObservations";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::NumericalInstability: return "NumericalInstability";
    case ErrorCode::TrainingDiverged: return "TrainingDiverged";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::HorizonUnderrun: return "HorizonUnderrun";
    case ErrorCode::EmptyReport: return "EmptyReport";
    case ErrorCode::PolicyFault: return "PolicyFault";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TooFewMatches: return "TooFewMatches";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace pitchlab
