#include "mrbench/error.hpp"

namespace mrb {

std::string_view to_string(ErrorCode code)
{
  switch (code) {
  case ErrorCode::InvalidData: return "InvalidData";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::InvalidCropSize: return "InvalidCropSize";
  case ErrorCode::FitDegenerate: return "FitDegenerate";
  case ErrorCode::CorruptContainer: return "CorruptContainer";
  case ErrorCode::IoError: return "IoError";
  case ErrorCode::MaskInfeasible: return "MaskInfeasible";
  case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  case ErrorCode::DegenerateReference: return "DegenerateReference";
  case ErrorCode::WindowTooLarge: return "WindowTooLarge";
  case ErrorCode::SubmissionIncomplete: return "SubmissionIncomplete";
  case ErrorCode::NotApplicable: return "NotApplicable";
  case ErrorCode::SolverDiverged: return "SolverDiverged";
  case ErrorCode::SplitInfeasible: return "SplitInfeasible";
  case ErrorCode::RateLimited: return "RateLimited";
  case ErrorCode::AlreadySubmitted: return "AlreadySubmitted";
  case ErrorCode::WindowClosed: return "WindowClosed";
  case ErrorCode::Sealed: return "Sealed";
  case ErrorCode::NotFound: return "NotFound";
  case ErrorCode::Unauthorized: return "Unauthorized";
  case ErrorCode::InvalidPermutation: return "InvalidPermutation";
  case ErrorCode::IncompleteResponse: return "IncompleteResponse";
  case ErrorCode::OutOfScale: return "OutOfScale";
  case ErrorCode::IncompleteStudy: return "IncompleteStudy";
  case ErrorCode::StudyInfeasible: return "StudyInfeasible";
  case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

} // namespace mrb
