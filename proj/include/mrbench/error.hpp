#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrb {

enum class ErrorCode {
  InvalidData,
  InvalidArgument,
  InvalidCropSize,
  FitDegenerate,
  CorruptContainer,
  IoError,
  MaskInfeasible,
  ShapeMismatch,
  DegenerateReference,
  WindowTooLarge,
  SubmissionIncomplete,
  NotApplicable,
  SolverDiverged,
  SplitInfeasible,
  RateLimited,
  AlreadySubmitted,
  WindowClosed,
  Sealed,
  NotFound,
  Unauthorized,
  InvalidPermutation,
  IncompleteResponse,
  OutOfScale,
  IncompleteStudy,
  StudyInfeasible,
  ConfigError,
};

// Stable identifiers, used verbatim in HTTP error bodies and logs.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail)
  {
  }

  ErrorCode code() const noexcept { return code_; }
  const std::string &detail() const noexcept { return detail_; }

private:
  ErrorCode code_;
  std::string detail_;
};

} // namespace mrb
