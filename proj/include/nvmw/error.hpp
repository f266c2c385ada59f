#pragma once

#include <stdexcept>
#include <string>

namespace nvmw {

/// Failure categories raised by the library. The CLI maps `Validation` to
/// exit code 2 and everything else to exit code 3.
enum class ErrorCode {
  Validation,         // bad input or precondition violation
  LabelingAmbiguous,  // no eigenvector is mostly |0>
  DegeneratePosition, // sensor at the wire center
  ZeroVector,
  EmptyGrid,
  ContrastOverflow,   // simulated fluorescence would go negative
  SingularSystem,     // normal equations could not be factored
  DegenerateAmplitude,
  NearParallel,
  PoorFit,
  InconsistentInput,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nvmw
