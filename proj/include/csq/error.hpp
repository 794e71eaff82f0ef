#pragma once

#include <stdexcept>
#include <string>

namespace csq {

// Failure categories. CLI maps these onto process exit codes; library users
// can switch on code() instead of parsing messages.
enum class ErrorCode {
  InvalidDimension,
  KindMismatch,
  LayoutMismatch,
  InvalidState,
  Truncation,
  DegenerateCode,
  IntegrationFailure,
  SpectrumAnomaly,
  SingularDerivative,
  InconsistentParameters,
  RegimeViolation,
  ConfigError,
  NumericFailure,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace csq
