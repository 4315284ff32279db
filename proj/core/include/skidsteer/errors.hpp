#pragma once

#include <stdexcept>
#include <string>

namespace skidsteer {

enum class ErrorCategory {
  DegenerateParams,
  InsufficientExcitation,
  MeasurementGap,
  TooFewSamples,
  ManifoldGradient,
  NegativeDepth,
  SolverDiverged,
  SingularBlock,
  VariantMismatch,
  ConfigParse,
  LogParse,
  StreamMissing,
  InvalidArgument,
  Io,
};

const char* category_name(ErrorCategory c);
int exit_code(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory c, const std::string& msg)
      : std::runtime_error(msg), category_(c) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace skidsteer
