#include "skidsteer/errors.hpp"

namespace skidsteer {

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::DegenerateParams: return "degenerate-params";
    case ErrorCategory::InsufficientExcitation: return "insufficient-excitation";
    case ErrorCategory::MeasurementGap: return "measurement-gap";
    case ErrorCategory::TooFewSamples: return "too-few-samples";
    case ErrorCategory::ManifoldGradient: return "manifold-gradient";
    case ErrorCategory::NegativeDepth: return "negative-depth";
    case ErrorCategory::SolverDiverged: return "solver-diverged";
    case ErrorCategory::SingularBlock: return "singular-block";
    case ErrorCategory::VariantMismatch: return "variant-mismatch";
    case ErrorCategory::ConfigParse: return "config-parse";
    case ErrorCategory::LogParse: return "log-parse";
    case ErrorCategory::StreamMissing: return "stream-missing";
    case ErrorCategory::InvalidArgument: return "invalid-argument";
    case ErrorCategory::Io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorCategory c) { return 10 + static_cast<int>(c); }

}  // namespace skidsteer
