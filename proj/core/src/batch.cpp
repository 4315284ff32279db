#include "skidsteer/batch.hpp"

#include "skidsteer/errors.hpp"

namespace skidsteer {

BatchResult solve_batch(const Values& initial, const std::vector<FactorPtr>& factors,
                        const ActiveMask& mask, const SolverOptions& opts) {
  BatchResult out;
  for (const auto& f : factors) {
    for (const auto& k : f->keys()) {
      if (out.values.contains(k)) continue;
      if (!initial.contains(k)) {
        throw Error(ErrorCategory::InvalidArgument, "batch factor references a missing block");
      }
      out.values.copy_block(k, initial);
    }
  }
  out.summary = solve_problem(out.values, factors, mask, opts);
  return out;
}

}  // namespace skidsteer
