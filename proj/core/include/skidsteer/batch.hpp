#pragma once

#include <vector>

#include "skidsteer/solver.hpp"

namespace skidsteer {

struct BatchResult {
  Values values;
  SolverSummary summary;
};

// Joint solve over every factor with no marginalization. Only blocks that
// appear in some factor are kept from the initial values.
BatchResult solve_batch(const Values& initial, const std::vector<FactorPtr>& factors,
                        const ActiveMask& mask, const SolverOptions& opts);

}  // namespace skidsteer
