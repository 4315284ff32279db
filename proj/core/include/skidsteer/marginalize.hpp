#pragma once

#include <vector>

#include "skidsteer/geom.hpp"

namespace skidsteer {

inline constexpr double kMarginalizationFloor = 1e-10;

struct MarginalizationResult {
  MatX information;  // Schur complement over the kept indices, in order
  VecX gradient;
  std::vector<int> kept_indices;
  bool singular_block = false;  // the eliminated block needed the floor
  double min_eliminated_eigenvalue = 0.0;
};

// Eliminates marg_indices from the quadratic 0.5 x^T H x + g^T x.
MarginalizationResult marginalize(const MatX& hessian, const VecX& gradient,
                                  const std::vector<int>& marg_indices,
                                  double floor = kMarginalizationFloor);

}  // namespace skidsteer
