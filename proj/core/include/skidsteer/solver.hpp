#pragma once

#include <map>
#include <vector>

#include "skidsteer/factors.hpp"

namespace skidsteer {

// Per-parameter switch for the kinematic blocks; false entries stay fixed.
struct ActiveMask {
  Eigen::Matrix<bool, 5, 1> xi = Eigen::Matrix<bool, 5, 1>::Constant(true);
  bool is_active(BlockKind kind, int dim) const {
    return kind != BlockKind::Xi || xi[dim];
  }
};

struct SolverOptions {
  int max_iterations = 10;
  double lambda_init = 1e-4;
  double lambda_min = 1e-9;
  double lambda_max = 1e4;
  double convergence_tol = 1e-6;
  int max_escalations = 5;
  // Huber threshold in whitened units; <= 0 disables the robust kernel.
  double huber_threshold = 1.345;
};

struct SolverSummary {
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  bool diverged = false;
};

// Normal equations over the non-landmark blocks, with every landmark block
// eliminated by its Schur complement. H and b live in the full tangent space
// of the listed keys; inactive dimensions are left in place.
struct LinearSystem {
  std::vector<BlockKey> keys;
  std::map<BlockKey, int> offset;
  MatX H;
  VecX b;  // gradient of the cost
  double cost = 0.0;
  int dim = 0;
};

double evaluate_cost(const Values& v, const std::vector<FactorPtr>& factors,
                     const SolverOptions& opts);

LinearSystem build_linear_system(const Values& v, const std::vector<FactorPtr>& factors,
                                 const SolverOptions& opts);

// Active indices of a linear system in order.
std::vector<int> active_indices(const LinearSystem& sys, const ActiveMask& mask);

SolverSummary solve_problem(Values& v, const std::vector<FactorPtr>& factors,
                            const ActiveMask& mask, const SolverOptions& opts);

// Marginal covariance of the requested blocks at the current values, in the
// full tangent space (inactive dimensions are zero).
std::map<BlockKey, MatX> marginal_covariances(const Values& v,
                                              const std::vector<FactorPtr>& factors,
                                              const ActiveMask& mask, const SolverOptions& opts,
                                              const std::vector<BlockKey>& wanted);

}  // namespace skidsteer
