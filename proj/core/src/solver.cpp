#include "skidsteer/solver.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include <Eigen/Cholesky>

#include "skidsteer/errors.hpp"

namespace skidsteer {

namespace {

// A predicted cost reduction this small is below the roundoff of the cost
// itself, so a rejected step means convergence, not divergence.
constexpr double kNegligibleReduction = 1e-15;

struct LandmarkBlock {
  Mat3 Hll = Mat3::Zero();
  Vec3 bl = Vec3::Zero();
  std::map<int, Eigen::Matrix<double, 3, Eigen::Dynamic>> Hlx;  // keyed by x offset
};

struct Assembly {
  LinearSystem sys;
  std::map<long, LandmarkBlock> landmarks;
};

double robust_weight(double s2, double k, double& rho) {
  if (k <= 0.0 || s2 <= k * k) {
    rho = s2;
    return 1.0;
  }
  const double s = std::sqrt(s2);
  rho = 2.0 * k * s - k * k;
  return k / s;
}

// First row and count of the smallest row range holding every nonzero.
std::pair<int, int> row_band(const MatX& J) {
  const int rows = static_cast<int>(J.rows());
  int lo = 0;
  while (lo < rows && J.row(lo).isZero(0.0)) ++lo;
  if (lo == rows) return {0, 0};
  int hi = rows;
  while (J.row(hi - 1).isZero(0.0)) --hi;
  return {lo, hi - lo};
}

bool is_robust(const Factor& f, const SolverOptions& o) {
  return f.kind() == FactorKind::Visual && o.huber_threshold > 0.0;
}

void index_keys(const std::vector<FactorPtr>& factors, LinearSystem& sys) {
  std::set<BlockKey> keys;
  for (const auto& f : factors) {
    for (const auto& k : f->keys()) {
      if (k.kind != BlockKind::Landmark) keys.insert(k);
    }
  }
  sys.keys.assign(keys.begin(), keys.end());
  int off = 0;
  for (const auto& k : sys.keys) {
    sys.offset[k] = off;
    off += tangent_dim(k.kind);
  }
  sys.dim = off;
}

Assembly assemble(const Values& v, const std::vector<FactorPtr>& factors,
                  const SolverOptions& opts) {
  Assembly a;
  LinearSystem& sys = a.sys;
  index_keys(factors, sys);
  sys.H = MatX::Zero(sys.dim, sys.dim);
  sys.b = VecX::Zero(sys.dim);
  sys.cost = 0.0;
  std::vector<MatX> J;
  for (const auto& f : factors) {
    VecX r;
    try {
      r = f->evaluate(v, &J);
    } catch (const Error& e) {
      if (e.category() == ErrorCategory::NegativeDepth) continue;
      throw;
    }
    const MatX& W = f->information();
    const double s2 = r.dot(W * r);
    double rho = s2;
    const double w = is_robust(*f, opts) ? robust_weight(s2, opts.huber_threshold, rho) : 1.0;
    sys.cost += 0.5 * rho + f->extra_cost(r);
    const VecX Wr = w * (W * r);
    const VecX eg = f->extra_gradient();
    const auto& keys = f->keys();
    // Large factors (the marginalization prior) have Jacobians that are zero
    // outside a few rows; restrict the products to the nonzero row band.
    std::vector<std::pair<int, int>> band(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) band[i] = row_band(J[i]);
    std::vector<MatX> JtW(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto [r0, n] = band[i];
      JtW[i] = w * (J[i].middleRows(r0, n).transpose() * W.middleRows(r0, n));
    }
    auto jtwj = [&](std::size_t i, std::size_t j) -> MatX {
      const auto [r0, n] = band[j];
      return JtW[i].middleCols(r0, n) * J[j].middleRows(r0, n);
    };
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const BlockKey& ki = keys[i];
      const int di = tangent_dim(ki.kind);
      VecX gi = J[i].transpose() * Wr;
      if (eg.size() > 0) gi += J[i].transpose() * eg;
      if (ki.kind == BlockKind::Landmark) {
        LandmarkBlock& lb = a.landmarks[ki.id];
        lb.bl += gi;
        for (std::size_t j = 0; j < keys.size(); ++j) {
          const BlockKey& kj = keys[j];
          const MatX blk = jtwj(i, j);
          if (kj.kind == BlockKind::Landmark) {
            if (kj.id == ki.id) lb.Hll += blk;
          } else {
            const int oj = sys.offset.at(kj);
            auto it = lb.Hlx.find(oj);
            if (it == lb.Hlx.end()) {
              lb.Hlx.emplace(oj, blk);
            } else {
              it->second += blk;
            }
          }
        }
      } else {
        const int oi = sys.offset.at(ki);
        sys.b.segment(oi, di) += gi;
        for (std::size_t j = 0; j < keys.size(); ++j) {
          const BlockKey& kj = keys[j];
          if (kj.kind == BlockKind::Landmark) continue;
          const int oj = sys.offset.at(kj);
          sys.H.block(oi, oj, di, tangent_dim(kj.kind)) += jtwj(i, j);
        }
      }
    }
  }
  return a;
}

// Schur-reduces the landmarks with damping lambda applied to their blocks.
// Returns the reduced matrix and gradient; inv_out receives the damped
// landmark inverses for back substitution.
void reduce(const Assembly& a, double lambda, MatX& S, VecX& rhs_grad,
            std::map<long, Mat3>* inv_out) {
  S = a.sys.H;
  rhs_grad = a.sys.b;
  for (const auto& [id, lb] : a.landmarks) {
    Mat3 Hd = lb.Hll;
    for (int i = 0; i < 3; ++i) Hd(i, i) += lambda * std::max(lb.Hll(i, i), 1e-9) + 1e-12;
    const Mat3 inv = Hd.inverse();
    if (inv_out) (*inv_out)[id] = inv;
    for (const auto& [oa, Ba] : lb.Hlx) {
      const int da = static_cast<int>(Ba.cols());
      const MatX BaT_inv = Ba.transpose() * inv;
      rhs_grad.segment(oa, da) -= BaT_inv * lb.bl;
      for (const auto& [oc, Bc] : lb.Hlx) {
        S.block(oa, oc, da, Bc.cols()) -= BaT_inv * Bc;
      }
    }
  }
}

}  // namespace

double evaluate_cost(const Values& v, const std::vector<FactorPtr>& factors,
                     const SolverOptions& opts) {
  double cost = 0.0;
  for (const auto& f : factors) {
    VecX r;
    try {
      r = f->evaluate(v, nullptr);
    } catch (const Error& e) {
      if (e.category() == ErrorCategory::NegativeDepth) {
        return std::numeric_limits<double>::infinity();
      }
      throw;
    }
    const double s2 = r.dot(f->information() * r);
    double rho = s2;
    if (is_robust(*f, opts)) robust_weight(s2, opts.huber_threshold, rho);
    cost += 0.5 * rho + f->extra_cost(r);
  }
  return cost;
}

LinearSystem build_linear_system(const Values& v, const std::vector<FactorPtr>& factors,
                                 const SolverOptions& opts) {
  Assembly a = assemble(v, factors, opts);
  MatX S;
  VecX g;
  reduce(a, 0.0, S, g, nullptr);
  a.sys.H = 0.5 * (S + S.transpose());
  a.sys.b = g;
  return a.sys;
}

std::vector<int> active_indices(const LinearSystem& sys, const ActiveMask& mask) {
  std::vector<int> idx;
  for (const auto& k : sys.keys) {
    const int off = sys.offset.at(k);
    for (int d = 0; d < tangent_dim(k.kind); ++d) {
      if (mask.is_active(k.kind, d)) idx.push_back(off + d);
    }
  }
  return idx;
}

SolverSummary solve_problem(Values& v, const std::vector<FactorPtr>& factors,
                            const ActiveMask& mask, const SolverOptions& opts) {
  SolverSummary sum;
  Assembly a = assemble(v, factors, opts);
  double cost = a.sys.cost;
  sum.initial_cost = cost;
  double lambda = opts.lambda_init;
  int escalations = 0;
  const std::vector<int> act = active_indices(a.sys, mask);
  const int na = static_cast<int>(act.size());

  for (int it = 0; it < opts.max_iterations; ++it) {
    sum.iterations = it + 1;
    if (cost < 1e-24) {
      sum.converged = true;
      break;
    }
    MatX S;
    VecX g;
    std::map<long, Mat3> inv;
    reduce(a, lambda, S, g, &inv);
    MatX Sa(na, na);
    VecX ga(na);
    for (int i = 0; i < na; ++i) {
      ga[i] = g[act[i]];
      for (int j = 0; j < na; ++j) Sa(i, j) = S(act[i], act[j]);
    }
    VecX D = Sa.diagonal().cwiseMax(1e-9);
    for (int i = 0; i < na; ++i) Sa(i, i) += lambda * D[i];
    const MatX Ss = 0.5 * (Sa + Sa.transpose());
    VecX dxa;
    bool ok = false;
    Eigen::LLT<MatX> llt(Ss);
    if (llt.info() == Eigen::Success) {
      dxa = llt.solve(-ga);
      ok = true;
    } else {
      Eigen::LDLT<MatX> ldlt(Ss);
      dxa = ldlt.solve(-ga);
      ok = ldlt.info() == Eigen::Success;
    }
    ok = ok && dxa.allFinite();
    double predicted = 0.0;
    Values cand = v;
    if (ok) {
      predicted = 0.5 * dxa.dot(lambda * D.cwiseProduct(dxa) - ga);
      VecX dx = VecX::Zero(a.sys.dim);
      for (int i = 0; i < na; ++i) dx[act[i]] = dxa[i];
      for (const auto& k : a.sys.keys) {
        const int off = a.sys.offset.at(k);
        cand.retract(k, dx.segment(off, tangent_dim(k.kind)));
      }
      for (const auto& [id, lb] : a.landmarks) {
        Vec3 rhs = -lb.bl;
        for (const auto& [off, B] : lb.Hlx) rhs -= B * dx.segment(off, B.cols());
        const Vec3 dl = inv.at(id) * rhs;
        const Vec3 Dl = lb.Hll.diagonal().cwiseMax(1e-9);
        predicted += 0.5 * dl.dot(lambda * Dl.cwiseProduct(dl) - lb.bl);
        cand.retract(BlockKey{BlockKind::Landmark, id}, dl);
      }
    }
    const double new_cost = ok ? evaluate_cost(cand, factors, opts)
                               : std::numeric_limits<double>::infinity();
    if (new_cost < cost) {
      const double drop = cost - new_cost;
      const double rel = drop / std::max(cost, 1e-300);
      v = std::move(cand);
      cost = new_cost;
      lambda = std::max(lambda / 10.0, opts.lambda_min);
      escalations = 0;
      ++sum.accepted_steps;
      if (rel < opts.convergence_tol || drop < kNegligibleReduction) {
        sum.converged = true;
        break;
      }
      a = assemble(v, factors, opts);
      cost = a.sys.cost;
    } else {
      if (ok && predicted <= std::max(opts.convergence_tol * cost, kNegligibleReduction)) {
        sum.converged = true;
        break;
      }
      lambda = std::min(lambda * 10.0, opts.lambda_max);
      if (++escalations >= opts.max_escalations) {
        sum.diverged = true;
        break;
      }
    }
  }
  sum.final_cost = cost;
  return sum;
}

std::map<BlockKey, MatX> marginal_covariances(const Values& v,
                                              const std::vector<FactorPtr>& factors,
                                              const ActiveMask& mask, const SolverOptions& opts,
                                              const std::vector<BlockKey>& wanted) {
  const LinearSystem sys = build_linear_system(v, factors, opts);
  const std::vector<int> act = active_indices(sys, mask);
  const int na = static_cast<int>(act.size());
  MatX Sa(na, na);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) Sa(i, j) = sys.H(act[i], act[j]);
  std::vector<int> pos(static_cast<std::size_t>(sys.dim), -1);
  for (int i = 0; i < na; ++i) pos[static_cast<std::size_t>(act[i])] = i;

  std::map<BlockKey, MatX> out;
  Eigen::LDLT<MatX> ldlt(Sa);
  for (const auto& k : wanted) {
    const int d = tangent_dim(k.kind);
    MatX C = MatX::Zero(d, d);
    auto it = sys.offset.find(k);
    if (it != sys.offset.end()) {
      MatX E = MatX::Zero(na, d);
      for (int c = 0; c < d; ++c) {
        const int p = pos[static_cast<std::size_t>(it->second + c)];
        if (p >= 0) E(p, c) = 1.0;
      }
      const MatX X = ldlt.solve(E);
      C = E.transpose() * X;
    }
    out[k] = C;
  }
  return out;
}

}  // namespace skidsteer
