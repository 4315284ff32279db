#include "skidsteer/marginalize.hpp"

#include <algorithm>

#include <Eigen/Eigenvalues>

#include "skidsteer/errors.hpp"

namespace skidsteer {

MarginalizationResult marginalize(const MatX& H, const VecX& g, const std::vector<int>& marg,
                                  double floor) {
  const int n = static_cast<int>(H.rows());
  if (H.cols() != n || g.size() != n) {
    throw Error(ErrorCategory::InvalidArgument, "hessian and gradient sizes disagree");
  }
  std::vector<char> is_marg(static_cast<std::size_t>(n), 0);
  for (int i : marg) {
    if (i < 0 || i >= n) throw Error(ErrorCategory::InvalidArgument, "marginal index out of range");
    is_marg[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<int> m_idx, r_idx;
  for (int i = 0; i < n; ++i) (is_marg[static_cast<std::size_t>(i)] ? m_idx : r_idx).push_back(i);
  const int nm = static_cast<int>(m_idx.size());
  const int nr = static_cast<int>(r_idx.size());

  MarginalizationResult res;
  res.kept_indices = r_idx;
  MatX Hmm(nm, nm), Hrm(nr, nm), Hrr(nr, nr);
  VecX gm(nm), gr(nr);
  for (int i = 0; i < nm; ++i) {
    gm[i] = g[m_idx[i]];
    for (int j = 0; j < nm; ++j) Hmm(i, j) = H(m_idx[i], m_idx[j]);
  }
  for (int i = 0; i < nr; ++i) {
    gr[i] = g[r_idx[i]];
    for (int j = 0; j < nm; ++j) Hrm(i, j) = H(r_idx[i], m_idx[j]);
    for (int j = 0; j < nr; ++j) Hrr(i, j) = H(r_idx[i], r_idx[j]);
  }
  if (nm == 0) {
    res.information = Hrr;
    res.gradient = gr;
    return res;
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (Hmm + Hmm.transpose()));
  res.min_eliminated_eigenvalue = es.eigenvalues().minCoeff();
  res.singular_block = res.min_eliminated_eigenvalue < floor;
  const VecX inv = es.eigenvalues().cwiseMax(floor).cwiseInverse();
  const MatX Hmm_inv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  const MatX K = Hrm * Hmm_inv;
  MatX L = Hrr - K * Hrm.transpose();
  res.information = 0.5 * (L + L.transpose());
  res.gradient = gr - K * gm;
  return res;
}

}  // namespace skidsteer
