#include <gtest/gtest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "skidsteer/marginalize.hpp"

using namespace skidsteer;

namespace {

MatX random_psd(std::mt19937_64& rng, int n, int rank) {
  std::normal_distribution<double> nd;
  MatX A(rank, n);
  for (int i = 0; i < rank; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = nd(rng);
  return A.transpose() * A;
}

}  // namespace

TEST(Marginalize, ScalarHandCase) {
  MatX H(2, 2);
  H << 2, 1, 1, 2;
  VecX g(2);
  g << 1, 1;
  const MarginalizationResult r = marginalize(H, g, {1});
  ASSERT_EQ(r.information.rows(), 1);
  EXPECT_EQ(r.information(0, 0), 1.5);
  EXPECT_EQ(r.gradient[0], 0.5);
  EXPECT_EQ(r.kept_indices, std::vector<int>{0});
  EXPECT_FALSE(r.singular_block);
}

TEST(Marginalize, BlockHandCase) {
  MatX H(3, 3);
  H << 4, 1, 2, 1, 3, 0, 2, 0, 5;
  VecX g(3);
  g << 1, 2, 3;
  const MarginalizationResult r = marginalize(H, g, {1, 2});
  EXPECT_NEAR(r.information(0, 0), 43.0 / 15.0, 1e-15);
  EXPECT_NEAR(r.gradient[0], -13.0 / 15.0, 1e-15);
}

TEST(Marginalize, UncoupledBlocksUnchanged) {
  MatX H = MatX::Zero(4, 4);
  H << 3, 1, 0, 0, 1, 2, 0, 0, 0, 0, 5, 2, 0, 0, 2, 7;
  VecX g(4);
  g << 0.5, -1, 2, 3;
  const MarginalizationResult r = marginalize(H, g, {2, 3});
  EXPECT_EQ(r.information, H.topLeftCorner(2, 2));
  EXPECT_EQ(r.gradient, g.head(2));
}

TEST(Marginalize, InterleavedIndicesKeepOrder) {
  std::mt19937_64 rng(61);
  const MatX H = random_psd(rng, 5, 7);
  const VecX g = VecX::Random(5);
  const MarginalizationResult r = marginalize(H, g, {3, 0});
  EXPECT_EQ(r.kept_indices, (std::vector<int>{1, 2, 4}));
  // Same as eliminating after a permutation that moves the eliminated block last.
  const std::vector<int> order{1, 2, 4, 0, 3};
  MatX Hp(5, 5);
  VecX gp(5);
  for (int i = 0; i < 5; ++i) {
    gp[i] = g[order[i]];
    for (int j = 0; j < 5; ++j) Hp(i, j) = H(order[i], order[j]);
  }
  const MatX Hmm_inv = Hp.bottomRightCorner(2, 2).inverse();
  const MatX L = Hp.topLeftCorner(3, 3) - Hp.topRightCorner(3, 2) * Hmm_inv * Hp.bottomLeftCorner(2, 3);
  const VecX b = gp.head(3) - Hp.topRightCorner(3, 2) * Hmm_inv * gp.tail(2);
  EXPECT_LT((r.information - L).norm(), 1e-10 * L.norm());
  EXPECT_LT((r.gradient - b).norm(), 1e-10 * std::max(1.0, b.norm()));
}

TEST(Marginalize, SameMinimizerAsFullProblem) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    const MatX H = random_psd(rng, 8, 12);
    const VecX g = VecX::Random(8);
    const VecX x = -H.ldlt().solve(g);
    const MarginalizationResult r = marginalize(H, g, {5, 6, 7});
    const VecX xr = -r.information.ldlt().solve(r.gradient);
    EXPECT_LT((xr - x.head(5)).norm(), 1e-8 * std::max(1.0, x.norm()));
  }
}

TEST(Marginalize, NeverAddsInformation) {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 100; ++trial) {
    const MatX H = random_psd(rng, 9, 5 + trial % 8);
    const VecX g = VecX::Random(9);
    const MarginalizationResult r = marginalize(H, g, {0, 4, 8});
    MatX Hrr(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) Hrr(i, j) = H(r.kept_indices[i], r.kept_indices[j]);
    EXPECT_LT((r.information - r.information.transpose()).norm(), 1e-9);
    Eigen::SelfAdjointEigenSolver<MatX> psd(r.information);
    EXPECT_GE(psd.eigenvalues().minCoeff(), -1e-9 * std::max(1.0, H.norm()));
    Eigen::SelfAdjointEigenSolver<MatX> gap(Hrr - r.information);
    EXPECT_GE(gap.eigenvalues().minCoeff(), -1e-9 * std::max(1.0, H.norm()));
  }
}

TEST(Marginalize, SingularBlockReported) {
  MatX H = MatX::Zero(3, 3);
  H(0, 0) = 2.0;
  H(1, 1) = 1.0;
  VecX g = VecX::Ones(3);
  const MarginalizationResult r = marginalize(H, g, {2});
  EXPECT_TRUE(r.singular_block);
  EXPECT_EQ(r.min_eliminated_eigenvalue, 0.0);
  EXPECT_TRUE(r.information.allFinite());
}

TEST(Marginalize, NothingToEliminate) {
  MatX H(2, 2);
  H << 2, 1, 1, 2;
  const VecX g = VecX::Ones(2);
  const MarginalizationResult r = marginalize(H, g, {});
  EXPECT_EQ(r.information, H);
  EXPECT_EQ(r.gradient, g);
}
