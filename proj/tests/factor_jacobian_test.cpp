#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "skidsteer/factors.hpp"
#include "skidsteer/vision.hpp"
#include "test_support.hpp"

using namespace skidsteer;
using skidsteer::testing::factor_numeric_jacobians;
using skidsteer::testing::random_pose;
using skidsteer::testing::relative_error;

namespace {

constexpr int kPoints = 100;

void expect_jacobians(const Factor& f, const Values& v, double tol = 1e-5) {
  std::vector<MatX> J;
  const VecX r = f.evaluate(v, &J);
  ASSERT_EQ(J.size(), f.keys().size());
  ASSERT_EQ(r.size(), f.information().rows());
  const std::vector<MatX> N = factor_numeric_jacobians(f, v);
  for (std::size_t i = 0; i < J.size(); ++i) {
    ASSERT_EQ(J[i].rows(), N[i].rows());
    ASSERT_EQ(J[i].cols(), N[i].cols());
    EXPECT_LT(relative_error(J[i], N[i]), tol)
        << factor_kind_name(f.kind()) << " key " << i << "\n" << J[i] << "\n\n" << N[i];
  }
}

Vec5 random_xi(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec5 x;
  x << 0.05 + 0.1 * u(rng), 0.6 + 0.1 * u(rng), -0.6 + 0.1 * u(rng), 0.95 + 0.1 * u(rng),
      0.95 + 0.1 * u(rng);
  return x;
}

}  // namespace

TEST(FactorJacobians, Visual) {
  const SensorRig rig = SensorRig::default_rig();
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < kPoints; ++i) {
    Values v;
    v.poses[3] = random_pose(rng);
    v.lm[7] = camera_pose(v.poses[3], rig).transform(Vec3(u(rng), u(rng), 4.0 + 2.0 * u(rng)));
    VisualFactor f(3, 7, Vec2(0.01 * u(rng), 0.01 * u(rng)), rig, 0.6 / 460.0);
    expect_jacobians(f, v);
  }
}

TEST(FactorJacobians, Odometer) {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < kPoints; ++i) {
    std::vector<EncoderReading> enc;
    const double a = u(rng), b = u(rng);
    for (int k = 0; k <= 60; ++k) {
      const double t = 0.01 * k;
      enc.push_back({t, 1.0 + 0.5 * a * std::sin(3 * t), 1.0 + 0.5 * b * std::cos(2 * t)});
    }
    Values v;
    v.poses[0] = random_pose(rng);
    v.poses[1] = boxplus(v.poses[0], 0.3 * Vec6::Random());
    v.xi[0] = random_xi(rng);
    v.xi[1] = v.xi[0] + 0.01 * Vec5::Random();
    OdometerFactor f(0, 1, enc, 0.003, 0.55, MatX::Identity(11, 11));
    expect_jacobians(f, v);
  }
}

TEST(FactorJacobians, Imu) {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const SensorRig rig = SensorRig::default_rig();
  for (int i = 0; i < kPoints; ++i) {
    std::vector<ImuReading> m;
    const Vec3 w0(0.3 * u(rng), 0.3 * u(rng), u(rng));
    for (int k = 0; k <= 40; ++k) {
      const double t = 0.005 * k;
      m.push_back({t, w0 + 0.1 * Vec3(std::sin(t), 0, std::cos(t)),
                   Vec3(u(rng), u(rng), 9.8 + u(rng))});
    }
    Vec6 b0 = 0.01 * Vec6::Random();
    const ImuPreintegration pre = imu_preintegrate(m, b0, {});
    Values v;
    v.poses[0] = random_pose(rng);
    v.poses[1] = boxplus(v.poses[0], 0.3 * Vec6::Random());
    v.sb[0] = Vec9::Random();
    v.sb[1] = Vec9::Random();
    v.sb[0].tail<6>() = b0 + 0.01 * Vec6::Random();
    ImuFactor f(0, 1, pre, rig.gravity, rig.extrinsics_OI);
    expect_jacobians(f, v);
  }
}

TEST(FactorJacobians, Manifold) {
  std::mt19937_64 rng(54);
  for (int i = 0; i < kPoints; ++i) {
    Values v;
    v.poses[2] = random_pose(rng, 0.6);
    v.m[2] = 0.05 * Vec6::Random();
    v.m[1] = 0.05 * Vec6::Random();
    const Vec9 w = Vec9::Ones();
    expect_jacobians(ManifoldFactor(2, 2, 1, w), v);
    expect_jacobians(ManifoldFactor(2, 2, w), v);
  }
}

TEST(FactorJacobians, Prior) {
  std::mt19937_64 rng(55);
  for (int i = 0; i < kPoints; ++i) {
    Values lin;
    lin.poses[0] = random_pose(rng);
    lin.xi[0] = random_xi(rng);
    lin.sb[0] = Vec9::Random();
    lin.m[0] = Vec6::Random();
    const std::vector<BlockKey> keys{{BlockKind::Pose, 0},
                                     {BlockKind::Xi, 0},
                                     {BlockKind::SpeedBias, 0},
                                     {BlockKind::Manifold, 0}};
    Values v = lin;
    v.poses[0] = boxplus(lin.poses[0], 0.4 * Vec6::Random());
    v.xi[0] += 0.1 * Vec5::Random();
    PriorFactor f(keys, lin, MatX::Identity(26, 26), VecX::Zero(26));
    expect_jacobians(f, v);
  }
}
