#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "skidsteer/errors.hpp"
#include "skidsteer/imu.hpp"
#include "skidsteer/odometry.hpp"
#include "skidsteer/simulate.hpp"
#include "test_support.hpp"

using namespace skidsteer;
using skidsteer::testing::numeric_jacobian;
using skidsteer::testing::random_pose;
using skidsteer::testing::relative_error;

namespace {

std::vector<EncoderReading> constant_encoders(double o_l, double o_r, double t_end,
                                              double rate = 100.0) {
  std::vector<EncoderReading> out;
  const int n = static_cast<int>(std::lround(t_end * rate));
  for (int i = 0; i <= n; ++i) out.push_back({i / rate, o_l, o_r});
  return out;
}

std::vector<EncoderReading> wavy_encoders(double t_end, double rate = 100.0) {
  std::vector<EncoderReading> out;
  const int n = static_cast<int>(std::lround(t_end * rate));
  for (int i = 0; i <= n; ++i) {
    const double t = i / rate;
    out.push_back({t, 0.8 + 0.3 * std::sin(1.3 * t), 1.1 + 0.4 * std::cos(0.7 * t)});
  }
  return out;
}

Vec11 state_minus(const OdometryState& a, const OdometryState& b) {
  Vec11 d;
  d.head<6>() = boxminus(a.pose, b.pose);
  d.tail<5>() = a.xi.vec() - b.xi.vec();
  return d;
}

OdometryState state_plus(const OdometryState& s, const VecX& d) {
  return OdometryState{boxplus(s.pose, Vec6(d.head<6>())),
                       KinematicParams::from_vec(s.xi.vec() + d.tail<5>())};
}

std::vector<ImuReading> constant_imu(const Vec3& gyro, const Vec3& accel, double t_end,
                                     double rate = 200.0) {
  std::vector<ImuReading> out;
  const int n = static_cast<int>(std::lround(t_end * rate));
  for (int i = 0; i <= n; ++i) out.push_back({i / rate, gyro, accel});
  return out;
}

}  // namespace

TEST(PropagateOdometry, StraightLine) {
  const auto enc = constant_encoders(1.0, 1.0, 2.0);
  const PropagationResult r =
      propagate_odometry(OdometryState{Pose::Identity(), ideal_params(0.6)}, enc, 0.0, 2.0, {});
  EXPECT_LT((r.predicted.pose.p - Vec3(2, 0, 0)).norm(), 1e-9);
  EXPECT_LT(rotation_angle(r.predicted.pose.q), 1e-12);
}

TEST(PropagateOdometry, PureSpin) {
  const double b = 0.6;
  const auto enc = constant_encoders(-b * std::numbers::pi / 4, b * std::numbers::pi / 4, 2.0);
  const PropagationResult r =
      propagate_odometry(OdometryState{Pose::Identity(), ideal_params(b)}, enc, 0.0, 2.0, {});
  const double yaw = Eigen::AngleAxisd(r.predicted.pose.q).angle();
  EXPECT_NEAR(yaw, std::numbers::pi, 1e-9);
  EXPECT_LT(r.predicted.pose.p.norm(), 1e-9);
}

TEST(PropagateOdometry, EmptyIntervalIsIdentity) {
  const OdometryState s{Pose::Identity(), ideal_params(0.5)};
  const PropagationResult r = propagate_odometry(s, constant_encoders(1, 1, 1), 0.5, 0.5, {});
  EXPECT_TRUE(r.jacobian_wrt_prev.isIdentity(0.0));
  EXPECT_EQ(r.predicted.pose.p, s.pose.p);
}

TEST(PropagateOdometry, GapThrows) {
  std::vector<EncoderReading> enc{{0.0, 1, 1}, {0.1, 1, 1}, {0.8, 1, 1}, {0.9, 1, 1}};
  try {
    propagate_odometry(OdometryState{Pose::Identity(), ideal_params(0.5)}, enc, 0.0, 0.9, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::MeasurementGap);
  }
}

TEST(PropagateOdometry, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  const auto enc = wavy_encoders(3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const OdometryState s0{random_pose(rng), KinematicParams{0.05, 0.62, -0.58, 0.92, 0.95}};
    const PropagationResult r = propagate_odometry(s0, enc, 0.0, 2.5, {});
    const MatX N = numeric_jacobian(
        [&](const VecX& d) -> VecX {
          const PropagationResult p = propagate_odometry(state_plus(s0, d), enc, 0.0, 2.5, {});
          return state_minus(p.predicted, r.predicted);
        },
        11);
    EXPECT_LT(relative_error(r.jacobian_wrt_prev, N), 1e-4);
    EXPECT_TRUE((r.jacobian_wrt_prev.bottomRightCorner<5, 5>().isIdentity(0.0)));
    EXPECT_TRUE((r.jacobian_wrt_prev.bottomLeftCorner<5, 6>().isZero(0.0)));
  }
}

TEST(PropagateOdometry, ClosedFormJacobianMatchesChained) {
  std::mt19937_64 rng(32);
  const auto enc = wavy_encoders(3.0);
  const OdometryState s0{random_pose(rng), KinematicParams{0.05, 0.62, -0.58, 0.92, 0.95}};
  PropagationOptions no_cov;
  no_cov.with_covariance = false;
  const PropagationResult a = propagate_odometry(s0, enc, 0.0, 2.5, {});
  const PropagationResult b = propagate_odometry(s0, enc, 0.0, 2.5, {}, no_cov);
  EXPECT_LT((a.jacobian_wrt_prev - b.jacobian_wrt_prev).norm(), 1e-9);
}

TEST(PropagateOdometry, InformationSymmetricPsd) {
  const OdometryState s0{Pose::Identity(), KinematicParams{0.05, 0.62, -0.58, 0.92, 0.95}};
  const PropagationResult r = propagate_odometry(s0, wavy_encoders(2.0), 0.0, 1.7, {});
  EXPECT_LT((r.noise_information - r.noise_information.transpose()).norm(), 1e-10);
  Eigen::SelfAdjointEigenSolver<Mat11> es(r.noise_information);
  EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
}

TEST(PropagateOdometry, NearZeroNoiseStaysFinite) {
  NoiseConfig tiny;
  tiny.sigma_encoder = 1e-30;
  tiny.sigma_xi_walk.setConstant(1e-30);
  tiny.sigma_planar_slack = 1e-30;
  const OdometryState s0{Pose::Identity(), ideal_params(0.5)};
  const PropagationResult r = propagate_odometry(s0, wavy_encoders(2.0), 0.0, 1.0, tiny);
  EXPECT_TRUE(r.noise_information.allFinite());
  Eigen::SelfAdjointEigenSolver<Mat11> es(r.noise_information);
  EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 / kInformationFloor * (1 + 1e-9));
}

TEST(PropagateOdometry, MarkovComposition) {
  const auto enc = wavy_encoders(3.0);
  const OdometryState s0{Pose{Quat(Eigen::AngleAxisd(0.4, Vec3::UnitZ())), Vec3(1, 2, 0)},
                         KinematicParams{0.05, 0.62, -0.58, 0.92, 0.95}};
  const PropagationResult whole = propagate_odometry(s0, enc, 0.0, 2.0, {});
  const PropagationResult a = propagate_odometry(s0, enc, 0.0, 1.2, {});
  const PropagationResult b = propagate_odometry(a.predicted, enc, 1.2, 2.0, {});
  EXPECT_LT((whole.predicted.pose.p - b.predicted.pose.p).norm(), 1e-9);
  EXPECT_LT(rotation_angle(whole.predicted.pose.q.conjugate() * b.predicted.pose.q), 1e-9);
  const Mat11 P = b.jacobian_wrt_prev * a.covariance * b.jacobian_wrt_prev.transpose() + b.covariance;
  EXPECT_LT((P - whole.covariance).norm() / whole.covariance.norm(), 1e-6);
  const Mat11 L = floored_inverse(P, kInformationFloor);
  EXPECT_LT((L - whole.noise_information).norm() / whole.noise_information.norm(), 1e-6);
}

// The midpoint rule on sampled encoder speeds is second order in the sample
// period; 1 kHz keeps the closure below 1e-6 m per 100 m.
TEST(PropagateOdometry, RecoversSimulatedTrajectory) {
  MotionProfile profile = general_motion_profile(100.0);
  profile.manifold = ManifoldParams{};
  const KinematicParams xi{0.05, 0.62, -0.58, 0.92, 0.95};
  const Trajectory traj = generate_trajectory(profile, xi, 0.001);
  NoiseConfig zero;
  zero.sigma_encoder = 0.0;
  const auto enc = synthesize_encoders(traj, xi, zero, 1000.0, 1);
  PropagationOptions opts;
  opts.with_covariance = false;
  const double t_end = enc.back().t;
  const PropagationResult r =
      propagate_odometry(OdometryState{traj.front().pose, xi}, enc, enc.front().t, t_end, zero, opts);
  const Pose& gt = sample_at(traj, t_end).pose;
  const double len = path_length(traj);
  ASSERT_GT(len, 90.0);
  EXPECT_LT((r.predicted.pose.p - gt.p).norm(), 1e-6 * len / 100.0);
}

TEST(OdometryResidual, ZeroAtPrediction) {
  const OdometryState s0{Pose::Identity(), ideal_params(0.5)};
  const PropagationResult r = propagate_odometry(s0, wavy_encoders(2.0), 0.0, 1.5, {});
  EXPECT_TRUE(odometry_factor_residual(r.predicted, s0, r).isZero(1e-14));
}

TEST(OdometryResidual, PositionOffset) {
  const OdometryState s0{Pose::Identity(), ideal_params(0.5)};
  const PropagationResult r = propagate_odometry(s0, wavy_encoders(2.0), 0.0, 1.5, {});
  OdometryState k = r.predicted;
  k.pose.p.x() += 1e-3;
  const Vec11 res = odometry_factor_residual(k, s0, r);
  EXPECT_NEAR(res[3], 1e-3, 1e-15);
  EXPECT_NEAR(res.norm(), 1e-3, 1e-15);
}

TEST(OdometryResidual, RetractionConsistency) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n(0.0, 1e-3);
  const OdometryState s0{Pose::Identity(), ideal_params(0.5)};
  const PropagationResult r = propagate_odometry(s0, wavy_encoders(2.0), 0.0, 1.5, {});
  for (int i = 0; i < 100; ++i) {
    VecX d(11);
    for (int k = 0; k < 11; ++k) d[k] = n(rng);
    const Vec11 res = odometry_factor_residual(state_plus(r.predicted, d), s0, r);
    EXPECT_LE((res - d).norm(), d.squaredNorm());
  }
}

TEST(ArcStep, DerivativeAndSmallAngleBranch) {
  for (double phi : {-1.0, -1e-3, -5e-5, 0.0, 3e-5, 2e-4, 9e-3, 1.1e-2, 0.5, 2.0}) {
    const double h = 1e-6;
    const Mat3 num = (arc_step(phi + h).V - arc_step(phi - h).V) / (2 * h);
    EXPECT_LT((num - arc_step(phi).dV).norm(), 1e-8) << phi;
  }
  for (double phi : {0.999999e-2, 1.000001e-2, 3e-3}) {
    const long double p = phi;
    const long double s = std::sin(p) / p, c1 = (1.0L - std::cos(p)) / p;
    const long double ds = (p * std::cos(p) - std::sin(p)) / (p * p);
    const long double dc1 = (p * std::sin(p) - (1.0L - std::cos(p))) / (p * p);
    const ArcStep a = arc_step(phi);
    EXPECT_NEAR(a.V(0, 0), static_cast<double>(s), 1e-13);
    EXPECT_NEAR(a.V(1, 0), static_cast<double>(c1), 1e-13);
    EXPECT_NEAR(a.dV(0, 0), static_cast<double>(ds), 1e-12);
    EXPECT_NEAR(a.dV(1, 0), static_cast<double>(dc1), 1e-12);
  }
}

TEST(ImuPreintegration, ZeroMotion) {
  const auto m = constant_imu(Vec3::Zero(), Vec3::Zero(), 1.0);
  const ImuPreintegration p = imu_preintegrate(m, Vec6::Zero(), {});
  EXPECT_LT(rotation_angle(p.delta_rotation), 1e-15);
  EXPECT_TRUE(p.delta_velocity.isZero(0.0));
  EXPECT_TRUE(p.delta_position.isZero(0.0));
  EXPECT_DOUBLE_EQ(p.duration, 1.0);
}

TEST(ImuPreintegration, ConstantYawRate) {
  const auto m = constant_imu(Vec3(0, 0, 1), Vec3::Zero(), 1.0);
  const ImuPreintegration p = imu_preintegrate(m, Vec6::Zero(), {});
  const Quat expect(Eigen::AngleAxisd(1.0, Vec3::UnitZ()));
  EXPECT_LT(rotation_angle(expect.conjugate() * p.delta_rotation), 1e-8);
}

TEST(ImuPreintegration, CovarianceGrows) {
  const auto m = constant_imu(Vec3(0.1, -0.2, 0.3), Vec3(0.5, 0.1, 9.8), 2.0);
  const ImuPreintegration a = imu_preintegrate(m, 0.0, 1.0, Vec6::Zero(), {});
  const ImuPreintegration b = imu_preintegrate(m, 0.0, 2.0, Vec6::Zero(), {});
  EXPECT_GT(b.covariance.trace(), a.covariance.trace());
  EXPECT_LT((b.covariance - b.covariance.transpose()).norm(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Mat15> es(b.covariance);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-18);
}

TEST(ImuPreintegration, TooFewSamples) {
  const std::vector<ImuReading> one{{0.0, Vec3::Zero(), Vec3::Zero()}};
  try {
    imu_preintegrate(one, Vec6::Zero(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::TooFewSamples);
  }
  const ImuPreintegration z = imu_preintegrate(constant_imu(Vec3::Zero(), Vec3::Zero(), 1.0), 0.5,
                                               0.5, Vec6::Zero(), {});
  EXPECT_TRUE(z.covariance.isZero(0.0));
  EXPECT_EQ(z.duration, 0.0);
}

TEST(ImuPreintegration, GyroBiasFirstOrder) {
  const auto m = constant_imu(Vec3(0.2, -0.1, 0.6), Vec3(0.3, 0.2, 9.81), 1.0);
  const Vec6 b0 = Vec6::Zero();
  const ImuPreintegration p = imu_preintegrate(m, b0, {});
  for (double s : {1e-3, 1e-2}) {
    const Vec3 dbg = s * Vec3(0.3, -0.5, 0.8);
    Vec6 b1 = b0;
    b1.tail<3>() = dbg;
    const ImuPreintegration q = imu_preintegrate(m, b1, {});
    const Vec3 actual = so3_log(p.delta_rotation.conjugate() * q.delta_rotation);
    EXPECT_LT((actual - p.dR_dbg * dbg).norm(), 10.0 * dbg.squaredNorm());
  }
}

TEST(ImuResidual, ZeroOnConsistentStates) {
  const Vec3 gyro(0.05, -0.02, 0.3), f(0.2, 0.1, 9.9);
  const auto m = constant_imu(gyro, f, 1.0, 1000.0);
  const ImuPreintegration p = imu_preintegrate(m, Vec6::Zero(), {});
  const Vec3 g(0, 0, -9.81);
  const Pose a{Quat(Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized())), Vec3(1, 2, 3)};
  const Vec3 va(0.5, -0.2, 0.1);
  const Pose b{a.q * p.delta_rotation,
               a.p + va * p.duration + 0.5 * g * p.duration * p.duration + a.q * p.delta_position};
  Vec9 sa = Vec9::Zero(), sb = Vec9::Zero();
  sa.head<3>() = va;
  sb.head<3>() = va + g * p.duration + a.q * p.delta_velocity;
  EXPECT_LT(imu_factor_residual(b, a, sb, sa, p, g, Pose::Identity()).norm(), 1e-12);
}

TEST(ImuResidual, FreeFall) {
  const auto m = constant_imu(Vec3::Zero(), Vec3::Zero(), 1.0);
  const ImuPreintegration p = imu_preintegrate(m, Vec6::Zero(), {});
  const Vec3 g(0, 0, -9.81);
  const Pose a{Quat::Identity(), Vec3(0, 0, 10)};
  const Pose b{Quat::Identity(), a.p + 0.5 * g};
  Vec9 sa = Vec9::Zero(), sb = Vec9::Zero();
  sb.head<3>() = g;
  const Vec15 r = imu_factor_residual(b, a, sb, sa, p, g, Pose::Identity());
  EXPECT_LT(r.segment<3>(6).norm(), 1e-12);
  EXPECT_LT(r.norm(), 1e-12);
}
