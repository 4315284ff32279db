#pragma once

#include <span>
#include <vector>

#include "skidsteer/geom.hpp"
#include "skidsteer/kinematics.hpp"
#include "skidsteer/noise.hpp"

namespace skidsteer {

using Mat11 = Eigen::Matrix<double, 11, 11>;
using Vec11 = Eigen::Matrix<double, 11, 1>;
using Mat35 = Eigen::Matrix<double, 3, 5>;

inline constexpr double kMaxEncoderGap = 0.5;
inline constexpr double kInformationFloor = 1e-12;

struct OdometryState {
  Pose pose;
  KinematicParams xi;
};

// Error-state order: dtheta[3], dp[3], dxi[5].
struct PropagationResult {
  OdometryState predicted;
  Mat11 jacobian_wrt_prev = Mat11::Identity();
  Mat11 noise_information = Mat11::Zero();
  Mat11 covariance = Mat11::Zero();
  // Motion relative to the start pose and its parameter sensitivity.
  Quat delta_q = Quat::Identity();
  Vec3 delta_p = Vec3::Zero();
  Mat35 dtheta_dxi = Mat35::Zero();
  Mat35 dp_dxi = Mat35::Zero();
  KinematicParams xi_lin;
  double duration = 0.0;
};

struct PropagationOptions {
  bool with_covariance = true;
  // Entries set to false get no random-walk noise (frozen parameters).
  Eigen::Matrix<bool, 5, 1> xi_walk_mask = Eigen::Matrix<bool, 5, 1>::Constant(true);
};

// Midpoint integration of encoder speeds, linearly interpolated at both
// interval ends. Samples must bracket [t_start, t_end].
PropagationResult propagate_odometry(const OdometryState& prev,
                                     std::span<const EncoderReading> measurements,
                                     double t_start, double t_end, const NoiseConfig& noise,
                                     const PropagationOptions& opts = {});

// Residual x_k [-] f(x_{k-1}) using the increment stored in prop, corrected to
// first order when x_{k-1}.xi differs from the propagation point.
Vec11 odometry_factor_residual(const OdometryState& state_k, const OdometryState& state_km1,
                               const PropagationResult& prop);

// Integral of exp(s * phi * [e3]x) over s in [0, 1], and its derivative in
// phi. Advancing by V(omega dt) v dt is the exact displacement under constant
// planar body velocity v and yaw rate omega.
struct ArcStep {
  Mat3 V;
  Mat3 dV;
};
ArcStep arc_step(double phi);

// Inverse of a covariance after clamping its eigenvalues from below.
MatX floored_inverse(const MatX& cov, double floor);

}  // namespace skidsteer
