#include "skidsteer/kinematics.hpp"

#include <cmath>
#include <string>

#include "skidsteer/errors.hpp"

namespace skidsteer {

Vec5 KinematicParams::vec() const {
  Vec5 v;
  v << X_v, Y_l, Y_r, alpha_l, alpha_r;
  return v;
}

KinematicParams KinematicParams::from_vec(const Vec5& v) {
  return KinematicParams{v[0], v[1], v[2], v[3], v[4]};
}

void check_params(const KinematicParams& xi) {
  if (!(std::abs(xi.delta_y()) > kMinDeltaY)) {
    throw Error(ErrorCategory::DegenerateParams,
                "|Y_l - Y_r| = " + std::to_string(std::abs(xi.delta_y())) +
                    " is below the 1e-6 m floor");
  }
}

BodyVelocity forward_kinematics(const KinematicParams& xi, double o_l, double o_r) {
  check_params(xi);
  const double dy = xi.delta_y();
  const double a = xi.alpha_l * o_l;
  const double b = xi.alpha_r * o_r;
  BodyVelocity out;
  out.v_x = (-xi.Y_r * a + xi.Y_l * b) / dy;
  out.omega_z = (b - a) / dy;
  out.v_y = -xi.X_v * out.omega_z;
  return out;
}

WheelSpeeds inverse_kinematics(const KinematicParams& xi, double v_x, double omega_z) {
  check_params(xi);
  if (!(xi.alpha_l > 0.0) || !(xi.alpha_r > 0.0)) {
    throw Error(ErrorCategory::DegenerateParams, "correction factors must be positive");
  }
  return WheelSpeeds{(v_x - xi.Y_l * omega_z) / xi.alpha_l,
                     (v_x - xi.Y_r * omega_z) / xi.alpha_r};
}

KinematicJacobians jacobians(const KinematicParams& xi, double o_l, double o_r) {
  check_params(xi);
  const double dy = xi.delta_y();
  const double dy2 = dy * dy;
  const double a = xi.alpha_l * o_l;
  const double b = xi.alpha_r * o_r;
  const double d = a - b;

  KinematicJacobians J;
  J.J_vxi.setZero();
  J.J_vxi(0, 1) = d * xi.Y_r / dy2;
  J.J_vxi(0, 2) = -d * xi.Y_l / dy2;
  J.J_vxi(0, 3) = -xi.Y_r * o_l / dy;
  J.J_vxi(0, 4) = xi.Y_l * o_r / dy;
  J.J_vxi(1, 0) = d / dy;
  J.J_vxi(1, 1) = -d * xi.X_v / dy2;
  J.J_vxi(1, 2) = d * xi.X_v / dy2;
  J.J_vxi(1, 3) = xi.X_v * o_l / dy;
  J.J_vxi(1, 4) = -xi.X_v * o_r / dy;

  J.J_vo.setZero();
  J.J_vo(0, 0) = xi.alpha_l * xi.Y_r / dy;
  J.J_vo(0, 1) = -xi.alpha_r * xi.Y_l / dy;
  J.J_vo(1, 0) = -xi.X_v * xi.alpha_l / dy;
  J.J_vo(1, 1) = xi.X_v * xi.alpha_r / dy;

  J.J_wxi.setZero();
  J.J_wxi(2, 1) = d / dy2;
  J.J_wxi(2, 2) = -d / dy2;
  J.J_wxi(2, 3) = -o_l / dy;
  J.J_wxi(2, 4) = o_r / dy;

  J.J_wo.setZero();
  J.J_wo(2, 0) = xi.alpha_l / dy;
  J.J_wo(2, 1) = -xi.alpha_r / dy;
  return J;
}

KinematicParams ideal_params(double b) {
  if (!(b > 0.0)) throw Error(ErrorCategory::InvalidArgument, "track width must be positive");
  return KinematicParams{0.0, 0.5 * b, -0.5 * b, 1.0, 1.0};
}

double initialize_track_width(const std::vector<EncoderReading>& encoders,
                              const std::vector<double>& gyro_yaw,
                              const TrackWidthOptions& opts) {
  if (encoders.size() != gyro_yaw.size()) {
    throw Error(ErrorCategory::InvalidArgument, "encoder and gyro sequences differ in length");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < encoders.size(); ++i) {
    const double w = std::abs(gyro_yaw[i]);
    if (w <= opts.min_yaw_rate) continue;
    sum += std::abs(encoders[i].o_l - encoders[i].o_r) / w;
    ++n;
  }
  if (n < opts.min_samples || n == 0) {
    throw Error(ErrorCategory::InsufficientExcitation,
                std::to_string(n) + " samples above the yaw-rate threshold, need " +
                    std::to_string(opts.min_samples));
  }
  return sum / static_cast<double>(n);
}

}  // namespace skidsteer
