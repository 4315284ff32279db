#pragma once

#include <vector>

#include "skidsteer/geom.hpp"

namespace skidsteer {

// Parameter order everywhere: [X_v, Y_l, Y_r, alpha_l, alpha_r].
struct KinematicParams {
  double X_v = 0.0;
  double Y_l = 0.5;
  double Y_r = -0.5;
  double alpha_l = 1.0;
  double alpha_r = 1.0;

  double delta_y() const { return Y_l - Y_r; }
  Vec5 vec() const;
  static KinematicParams from_vec(const Vec5& v);
};

struct EncoderReading {
  double t = 0.0;
  double o_l = 0.0;
  double o_r = 0.0;
};

struct BodyVelocity {
  double v_x = 0.0;
  double v_y = 0.0;
  double omega_z = 0.0;
};

struct WheelSpeeds {
  double o_l = 0.0;
  double o_r = 0.0;
};

inline constexpr double kMinDeltaY = 1e-6;

void check_params(const KinematicParams& xi);

BodyVelocity forward_kinematics(const KinematicParams& xi, double o_l, double o_r);
WheelSpeeds inverse_kinematics(const KinematicParams& xi, double v_x, double omega_z);

// J_vxi and J_wxi differentiate the planar velocity with respect to the
// parameters. J_vo and J_wo differentiate with respect to the encoder noise,
// where true speed = measured speed - noise, so they carry the opposite sign
// of d(velocity)/d(speed). Rows are (v_x, v_y, 0) for the linear blocks and
// (0, 0, omega_z) for the angular blocks.
struct KinematicJacobians {
  Eigen::Matrix<double, 3, 5> J_vxi;
  Eigen::Matrix<double, 3, 2> J_vo;
  Eigen::Matrix<double, 3, 5> J_wxi;
  Eigen::Matrix<double, 3, 2> J_wo;
};

KinematicJacobians jacobians(const KinematicParams& xi, double o_l, double o_r);

KinematicParams ideal_params(double track_width);

struct TrackWidthOptions {
  double min_yaw_rate = 0.05;
  std::size_t min_samples = 10;
};

double initialize_track_width(const std::vector<EncoderReading>& encoders,
                              const std::vector<double>& gyro_yaw,
                              const TrackWidthOptions& opts = {});

}  // namespace skidsteer
