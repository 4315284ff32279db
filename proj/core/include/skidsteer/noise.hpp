#pragma once

#include "skidsteer/geom.hpp"

namespace skidsteer {

inline constexpr double kNominalFocalPx = 460.0;

// White-noise stds are per sample. Random-walk stds are per sqrt(second).
struct NoiseConfig {
  double sigma_encoder = 0.0245;
  Vec5 sigma_xi_walk = Vec5::Constant(1e-3);
  double sigma_gyro = 9e-4;
  double sigma_accel = 1e-2;
  double sigma_gyro_bias_walk = 1e-2;
  double sigma_accel_bias_walk = 1e-2;
  double sigma_pixel = 0.6 / kNominalFocalPx;
  // Out-of-plane slack for the planar odometer model: roll/pitch rate
  // (rad/s) and vertical body speed (m/s), per encoder step.
  double sigma_planar_slack = 1e-2;

  void validate() const;
};

}  // namespace skidsteer
