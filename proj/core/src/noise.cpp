#include "skidsteer/noise.hpp"

#include "skidsteer/errors.hpp"

namespace skidsteer {

void NoiseConfig::validate() const {
  const bool ok = sigma_encoder >= 0.0 && (sigma_xi_walk.array() >= 0.0).all() &&
                  sigma_gyro >= 0.0 && sigma_accel >= 0.0 && sigma_gyro_bias_walk >= 0.0 &&
                  sigma_accel_bias_walk >= 0.0 && sigma_pixel >= 0.0 &&
                  sigma_planar_slack >= 0.0;
  if (!ok) throw Error(ErrorCategory::InvalidArgument, "noise stds must be non-negative");
}

}  // namespace skidsteer
