#pragma once

#include <span>
#include <vector>

#include "skidsteer/geom.hpp"
#include "skidsteer/noise.hpp"

namespace skidsteer {

using Mat15 = Eigen::Matrix<double, 15, 15>;
using Vec15 = Eigen::Matrix<double, 15, 1>;

struct ImuReading {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

// Deltas are expressed in the IMU frame at the first sample. Error order of
// the covariance: [dtheta, dp, dv, db_a, db_w]. The bias vector is
// [b_a; b_w].
struct ImuPreintegration {
  Quat delta_rotation = Quat::Identity();
  Vec3 delta_velocity = Vec3::Zero();
  Vec3 delta_position = Vec3::Zero();
  Vec6 bias_linearization_point = Vec6::Zero();
  Mat15 covariance = Mat15::Zero();
  double duration = 0.0;
  Mat3 dR_dbg = Mat3::Zero();
  Mat3 dv_dba = Mat3::Zero();
  Mat3 dv_dbg = Mat3::Zero();
  Mat3 dp_dba = Mat3::Zero();
  Mat3 dp_dbg = Mat3::Zero();
};

ImuPreintegration imu_preintegrate(std::span<const ImuReading> measurements, const Vec6& bias,
                                   const NoiseConfig& noise);

// Same, over [t0, t1] with readings linearly interpolated at both ends.
ImuPreintegration imu_preintegrate(std::span<const ImuReading> measurements, double t0,
                                   double t1, const Vec6& bias, const NoiseConfig& noise);

// speed_bias = [v_G (IMU velocity in the global frame); b_a; b_w].
// extrinsics_OI is the IMU pose in the odometer frame.
struct ImuResidualJacobians {
  Eigen::Matrix<double, 15, 6> d_pose_km1;
  Eigen::Matrix<double, 15, 6> d_pose_k;
  Eigen::Matrix<double, 15, 9> d_sb_km1;
  Eigen::Matrix<double, 15, 9> d_sb_k;
};

Vec15 imu_factor_residual(const Pose& pose_k, const Pose& pose_km1, const Vec9& speed_bias_k,
                          const Vec9& speed_bias_km1, const ImuPreintegration& preint,
                          const Vec3& gravity, const Pose& extrinsics_OI,
                          ImuResidualJacobians* jac = nullptr);

}  // namespace skidsteer
