#pragma once

#include <string>
#include <vector>

#include "skidsteer/geom.hpp"
#include "skidsteer/simulate.hpp"

namespace skidsteer {

inline constexpr double kMinResidualDepth = 0.01;

// Camera pose in the global frame for an odometer pose.
Pose camera_pose(const Pose& odom, const SensorRig& rig);

// z - pi(p_C) in normalized image coordinates. Throws NegativeDepth when the
// point is closer than 1 cm in front of the camera.
struct VisualJacobians {
  Eigen::Matrix<double, 2, 6> d_pose;  // odometer pose [dtheta, dp]
  Eigen::Matrix<double, 2, 3> d_landmark;
};

Vec2 visual_residual(const Pose& odom_pose, const Vec3& landmark, const Vec2& uv,
                     const SensorRig& rig, VisualJacobians* jac = nullptr);

inline Vec2 visual_residual(const Pose& odom_pose, const Landmark& lm,
                            const FeatureObservation& obs, const SensorRig& rig) {
  return visual_residual(odom_pose, lm.position, obs.uv, rig);
}

struct TriangulationOptions {
  double min_depth = 0.1;
  double min_baseline = 0.05;
  double sigma_pixel = 0.6 / 460.0;
  double max_rms_sigmas = 3.0;
  int gauss_newton_iterations = 10;
  // Largest angle between viewing rays, rad. Zero disables the check.
  double min_parallax = 0.0;
};

struct TriangulationResult {
  bool ok = false;
  Vec3 position = Vec3::Zero();
  double rms = 0.0;
  std::string failure;
};

// One normalized observation per odometer pose.
TriangulationResult triangulate(const std::vector<Vec2>& uvs, const std::vector<Pose>& odom_poses,
                                const SensorRig& rig, const TriangulationOptions& opts = {});

}  // namespace skidsteer
