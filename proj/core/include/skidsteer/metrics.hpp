#pragma once

#include <vector>

#include "skidsteer/log_io.hpp"

namespace skidsteer {

inline const std::vector<double> kRpeLengthsShort{9.0, 18.0, 27.0, 36.0, 45.0};
inline const std::vector<double> kRpeLengthsLong{15.0, 30.0, 45.0, 60.0, 75.0};

// Linear position and spherical-linear rotation between the bracketing
// samples. Times outside the sample range throw InvalidArgument.
Pose interpolate_pose(const std::vector<StampedPose>& track, double t);

// Ground truth sampled at the estimate timestamps.
std::vector<StampedPose> matched_ground_truth(const std::vector<StampedPose>& est,
                                              const std::vector<StampedPose>& gt);

// Moves the estimate rigidly so its first pose coincides with the matching
// ground-truth pose.
std::vector<StampedPose> align_first_pose(const std::vector<StampedPose>& est,
                                          const std::vector<StampedPose>& gt);

struct AteResult {
  double translation_rmse = 0.0;
  double rotation_rmse = 0.0;  // rad
  std::size_t count = 0;
};
AteResult absolute_trajectory_error(const std::vector<StampedPose>& est,
                                    const std::vector<StampedPose>& gt);

struct DriftResult {
  Vec3 xyz = Vec3::Zero();
  double norm = 0.0;
};
DriftResult final_drift(const std::vector<StampedPose>& est, const std::vector<StampedPose>& gt);

struct RpeEntry {
  double length = 0.0;
  double mean_translation = 0.0;
  double mean_rotation = 0.0;  // rad
  std::size_t count = 0;
};
// Segments start at every estimate and end at the first later estimate whose
// ground-truth path distance reaches the segment length.
std::vector<RpeEntry> relative_pose_error(const std::vector<StampedPose>& est,
                                          const std::vector<StampedPose>& gt,
                                          const std::vector<double>& lengths);

bool rpe_non_decreasing(const std::vector<RpeEntry>& table);

}  // namespace skidsteer
