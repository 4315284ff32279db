#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skidsteer/geom.hpp"
#include "skidsteer/imu.hpp"
#include "skidsteer/kinematics.hpp"
#include "skidsteer/manifold.hpp"
#include "skidsteer/noise.hpp"

namespace skidsteer {

struct ProfileSegment {
  double duration = 1.0;
  double v_x = 0.0;
  double omega_z = 0.0;
};

// Commanded planar velocities. Each segment blends from the previous
// segment's values over ramp_time with a raised-cosine ramp; the first
// segment ramps up from rest when start_from_rest is set.
struct MotionProfile {
  std::vector<ProfileSegment> segments;
  double ramp_time = 1.0;
  bool start_from_rest = true;
  // Sinusoidal excitation added on top of the segments.
  double omega_wobble = 0.0;
  double omega_wobble_freq = 0.0;
  double speed_wobble = 0.0;
  double speed_wobble_freq = 0.0;
  ManifoldParams manifold;
  Vec3 start_xy = Vec3::Zero();
  double start_yaw = 0.0;

  double total_duration() const;
  void velocity_at(double t, double& v_x, double& omega_z) const;
};

// Kinematic parameters as a function of time: a base value with
// piecewise-constant overrides from (t_from, params) pairs, sorted by time.
struct XiSchedule {
  KinematicParams base;
  std::vector<std::pair<double, KinematicParams>> steps;

  XiSchedule() = default;
  XiSchedule(const KinematicParams& xi) : base(xi) {}  // NOLINT(implicit)
  KinematicParams at(double t) const;
  static XiSchedule random_walk(const KinematicParams& base, const Vec5& sigma_per_sqrt_s,
                                double duration, double step, std::uint64_t seed);
};

struct TrajectorySample {
  double t = 0.0;
  Pose pose;
  BodyVelocity velocity;
};

using Trajectory = std::vector<TrajectorySample>;

struct Landmark {
  int id = 0;
  Vec3 position = Vec3::Zero();
};

struct FeatureObservation {
  double frame_t = 0.0;
  int frame_id = 0;
  int landmark_id = 0;
  Vec2 uv = Vec2::Zero();
};

struct SensorRig {
  Pose extrinsics_OC;
  Pose extrinsics_OI;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double fov_half_angle = 0.7854;
  double max_range = 20.0;
  double min_depth = 0.5;

  // Forward-looking camera: optical axis along odometer x, image x to the
  // right, image y down.
  static SensorRig default_rig();
};

Trajectory generate_trajectory(const MotionProfile& profile, const XiSchedule& xi, double dt);

double path_length(const Trajectory& traj);

// Sample nearest to t (the grid is uniform).
const TrajectorySample& sample_at(const Trajectory& traj, double t);

std::vector<EncoderReading> synthesize_encoders(const Trajectory& traj, const XiSchedule& xi,
                                                const NoiseConfig& noise, double rate,
                                                std::uint64_t seed);

struct ImuSynthesisOptions {
  Vec6 initial_bias = Vec6::Zero();  // [b_a; b_w]
};

std::vector<ImuReading> synthesize_imu(const Trajectory& traj, const SensorRig& rig,
                                       const NoiseConfig& noise, double rate,
                                       std::uint64_t bias_walk_seed,
                                       const ImuSynthesisOptions& opts = {},
                                       std::vector<Vec6>* true_bias = nullptr);

std::vector<FeatureObservation> synthesize_features(const Trajectory& traj,
                                                    const std::vector<Landmark>& landmarks,
                                                    const SensorRig& rig,
                                                    const NoiseConfig& noise, double frame_rate,
                                                    std::uint64_t seed);

std::vector<Landmark> scatter_landmarks(const Trajectory& traj, int count,
                                        double corridor_width, std::uint64_t seed);

// Named profiles used by the tools and tests.
MotionProfile general_motion_profile(double target_length);
MotionProfile straight_profile(double duration, double speed, double speed_wobble = 0.0);
MotionProfile circle_profile(double duration, double speed, double omega);

// Counter-style stream seed derivation.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace skidsteer
