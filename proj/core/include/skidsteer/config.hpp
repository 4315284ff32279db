#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skidsteer/estimator.hpp"
#include "skidsteer/simulate.hpp"

namespace skidsteer {

// kind: general | straight | circle | file.
struct ProfileConfig {
  std::string kind = "general";
  double length = 205.4;   // general
  double duration = 60.0;  // straight, circle
  double speed = 1.0;
  double omega = 0.5;
  // Speed oscillation amplitude for straight, m/s.
  double speed_wobble = 0.0;
  // Replaces the built-in surface of a named profile.
  std::optional<Vec6> manifold;
  std::string file;  // resolved against the config directory
};

struct ScenarioConfig {
  std::string name = "scenario";
  ProfileConfig profile;
  KinematicParams xi_true{0.05, 0.62, -0.58, 0.92, 0.95};
  bool xi_walk = false;
  // Initial guess: explicit value, or truth plus an explicit offset, or truth
  // plus a seeded Gaussian offset of xi_init_error_std. With
  // xi_init_from_track_width the ideal parameters for the estimated track
  // width are used instead.
  std::optional<Vec5> xi_initial;
  std::optional<Vec5> xi_initial_error;
  double xi_init_error_std = 0.08;
  bool xi_init_from_track_width = false;
  NoiseConfig noise;
  bool simulate_noise = true;
  SensorRig rig = SensorRig::default_rig();
  double encoder_rate = 100.0;
  double imu_rate = 200.0;
  double camera_rate = 10.0;
  double sim_dt = 0.005;
  double landmarks_per_meter = 5.0;
  double corridor_width = 20.0;
  EstimatorConfig estimator;
  std::vector<EstimatorMode> modes{EstimatorMode::VioXi5};
  std::vector<std::uint64_t> seeds{1};
  int threads = 0;  // 0: hardware concurrency
  // Observability sampling.
  int observability_samples = 200;
  double observability_tol_ratio = 1e-8;
};

// Throws ConfigParse with the offending field path in the message.
ScenarioConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);

MotionProfile resolve_profile(const ScenarioConfig& cfg);

}  // namespace skidsteer
