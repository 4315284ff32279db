#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "skidsteer/factors.hpp"
#include "skidsteer/solver.hpp"

namespace skidsteer {

// vio_xi5: IMU, all five kinematic parameters online.
// vo_icr3: no IMU, ICR positions online, correction factors frozen.
// vio_fixed_xi: IMU, kinematic parameters frozen at their initial value.
// vio_icr3: IMU, ICR positions online, correction factors frozen.
// vo_xi5: no IMU, all five online. Not identifiable; kept for diagnostics.
enum class EstimatorMode { VioXi5, VoIcr3, VioFixedXi, VioIcr3, VoXi5 };

const char* mode_name(EstimatorMode m);
EstimatorMode parse_mode(const std::string& s);
bool mode_uses_imu(EstimatorMode m);
Eigen::Matrix<bool, 5, 1> mode_xi_mask(EstimatorMode m);

struct EstimatorConfig {
  double keyframe_translation_gate = 0.2;
  double keyframe_rotation_gate = 0.0524;
  int window_size = 10;
  SolverOptions solver;
  EstimatorMode mode = EstimatorMode::VioXi5;
  bool use_manifold = true;
  // New landmarks need this much viewing-ray parallax, rad.
  double min_triangulation_parallax = 0.02;
  // Information diagonal: parameter walk (6), height (1), attitude (2).
  Vec9 manifold_weights = (Vec9() << 1e2, 1e2, 1e2, 1e2, 1e2, 1e2, 1e4, 1e4, 1e4).finished();
  NoiseConfig noise;
  SensorRig rig = SensorRig::default_rig();
  // Startup prior.
  double prior_pose_std = 1e-6;
  Vec5 prior_xi_std = Vec5::Constant(8e-2);
  double prior_velocity_std = 0.1;
  double prior_accel_bias_std = 0.1;
  double prior_gyro_bias_std = 0.05;
  Vec6 prior_manifold_std = (Vec6() << 1e-2, 1e-2, 1e-2, 0.1, 0.1, 0.1).finished();
  // Keep every factor that leaves the window so a batch problem can be
  // rebuilt afterwards.
  bool record_factors = false;
  bool compute_marginals = true;

  void validate() const;
};

bool should_create_keyframe(const Pose& last_kf_pose, const Pose& predicted,
                            const EstimatorConfig& cfg);

// Runs the solver and throws SolverDiverged when it gives up.
SolverSummary solve_window(Values& values, const std::vector<FactorPtr>& factors,
                           const ActiveMask& mask, const SolverOptions& opts);

struct KeyframeRecord {
  long id = 0;
  double t = 0.0;
  Pose pose;
  Vec5 xi = Vec5::Zero();
  Vec9 speed_bias = Vec9::Zero();
  Vec6 manifold = Vec6::Zero();
  Vec6 pose_std = Vec6::Zero();
  Vec5 xi_std = Vec5::Zero();
  int landmarks = 0;
  int iterations = 0;
};

struct InitialState {
  double t = 0.0;
  Pose pose;
  KinematicParams xi;
  Vec9 speed_bias = Vec9::Zero();
  ManifoldParams manifold;
};

// Plane through the pose with the pose's up axis as normal.
ManifoldParams manifold_from_pose(const Pose& pose);

class SlidingWindowEstimator {
 public:
  explicit SlidingWindowEstimator(const EstimatorConfig& cfg);

  // Measurements must arrive in time order and cover each frame before
  // process_frame is called for it.
  void add_encoders(std::span<const EncoderReading> readings);
  void add_imu(std::span<const ImuReading> readings);

  void initialize(const InitialState& init, const std::vector<FeatureObservation>& obs);
  // Returns true when the frame became a keyframe.
  bool process_frame(double t, const std::vector<FeatureObservation>& obs);

  bool initialized() const { return !window_.empty(); }
  const EstimatorConfig& config() const { return cfg_; }
  const Values& values() const { return values_; }
  const std::vector<long>& window() const { return window_; }
  long newest_id() const { return window_.back(); }
  double keyframe_time(long id) const { return kf_time_.at(id); }
  const std::vector<KeyframeRecord>& history() const { return history_; }
  const SolverSummary& last_summary() const { return last_summary_; }
  int singular_marginalizations() const { return singular_marginalizations_; }

  // Factors currently in the window, including the marginalization prior.
  std::vector<FactorPtr> window_factors() const;
  // With record_factors: every measurement factor and the startup prior, at
  // the state of the run so far.
  std::vector<FactorPtr> recorded_factors() const;
  // Latest estimate of every block that was ever created.
  Values all_values() const;

 private:
  struct Track {
    int landmark_id = 0;
    std::map<long, Vec2> obs;  // keyframe id -> uv
    bool triangulated = false;
  };

  void add_observations(long kf_id, const std::vector<FeatureObservation>& obs);
  void triangulate_pending();
  void drop_negative_depth();
  std::vector<FactorPtr> visual_factors_of(long key) const;
  void record_history(long id, const std::vector<FactorPtr>& factors);
  void marginalize_step(long prev_id);
  ActiveMask mask() const;
  std::vector<EncoderReading> encoder_slice(double t0, double t1) const;
  std::vector<ImuReading> imu_slice(double t0, double t1) const;

  EstimatorConfig cfg_;
  std::vector<EncoderReading> encoders_;
  std::vector<ImuReading> imu_;
  Values values_;
  Values retired_;
  std::vector<long> window_;
  std::map<long, double> kf_time_;
  std::vector<FactorPtr> nonvisual_;
  FactorPtr marg_prior_;
  std::map<long, Track> tracks_;
  std::map<int, long> active_track_;
  long next_track_key_ = 0;
  std::vector<FactorPtr> recorded_;
  std::vector<KeyframeRecord> history_;
  SolverSummary last_summary_;
  int singular_marginalizations_ = 0;
};

}  // namespace skidsteer
