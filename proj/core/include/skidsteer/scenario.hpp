#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skidsteer/config.hpp"
#include "skidsteer/estimator.hpp"
#include "skidsteer/log_io.hpp"
#include "skidsteer/metrics.hpp"

namespace skidsteer {

struct SimulatedScenario {
  MotionProfile profile;
  XiSchedule xi;
  Trajectory trajectory;
  std::vector<Landmark> landmarks;
  MeasurementLog log;
};

SimulatedScenario simulate_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

// Starting guess for the kinematic parameters (see ScenarioConfig).
KinematicParams initial_xi(const ScenarioConfig& cfg, const MeasurementLog& log,
                           std::uint64_t seed);

struct RunMetrics {
  bool has_truth = false;
  DriftResult drift;
  AteResult ate;
  std::vector<RpeEntry> rpe_short;
  std::vector<RpeEntry> rpe_long;
  bool rpe_monotone = true;
  // Mean of estimate minus truth over keyframes in the second half of the run.
  Vec5 xi_error_second_half = Vec5::Zero();
};

struct RunResult {
  EstimatorMode mode = EstimatorMode::VioXi5;
  std::uint64_t seed = 0;
  KinematicParams xi_initial;
  std::vector<KeyframeRecord> keyframes;
  RunMetrics metrics;
  bool failed = false;
  std::string error_category;
  std::string error_message;
  int singular_marginalizations = 0;
  double runtime_s = 0.0;
};

struct RunOptions {
  int max_keyframes = -1;  // stop after this many keyframes (including the first)
  bool record_factors = false;
};

// Feeds the log through an estimator built from cfg.estimator with the given
// mode. Errors inside the run are reported in the result, not thrown, except
// for missing streams.
RunResult run_estimator(const MeasurementLog& log, const ScenarioConfig& cfg, EstimatorMode mode,
                        const KinematicParams& xi0, std::uint64_t seed,
                        const RunOptions& opts = {});
// Same, leaving the estimator available to the caller.
RunResult run_estimator(SlidingWindowEstimator& est, const MeasurementLog& log,
                        const KinematicParams& xi0, std::uint64_t seed,
                        const RunOptions& opts = {});

RunMetrics compute_metrics(const std::vector<KeyframeRecord>& kfs, const MeasurementLog& log);

struct ModeAggregate {
  EstimatorMode mode = EstimatorMode::VioXi5;
  int runs = 0;
  int failures = 0;
  Vec5 xi_error_mean = Vec5::Zero();
  Vec5 xi_error_std = Vec5::Zero();
  double translation_rmse_mean = 0.0;
  double translation_rmse_std = 0.0;
  double rotation_rmse_mean = 0.0;
  double rotation_rmse_std = 0.0;
};

struct MonteCarloResult {
  std::vector<RunResult> runs;  // seed-major, modes in config order
  std::vector<ModeAggregate> modes;
  std::vector<std::string> failures;  // "mode:seed: message"
};

// Each seed is simulated once and every configured mode runs on the same log.
MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg, int n_runs, int threads);

std::string run_result_json(const RunResult& r, bool with_timing = false);
std::string keyframes_csv(const RunResult& r);
std::string monte_carlo_json(const MonteCarloResult& m, bool with_timing = false);

}  // namespace skidsteer
