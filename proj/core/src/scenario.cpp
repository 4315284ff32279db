#include "skidsteer/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "skidsteer/errors.hpp"

namespace skidsteer {

SimulatedScenario simulate_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  SimulatedScenario s;
  s.profile = resolve_profile(cfg);
  const double T = s.profile.total_duration();
  s.xi = cfg.xi_walk ? XiSchedule::random_walk(cfg.xi_true, cfg.noise.sigma_xi_walk, T, 1.0, seed)
                     : XiSchedule(cfg.xi_true);
  s.trajectory = generate_trajectory(s.profile, s.xi, cfg.sim_dt);
  NoiseConfig noise = cfg.noise;
  if (!cfg.simulate_noise) {
    noise.sigma_encoder = 0.0;
    noise.sigma_gyro = 0.0;
    noise.sigma_accel = 0.0;
    noise.sigma_gyro_bias_walk = 0.0;
    noise.sigma_accel_bias_walk = 0.0;
    noise.sigma_pixel = 0.0;
  }
  MeasurementLog& log = s.log;
  log.header.encoder_rate = cfg.encoder_rate;
  log.header.imu_rate = cfg.imu_rate;
  log.header.camera_rate = cfg.camera_rate;
  log.header.sigma_pixel_px = noise.sigma_pixel * kNominalFocalPx;
  log.header.seed = seed;
  log.header.profile = cfg.profile.kind;
  log.header.rig = cfg.rig;
  log.encoders = synthesize_encoders(s.trajectory, s.xi, noise, cfg.encoder_rate, seed);
  log.imu = synthesize_imu(s.trajectory, cfg.rig, noise, cfg.imu_rate, seed);
  const int count = std::max(
      1, static_cast<int>(std::lround(cfg.landmarks_per_meter * path_length(s.trajectory))));
  s.landmarks = scatter_landmarks(s.trajectory, count, cfg.corridor_width, seed);
  log.features = synthesize_features(s.trajectory, s.landmarks, cfg.rig, noise, cfg.camera_rate, seed);
  const double Tend = s.trajectory.back().t;
  for (int j = 0;; ++j) {
    const double t = static_cast<double>(j) / cfg.camera_rate;
    if (t > Tend + 1e-9) break;
    log.ground_truth.push_back({t, sample_at(s.trajectory, t).pose});
    log.xi_truth.push_back({t, s.xi.at(t).vec()});
  }
  return s;
}

namespace {

double gyro_yaw_at(const MeasurementLog& log, double t) {
  auto it = std::lower_bound(log.imu.begin(), log.imu.end(), t,
                             [](const ImuReading& r, double v) { return r.t < v; });
  if (it == log.imu.end()) it = log.imu.end() - 1;
  const Vec3 w_O = log.header.rig.extrinsics_OI.R() * it->gyro;
  return w_O.z();
}

Vec5 xi_truth_at(const MeasurementLog& log, double t) {
  auto it = std::upper_bound(log.xi_truth.begin(), log.xi_truth.end(), t,
                             [](double v, const StampedXi& x) { return v < x.t; });
  if (it == log.xi_truth.begin()) return it->xi;
  return (it - 1)->xi;
}

}  // namespace

KinematicParams initial_xi(const ScenarioConfig& cfg, const MeasurementLog& log,
                           std::uint64_t seed) {
  if (cfg.xi_initial) return KinematicParams::from_vec(*cfg.xi_initial);
  if (cfg.xi_init_from_track_width) {
    if (log.imu.empty()) {
      throw Error(ErrorCategory::StreamMissing, "track-width initialization needs the imu stream");
    }
    std::vector<double> yaw;
    yaw.reserve(log.encoders.size());
    for (const auto& e : log.encoders) yaw.push_back(gyro_yaw_at(log, e.t));
    return ideal_params(initialize_track_width(log.encoders, yaw));
  }
  const Vec5 truth = log.xi_truth.empty() ? cfg.xi_true.vec() : log.xi_truth.front().xi;
  Vec5 err;
  if (cfg.xi_initial_error) {
    err = *cfg.xi_initial_error;
  } else {
    std::mt19937_64 rng(derive_seed(seed, 21));
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int i = 0; i < 5; ++i) err[i] = cfg.xi_init_error_std * nd(rng);
  }
  return KinematicParams::from_vec(truth + err);
}

RunMetrics compute_metrics(const std::vector<KeyframeRecord>& kfs, const MeasurementLog& log) {
  RunMetrics m;
  if (!log.has_ground_truth() || kfs.empty()) return m;
  m.has_truth = true;
  std::vector<StampedPose> est;
  est.reserve(kfs.size());
  for (const auto& k : kfs) est.push_back({k.t, k.pose});
  m.ate = absolute_trajectory_error(est, log.ground_truth);
  m.drift = final_drift(est, log.ground_truth);
  m.rpe_short = relative_pose_error(est, log.ground_truth, kRpeLengthsShort);
  m.rpe_long = relative_pose_error(est, log.ground_truth, kRpeLengthsLong);
  m.rpe_monotone = rpe_non_decreasing(m.rpe_short) && rpe_non_decreasing(m.rpe_long);
  if (!log.xi_truth.empty()) {
    const double t_mid = 0.5 * (kfs.front().t + kfs.back().t);
    Vec5 sum = Vec5::Zero();
    int n = 0;
    for (const auto& k : kfs) {
      if (k.t < t_mid) continue;
      sum += k.xi - xi_truth_at(log, k.t);
      ++n;
    }
    if (n > 0) m.xi_error_second_half = sum / n;
  }
  return m;
}

RunResult run_estimator(SlidingWindowEstimator& est, const MeasurementLog& log,
                        const KinematicParams& xi0, std::uint64_t seed, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const EstimatorConfig& ec = est.config();
  RunResult r;
  r.mode = ec.mode;
  r.seed = seed;
  r.xi_initial = xi0;
  if (log.encoders.empty()) throw Error(ErrorCategory::StreamMissing, "log has no encoder stream");
  if (log.features.empty()) throw Error(ErrorCategory::StreamMissing, "log has no feature stream");
  const bool imu = mode_uses_imu(ec.mode);
  if (imu && log.imu.empty()) {
    throw Error(ErrorCategory::StreamMissing,
                std::string("mode ") + mode_name(ec.mode) + " needs the imu stream");
  }
  est.add_encoders(log.encoders);
  if (imu) est.add_imu(log.imu);

  std::vector<std::pair<double, std::vector<FeatureObservation>>> frames;
  for (const auto& f : log.features) {
    if (frames.empty() || frames.back().first != f.frame_t) frames.push_back({f.frame_t, {}});
    frames.back().second.push_back(f);
  }
  const double t_max = std::min(log.encoders.back().t,
                                imu ? log.imu.back().t : std::numeric_limits<double>::infinity());
  try {
    std::size_t first = 0;
    while (first < frames.size() && frames[first].first < log.encoders.front().t) ++first;
    if (first == frames.size()) throw Error(ErrorCategory::StreamMissing, "no frame inside the encoder stream");
    const double t0 = frames[first].first;
    InitialState init;
    init.t = t0;
    init.xi = xi0;
    init.pose = log.has_ground_truth() ? interpolate_pose(log.ground_truth, t0) : Pose::Identity();
    auto it = std::lower_bound(log.encoders.begin(), log.encoders.end(), t0,
                               [](const EncoderReading& e, double v) { return e.t < v; });
    if (it == log.encoders.end()) --it;
    const BodyVelocity bv = forward_kinematics(xi0, it->o_l, it->o_r);
    const Vec3 w(0.0, 0.0, bv.omega_z);
    const Vec3 v_I = Vec3(bv.v_x, bv.v_y, 0.0) + w.cross(ec.rig.extrinsics_OI.p);
    init.speed_bias.head<3>() = init.pose.R() * v_I;
    init.manifold = manifold_from_pose(init.pose);
    est.initialize(init, frames[first].second);
    int kf = 1;
    for (std::size_t i = first + 1; i < frames.size(); ++i) {
      if (opts.max_keyframes > 0 && kf >= opts.max_keyframes) break;
      if (frames[i].first > t_max) break;
      if (est.process_frame(frames[i].first, frames[i].second)) ++kf;
    }
  } catch (const Error& e) {
    r.failed = true;
    r.error_category = category_name(e.category());
    r.error_message = e.what();
  }
  r.keyframes = est.history();
  r.singular_marginalizations = est.singular_marginalizations();
  r.metrics = compute_metrics(r.keyframes, log);
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

RunResult run_estimator(const MeasurementLog& log, const ScenarioConfig& cfg, EstimatorMode mode,
                        const KinematicParams& xi0, std::uint64_t seed, const RunOptions& opts) {
  EstimatorConfig ec = cfg.estimator;
  ec.mode = mode;
  ec.rig = log.header.rig;
  ec.noise = cfg.noise;
  ec.record_factors = opts.record_factors;
  SlidingWindowEstimator est(ec);
  return run_estimator(est, log, xi0, seed, opts);
}

namespace {

template <typename T>
void mean_std(const std::vector<T>& xs, T& mean, T& sd) {
  mean = xs.front() * 0.0;
  sd = mean;
  if (xs.empty()) return;
  for (const auto& x : xs) mean = mean + x;
  mean = mean / static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  T acc = mean * 0.0;
  for (const auto& x : xs) {
    const T d = x - mean;
    if constexpr (std::is_same_v<T, double>) {
      acc += d * d;
    } else {
      acc = acc + T(d.cwiseProduct(d));
    }
  }
  acc = acc / static_cast<double>(xs.size() - 1);
  if constexpr (std::is_same_v<T, double>) {
    sd = std::sqrt(acc);
  } else {
    sd = acc.cwiseSqrt();
  }
}

}  // namespace

MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg, int n_runs, int threads) {
  if (n_runs < 1) throw Error(ErrorCategory::InvalidArgument, "n_runs must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_runs; ++i) {
    seeds.push_back(i < static_cast<int>(cfg.seeds.size()) ? cfg.seeds[static_cast<std::size_t>(i)]
                                                           : static_cast<std::uint64_t>(i + 1));
  }
  const std::size_t nm = cfg.modes.size();
  std::vector<RunResult> runs(seeds.size() * nm);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      const std::uint64_t seed = seeds[i];
      try {
        const SimulatedScenario sim = simulate_scenario(cfg, seed);
        const KinematicParams xi0 = initial_xi(cfg, sim.log, seed);
        for (std::size_t m = 0; m < nm; ++m) {
          runs[i * nm + m] = run_estimator(sim.log, cfg, cfg.modes[m], xi0, seed);
        }
      } catch (const Error& e) {
        for (std::size_t m = 0; m < nm; ++m) {
          RunResult& r = runs[i * nm + m];
          r.mode = cfg.modes[m];
          r.seed = seed;
          r.failed = true;
          r.error_category = category_name(e.category());
          r.error_message = e.what();
        }
      }
    }
  };
  int nt = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nt = std::clamp(nt, 1, static_cast<int>(seeds.size()));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MonteCarloResult out;
  out.runs = std::move(runs);
  for (std::size_t m = 0; m < nm; ++m) {
    ModeAggregate a;
    a.mode = cfg.modes[m];
    std::vector<Vec5> xe;
    std::vector<double> tr, rr;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const RunResult& r = out.runs[i * nm + m];
      ++a.runs;
      if (r.failed) {
        ++a.failures;
        out.failures.push_back(std::string(mode_name(r.mode)) + ":" + std::to_string(r.seed) +
                               ": " + r.error_category + ": " + r.error_message);
        continue;
      }
      xe.push_back(r.metrics.xi_error_second_half);
      tr.push_back(r.metrics.ate.translation_rmse);
      rr.push_back(r.metrics.ate.rotation_rmse);
    }
    if (!xe.empty()) {
      mean_std(xe, a.xi_error_mean, a.xi_error_std);
      mean_std(tr, a.translation_rmse_mean, a.translation_rmse_std);
      mean_std(rr, a.rotation_rmse_mean, a.rotation_rmse_std);
    }
    out.modes.push_back(a);
  }
  return out;
}

namespace {

using nlohmann::ordered_json;

ordered_json vec_json(const VecX& v) {
  ordered_json a = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered_json rpe_json(const std::vector<RpeEntry>& t) {
  ordered_json a = ordered_json::array();
  for (const auto& e : t) {
    a.push_back({{"length", e.length},
                 {"mean_translation", e.mean_translation},
                 {"mean_rotation", e.mean_rotation},
                 {"count", e.count}});
  }
  return a;
}

ordered_json metrics_json(const RunMetrics& m) {
  ordered_json j;
  j["has_truth"] = m.has_truth;
  if (!m.has_truth) return j;
  j["alignment"] = "first-pose rigid";
  j["final_drift"] = {{"norm", m.drift.norm}, {"xyz", vec_json(m.drift.xyz)}};
  j["ate"] = {{"translation_rmse", m.ate.translation_rmse},
              {"rotation_rmse", m.ate.rotation_rmse},
              {"count", m.ate.count}};
  j["rpe_short"] = rpe_json(m.rpe_short);
  j["rpe_long"] = rpe_json(m.rpe_long);
  j["rpe_monotone"] = m.rpe_monotone;
  j["xi_error_second_half"] = vec_json(m.xi_error_second_half);
  return j;
}

ordered_json run_json(const RunResult& r, bool with_timing) {
  ordered_json j;
  j["mode"] = mode_name(r.mode);
  j["seed"] = r.seed;
  j["xi_initial"] = vec_json(r.xi_initial.vec());
  j["failed"] = r.failed;
  if (r.failed) {
    j["error_category"] = r.error_category;
    j["error_message"] = r.error_message;
  }
  j["keyframes"] = r.keyframes.size();
  if (!r.keyframes.empty()) {
    j["xi_final"] = vec_json(r.keyframes.back().xi);
    j["xi_std_final"] = vec_json(r.keyframes.back().xi_std);
  }
  j["singular_marginalizations"] = r.singular_marginalizations;
  j["metrics"] = metrics_json(r.metrics);
  if (with_timing) j["runtime_s"] = r.runtime_s;
  return j;
}

}  // namespace

std::string run_result_json(const RunResult& r, bool with_timing) {
  return run_json(r, with_timing).dump(2) + "\n";
}

std::string keyframes_csv(const RunResult& r) {
  std::string out =
      "id,t,qw,qx,qy,qz,px,py,pz,X_v,Y_l,Y_r,alpha_l,alpha_r,"
      "std_th_x,std_th_y,std_th_z,std_px,std_py,std_pz,"
      "std_X_v,std_Y_l,std_Y_r,std_alpha_l,std_alpha_r,landmarks,iterations\n";
  for (const auto& k : r.keyframes) {
    out += std::to_string(k.id) + "," + format_double(k.t);
    for (double v : {k.pose.q.w(), k.pose.q.x(), k.pose.q.y(), k.pose.q.z()}) out += "," + format_double(v);
    for (int i = 0; i < 3; ++i) out += "," + format_double(k.pose.p[i]);
    for (int i = 0; i < 5; ++i) out += "," + format_double(k.xi[i]);
    for (int i = 0; i < 6; ++i) out += "," + format_double(k.pose_std[i]);
    for (int i = 0; i < 5; ++i) out += "," + format_double(k.xi_std[i]);
    out += "," + std::to_string(k.landmarks) + "," + std::to_string(k.iterations) + "\n";
  }
  return out;
}

std::string monte_carlo_json(const MonteCarloResult& m, bool with_timing) {
  ordered_json j;
  ordered_json modes = ordered_json::array();
  for (const auto& a : m.modes) {
    modes.push_back({{"mode", mode_name(a.mode)},
                     {"runs", a.runs},
                     {"failures", a.failures},
                     {"xi_error_mean", vec_json(a.xi_error_mean)},
                     {"xi_error_std", vec_json(a.xi_error_std)},
                     {"translation_rmse_mean", a.translation_rmse_mean},
                     {"translation_rmse_std", a.translation_rmse_std},
                     {"rotation_rmse_mean", a.rotation_rmse_mean},
                     {"rotation_rmse_std", a.rotation_rmse_std}});
  }
  j["aggregate"] = modes;
  j["failures"] = m.failures;
  ordered_json runs = ordered_json::array();
  for (const auto& r : m.runs) runs.push_back(run_json(r, with_timing));
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

}  // namespace skidsteer
