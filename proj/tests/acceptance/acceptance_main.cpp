// Acceptance report: one PASS/FAIL line per criterion, with the measured
// numbers underneath. Exits 0 once every criterion has been evaluated; pass
// --strict to turn any FAIL into a nonzero exit.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "skidsteer/batch.hpp"
#include "skidsteer/config.hpp"
#include "skidsteer/factors.hpp"
#include "skidsteer/kinematics.hpp"
#include "skidsteer/log_io.hpp"
#include "skidsteer/marginalize.hpp"
#include "skidsteer/observability.hpp"
#include "skidsteer/scenario.hpp"
#include "skidsteer/vision.hpp"
#include "test_support.hpp"

using namespace skidsteer;
using skidsteer::testing::factor_numeric_jacobians;
using skidsteer::testing::numeric_jacobian;
using skidsteer::testing::random_pose;
using skidsteer::testing::relative_error;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  Criterion(int i, std::string n) : id(i), name(std::move(n)) {}
  int id;
  std::string name;
  bool pass = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { lines.push_back("     " + what); }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

int g_failed_criteria = 0;

void report(const Criterion& c, double secs) {
  if (!c.pass) ++g_failed_criteria;
  std::printf("[%s] %d. %s (%.1f s)\n", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs);
  for (const auto& l : c.lines) std::printf("        %s\n", l.c_str());
  std::fflush(stdout);
}

KinematicParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> x(-0.3, 0.3), y(0.1, 1.0), a(0.5, 1.5);
  return KinematicParams{x(rng), y(rng), -y(rng), a(rng), a(rng)};
}

// Worst relative error over every key of one factor.
double factor_jacobian_error(const Factor& f, const Values& v) {
  std::vector<MatX> J;
  f.evaluate(v, &J);
  const std::vector<MatX> N = factor_numeric_jacobians(f, v);
  double worst = 0.0;
  for (std::size_t i = 0; i < J.size(); ++i) worst = std::max(worst, relative_error(J[i], N[i]));
  return worst;
}

// ---- 1 ----

void kinematics_criterion() {
  const auto t0 = Clock::now();
  Criterion c{1, "kinematics round trip and ideal special case"};
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> v(-2.0, 2.0), w(-1.5, 1.5);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const KinematicParams xi = random_params(rng);
    const double vx = v(rng), om = w(rng);
    const WheelSpeeds ws = inverse_kinematics(xi, vx, om);
    const BodyVelocity b = forward_kinematics(xi, ws.o_l, ws.o_r);
    worst = std::max({worst, std::abs(b.v_x - vx), std::abs(b.omega_z - om),
                      std::abs(b.v_y + xi.X_v * om)});
  }
  c.check(worst < 1e-12, fmt("round trip over 1e4 draws: max error %.2e (< 1e-12)", worst));

  // Ideal tracks: v = (o_l + o_r) / 2, omega = (o_r - o_l) / b, no side slip.
  double dev_pow2 = 0.0, dev_any = 0.0;
  std::uniform_real_distribution<double> o(-2.0, 2.0), bw(0.2, 2.0);
  for (int i = 0; i < 10000; ++i) {
    const double ol = o(rng), orr = o(rng);
    const double b = i % 2 ? bw(rng) : std::ldexp(1.0, static_cast<int>(i % 5) - 2);
    const BodyVelocity s = forward_kinematics(ideal_params(b), ol, orr);
    const double dv = std::abs(s.v_x - 0.5 * (ol + orr));
    const double dw = std::abs(s.omega_z - (orr - ol) / b);
    const double dy = std::abs(s.v_y);
    if (i % 2) {
      dev_any = std::max({dev_any, dv / std::max(1.0, std::abs(s.v_x)),
                          dw / std::max(1.0, std::abs(s.omega_z)), dy});
    } else {
      dev_pow2 = std::max({dev_pow2, dv, dw, dy});
    }
  }
  c.check(dev_pow2 == 0.0,
          fmt("ideal parameters, power-of-two track widths: max deviation %.1e (exact)", dev_pow2));
  c.check(dev_any <= 4.0 * std::numeric_limits<double>::epsilon(),
          fmt("ideal parameters, arbitrary track widths: max relative deviation %.1e (<= 4 ulp)",
              dev_any));
  const double secs = seconds_since(t0);
  c.check(secs < 1.0, fmt("runtime %.3f s (< 1 s)", secs));
  report(c, secs);
}

// ---- 2 ----

void jacobian_criterion() {
  const auto t0 = Clock::now();
  Criterion c{2, "analytic Jacobians against central differences"};
  constexpr int kPoints = 100;
  constexpr double kTol = 1e-5;
  std::mt19937_64 rng(2002);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double kin[4] = {0, 0, 0, 0};
  for (int i = 0; i < kPoints; ++i) {
    const KinematicParams xi = random_params(rng);
    const double ol = 2.0 * u(rng), orr = 2.0 * u(rng);
    const KinematicJacobians J = jacobians(xi, ol, orr);
    auto vel = [](const BodyVelocity& b) { return Vec3(b.v_x, b.v_y, 0.0); };
    auto rot = [](const BodyVelocity& b) { return Vec3(0.0, 0.0, b.omega_z); };
    auto at_xi = [&](const VecX& d) { return forward_kinematics(KinematicParams::from_vec(xi.vec() + d), ol, orr); };
    auto at_o = [&](const VecX& d) { return forward_kinematics(xi, ol - d[0], orr - d[1]); };
    kin[0] = std::max(kin[0], relative_error(J.J_vxi, numeric_jacobian([&](const VecX& d) -> VecX { return vel(at_xi(d)); }, 5)));
    kin[1] = std::max(kin[1], relative_error(J.J_wxi, numeric_jacobian([&](const VecX& d) -> VecX { return rot(at_xi(d)); }, 5)));
    kin[2] = std::max(kin[2], relative_error(J.J_vo, numeric_jacobian([&](const VecX& d) -> VecX { return vel(at_o(d)); }, 2)));
    kin[3] = std::max(kin[3], relative_error(J.J_wo, numeric_jacobian([&](const VecX& d) -> VecX { return rot(at_o(d)); }, 2)));
  }
  const char* kin_names[4] = {"d v / d xi", "d omega / d xi", "d v / d noise", "d omega / d noise"};
  for (int k = 0; k < 4; ++k) {
    c.check(kin[k] < kTol, fmt("kinematics %-18s worst %.2e", kin_names[k], kin[k]));
  }

  const SensorRig rig = SensorRig::default_rig();
  auto random_xi = [&]() {
    Vec5 x;
    x << 0.05 + 0.1 * u(rng), 0.6 + 0.1 * u(rng), -0.6 + 0.1 * u(rng), 0.95 + 0.1 * u(rng),
        0.95 + 0.1 * u(rng);
    return x;
  };
  double vis = 0, odo = 0, imu = 0, man = 0;
  for (int i = 0; i < kPoints; ++i) {
    {
      Values v;
      v.poses[3] = random_pose(rng);
      v.lm[7] = camera_pose(v.poses[3], rig).transform(Vec3(u(rng), u(rng), 4.0 + 2.0 * u(rng)));
      vis = std::max(vis, factor_jacobian_error(
                              VisualFactor(3, 7, Vec2(0.01 * u(rng), 0.01 * u(rng)), rig, 0.6 / 460.0), v));
    }
    {
      std::vector<EncoderReading> enc;
      const double a = u(rng), b = u(rng);
      for (int k = 0; k <= 60; ++k) {
        const double t = 0.01 * k;
        enc.push_back({t, 1.0 + 0.5 * a * std::sin(3 * t), 1.0 + 0.5 * b * std::cos(2 * t)});
      }
      Values v;
      v.poses[0] = random_pose(rng);
      v.poses[1] = boxplus(v.poses[0], 0.3 * Vec6::Random());
      v.xi[0] = random_xi();
      v.xi[1] = v.xi[0] + 0.01 * Vec5::Random();
      odo = std::max(odo, factor_jacobian_error(OdometerFactor(0, 1, enc, 0.003, 0.55, MatX::Identity(11, 11)), v));
    }
    {
      std::vector<ImuReading> m;
      const Vec3 w0(0.3 * u(rng), 0.3 * u(rng), u(rng));
      for (int k = 0; k <= 40; ++k) {
        const double t = 0.005 * k;
        m.push_back({t, w0 + 0.1 * Vec3(std::sin(t), 0, std::cos(t)), Vec3(u(rng), u(rng), 9.8 + u(rng))});
      }
      const Vec6 b0 = 0.01 * Vec6::Random();
      const ImuPreintegration pre = imu_preintegrate(m, b0, {});
      Values v;
      v.poses[0] = random_pose(rng);
      v.poses[1] = boxplus(v.poses[0], 0.3 * Vec6::Random());
      v.sb[0] = Vec9::Random();
      v.sb[1] = Vec9::Random();
      v.sb[0].tail<6>() = b0 + 0.01 * Vec6::Random();
      imu = std::max(imu, factor_jacobian_error(ImuFactor(0, 1, pre, rig.gravity, rig.extrinsics_OI), v));
    }
    {
      Values v;
      v.poses[2] = random_pose(rng, 0.6);
      v.m[2] = 0.05 * Vec6::Random();
      v.m[1] = 0.05 * Vec6::Random();
      man = std::max({man, factor_jacobian_error(ManifoldFactor(2, 2, 1, Vec9::Ones()), v),
                      factor_jacobian_error(ManifoldFactor(2, 2, Vec9::Ones()), v)});
    }
  }
  c.check(vis < kTol, fmt("visual factor      worst %.2e", vis));
  c.check(imu < kTol, fmt("imu factor         worst %.2e", imu));
  c.check(odo < kTol, fmt("odometer factor    worst %.2e", odo));
  c.check(man < kTol, fmt("manifold factor    worst %.2e", man));
  c.note(fmt("%d random points per Jacobian, tolerance %.0e relative", kPoints, kTol));
  report(c, seconds_since(t0));
}

// ---- 3 ----

const KinematicParams kXi{0.05, 0.62, -0.58, 0.92, 0.95};
const KinematicParams kXiUnitAlpha{0.05, 0.62, -0.58, 1.0, 1.0};

MotionProfile segments(std::vector<ProfileSegment> s) {
  MotionProfile p;
  p.segments = std::move(s);
  p.ramp_time = 1.0;
  p.start_from_rest = false;
  return p;
}

MotionProfile named_profile(const std::string& name, const KinematicParams& xi) {
  if (name == "general") return general_motion_profile(205.4);
  if (name == "straight") return straight_profile(60.0, 1.0, 0.3);
  if (name == "circle") return circle_profile(60.0, 1.0, 0.5);
  if (name == "pivot_l") return segments({{10, xi.Y_l * 0.4, 0.4}, {10, xi.Y_l * 0.8, 0.8}, {10, xi.Y_l * -0.5, -0.5}});
  if (name == "pivot_r") return segments({{10, xi.Y_r * 0.4, 0.4}, {10, xi.Y_r * 0.8, 0.8}, {10, xi.Y_r * -0.5, -0.5}});
  return segments({{10, 0.5, 0.25}, {10, 1.5, 0.75}, {10, 1.0, 0.5}});  // arc
}

ObservabilityReport obs_report(const std::string& profile, ObsVariant v, const KinematicParams& xi) {
  const SensorRig rig = SensorRig::default_rig();
  const Trajectory traj = generate_trajectory(named_profile(profile, xi), XiSchedule(xi), 0.01);
  const bool imu = v != ObsVariant::Mono5 && v != ObsVariant::Mono3;
  const InferredMotion m = infer_motion(traj, xi, rig, imu, 2.0, 200);
  ParamSet ps;
  ps.variant = v;
  ps.xi = xi;
  ps.scale = m.scale;
  ps.extrinsics_OC = rig.extrinsics_OC;
  return observability_report(m, ps);
}

double direction_angle(const ObservabilityReport& r, const std::string& label) {
  for (const auto& d : r.matched_null_directions) {
    if (d.label == label) return d.angle_deg;
  }
  return 90.0;
}

void observability_criterion() {
  const auto t0 = Clock::now();
  Criterion c{3, "observability rank and kernel structure"};
  const std::vector<std::string> profiles{"general", "straight", "circle", "pivot_l", "pivot_r", "arc"};

  for (const auto& p : profiles) {
    const ObservabilityReport r = obs_report(p, ObsVariant::Mono5, kXi);
    const double a = direction_angle(r, "scale");
    c.check(r.nullity() >= 1 && a < kAlignmentTolDeg,
            fmt("mono5 %-9s nullity %d, scale direction at %.2e deg", p.c_str(), r.nullity(), a));
  }

  const ObservabilityReport m3 = obs_report("general", ObsVariant::Mono3, kXiUnitAlpha);
  c.check(m3.rank == 4, fmt("mono3 general   rank %d of 4", m3.rank));
  struct Case {
    const char* profile;
    const char* label;
  };
  for (const Case& k : {Case{"pivot_l", "zero-o_l"}, Case{"straight", "zero-omega"},
                        Case{"circle", "all-constant"}, Case{"straight", "identical-wheels"},
                        Case{"arc", "omega-proportional-o_l"}}) {
    const ObservabilityReport r = obs_report(k.profile, ObsVariant::Mono3, kXiUnitAlpha);
    const double a = direction_angle(r, k.label);
    c.check(a < kAlignmentTolDeg,
            fmt("mono3 %-9s %-24s at %6.2f deg (rank %d)", k.profile, k.label, a, r.rank));
  }

  const ObservabilityReport v5 = obs_report("general", ObsVariant::Vio5, kXi);
  c.check(v5.rank == 5, fmt("vio5 general    rank %d of 5, smin/smax %.3f", v5.rank,
                            v5.singular_values[4] / v5.singular_values[0]));
  for (const Case& k : {Case{"pivot_l", "zero-o_l"}, Case{"pivot_r", "zero-o_r"},
                        Case{"straight", "zero-omega"}, Case{"circle", "all-constant"},
                        Case{"arc", "proportional-wheels"}, Case{"arc", "omega-proportional-o_l"}}) {
    const ObservabilityReport r = obs_report(k.profile, ObsVariant::Vio5, kXi);
    const double a = direction_angle(r, k.label);
    c.check(a < kAlignmentTolDeg,
            fmt("vio5  %-9s %-24s at %6.2f deg (rank %d)", k.profile, k.label, a, r.rank));
  }
  for (const Case& k : {Case{"circle", "all-constant-ratio"}, Case{"arc", "proportional-wheels-ratio"}}) {
    const ObservabilityReport r = obs_report(k.profile, ObsVariant::Vio5, kXi);
    c.note(fmt("vio5  %-9s %-24s at %6.2f deg (fitted wheel-speed ratio)", k.profile, k.label,
               direction_angle(r, k.label)));
  }
  {
    const ObservabilityReport r = obs_report("circle", ObsVariant::Mono3, kXiUnitAlpha);
    c.note(fmt("mono3 circle    all-constant-ratio       at %6.2f deg (fitted wheel-speed ratio)",
               direction_angle(r, "all-constant-ratio")));
  }

  const ObservabilityReport ep = obs_report("general", ObsVariant::ExtP, kXi);
  c.check(ep.nullity() == 3, fmt("ext_p general   nullity %d (3)", ep.nullity()));
  for (const char* k : {"k1", "k2", "k3"}) {
    const double a = direction_angle(ep, k);
    c.check(a < kAlignmentTolDeg, fmt("ext_p %-3s at %.2e deg", k, a));
  }
  const ObservabilityReport et = obs_report("general", ObsVariant::ExtTheta, kXi);
  c.check(et.nullity() == 1, fmt("ext_theta general nullity %d (1)", et.nullity()));
  const double a3 = direction_angle(et, "theta_3");
  c.check(a3 < kAlignmentTolDeg, fmt("ext_theta third rotation axis at %.2f deg", a3));
  {
    const Mat3 R_OC = SensorRig::default_rig().extrinsics_OC.R();
    for (int axis = 0; axis < 3; ++axis) {
      VecX k = VecX::Zero(8);
      k.tail<3>() = R_OC.transpose().col(axis);
      c.note(fmt("ext_theta rotation about odometer axis %d at %.2e deg from the kernel", axis,
                 kernel_angle_deg(et, k)));
    }
  }
  const double secs = seconds_since(t0);
  c.check(secs < 10.0, fmt("runtime %.2f s (< 10 s)", secs));
  report(c, secs);
}

// ---- 4 and 5 ----

void monte_carlo_criteria(const std::string& config_dir, int threads) {
  const auto t0 = Clock::now();
  const ScenarioConfig cfg = load_config(config_dir + "/montecarlo.json");
  const MonteCarloResult mc = run_monte_carlo(cfg, 15, threads);
  const double secs = seconds_since(t0);

  const ModeAggregate* online = nullptr;
  const ModeAggregate* fixed = nullptr;
  for (const auto& m : mc.modes) {
    if (m.mode == EstimatorMode::VioXi5) online = &m;
    if (m.mode == EstimatorMode::VioFixedXi) fixed = &m;
  }

  Criterion c4{4, "Monte Carlo calibration error, 15 seeds"};
  if (!online) {
    c4.check(false, "montecarlo config has no vio_xi5 mode");
  } else {
    const char* names[5] = {"X_v", "Y_l", "Y_r", "alpha_l", "alpha_r"};
    c4.check(online->failures == 0, fmt("%d of %d runs failed", online->failures, online->runs));
    for (int i = 0; i < 5; ++i) {
      c4.check(std::abs(online->xi_error_mean[i]) <= 0.06 && online->xi_error_std[i] <= 0.04,
               fmt("%-8s error %+.4f +- %.4f (|mean| <= 0.06, std <= 0.04)", names[i],
                   online->xi_error_mean[i], online->xi_error_std[i]));
    }
  }
  c4.check(secs < 600.0, fmt("runtime %.0f s for %zu runs (< 600 s)", secs, mc.runs.size()));
  report(c4, secs);

  Criterion c5{5, "online calibration beats fixed wrong parameters"};
  if (!online || !fixed) {
    c5.check(false, "montecarlo config needs vio_xi5 and vio_fixed_xi");
  } else {
    int better = 0, pairs = 0;
    for (const auto& a : mc.runs) {
      if (a.mode != EstimatorMode::VioXi5 || a.failed) continue;
      for (const auto& b : mc.runs) {
        if (b.mode != EstimatorMode::VioFixedXi || b.seed != a.seed || b.failed) continue;
        ++pairs;
        if (a.metrics.ate.translation_rmse < b.metrics.ate.translation_rmse) ++better;
      }
    }
    const double ratio = fixed->translation_rmse_mean / std::max(online->translation_rmse_mean, 1e-12);
    c5.note(fmt("translation RMSE online %.3f +- %.3f m, fixed %.3f +- %.3f m",
                online->translation_rmse_mean, online->translation_rmse_std,
                fixed->translation_rmse_mean, fixed->translation_rmse_std));
    c5.check(online->translation_rmse_mean < fixed->translation_rmse_mean,
             "mean RMSE online < mean RMSE fixed");
    c5.check(pairs > 0 && better >= 0.8 * pairs,
             fmt("per-seed ordering holds in %d of %d seeds (>= 80%%)", better, pairs));
    c5.check(ratio >= 1.5, fmt("mean ratio fixed / online %.2f (>= 1.5)", ratio));
  }
  report(c5, 0.0);
}

// ---- 6 ----

void convergence_criterion() {
  const auto t0 = Clock::now();
  Criterion c{6, "parameter std contraction in the first quarter of the run"};
  ScenarioConfig cfg;
  cfg.profile.length = 205.4;
  cfg.xi_initial_error = (Vec5() << 0.08, 0.14, -0.10, 0.2, 0.2).finished();
  for (ObsVariant v : {ObsVariant::Vio5, ObsVariant::Mono3}) {
    const IdentifiabilityResult r = empirical_identifiability(cfg, v, 1, 0.25);
    if (r.run_failed) {
      c.check(false, fmt("%s run failed: %s", r.mode.c_str(), r.error.c_str()));
      continue;
    }
    for (std::size_t i = 0; i < r.parameters.size(); ++i) {
      c.check(r.contraction[i] >= 2.0,
              fmt("%-13s %-8s std %.4f -> %.4f, x%.2f (>= 2)", r.mode.c_str(),
                  r.parameters[i].c_str(), r.initial_std[i], r.final_std[i], r.contraction[i]));
    }
  }
  report(c, seconds_since(t0));
}

// ---- 7 ----

struct WindowVsBatch {
  double dp = 0.0, drot = 0.0;
  bool failed = false;
};

WindowVsBatch window_vs_batch(double noise_scale, std::uint64_t seed, bool exact_xi = false) {
  ScenarioConfig cfg;
  if (exact_xi) cfg.xi_initial_error = Vec5::Zero();
  cfg.profile.length = 40.0;
  cfg.estimator.solver.huber_threshold = 0.0;
  cfg.noise.sigma_encoder *= noise_scale;
  cfg.noise.sigma_gyro *= noise_scale;
  cfg.noise.sigma_accel *= noise_scale;
  cfg.noise.sigma_pixel *= noise_scale;
  const SimulatedScenario sim = simulate_scenario(cfg, seed);
  EstimatorConfig ec = cfg.estimator;
  ec.record_factors = true;
  SlidingWindowEstimator est(ec);
  RunOptions ro;
  ro.max_keyframes = 30;
  ro.record_factors = true;
  const RunResult r = run_estimator(est, sim.log, initial_xi(cfg, sim.log, seed), seed, ro);
  WindowVsBatch out;
  if (r.failed || r.keyframes.size() != 30) {
    out.failed = true;
    return out;
  }
  ActiveMask mask;
  mask.xi = mode_xi_mask(ec.mode);
  SolverOptions so = ec.solver;
  so.max_iterations = 50;
  so.convergence_tol = 1e-14;
  const BatchResult b = solve_batch(est.all_values(), est.recorded_factors(), mask, so);
  const long id = est.newest_id();
  const Pose& sw = est.values().poses.at(id);
  const Pose& bp = b.values.poses.at(id);
  out.dp = (sw.p - bp.p).norm();
  out.drot = rotation_angle(sw.q.conjugate() * bp.q);
  return out;
}

void consistency_criterion() {
  const auto t0 = Clock::now();
  Criterion c{7, "sliding window against full batch; marginalization hand cases"};
  const WindowVsBatch full = window_vs_batch(1.0, 1);
  if (full.failed) {
    c.check(false, "30-keyframe run failed");
  } else {
    c.check(full.dp < 1e-4, fmt("newest pose position gap %.2e m (< 1e-4)", full.dp));
    c.check(full.drot < 1e-5, fmt("newest pose rotation gap %.2e rad (< 1e-5)", full.drot));
  }
  for (double s : {0.3, 0.1}) {
    const WindowVsBatch w = window_vs_batch(s, 1);
    c.note(fmt("noise x%.1f: gap %.2e m, %.2e rad", s, w.dp, w.drot));
  }
  for (double s : {1.0, 0.1}) {
    const WindowVsBatch w = window_vs_batch(s, 1, true);
    c.note(fmt("noise x%.1f, initial xi exact: gap %.2e m, %.2e rad", s, w.dp, w.drot));
  }

  {
    MatX H(2, 2);
    H << 2, 1, 1, 2;
    VecX g(2);
    g << 1, 1;
    const MarginalizationResult r = marginalize(H, g, {1});
    c.check(r.information(0, 0) == 1.5 && r.gradient[0] == 0.5,
            fmt("2x2 case: information %.17g, gradient %.17g (1.5, 0.5)", r.information(0, 0),
                r.gradient[0]));
  }
  {
    MatX H(3, 3);
    H << 4, 1, 2, 1, 3, 0, 2, 0, 5;
    VecX g(3);
    g << 1, 2, 3;
    const MarginalizationResult r = marginalize(H, g, {1, 2});
    const double di = std::abs(r.information(0, 0) - 43.0 / 15.0);
    const double dg = std::abs(r.gradient[0] + 13.0 / 15.0);
    c.check(di <= 4.4e-16 * 43.0 / 15.0 && dg <= 4.4e-16,
            fmt("3x3 block case: information %.17g (43/15), gradient %.17g (-13/15)",
                r.information(0, 0), r.gradient[0]));
  }
  {
    MatX H(4, 4);
    H << 3, 1, 0, 0, 1, 2, 0, 0, 0, 0, 5, 2, 0, 0, 2, 7;
    VecX g(4);
    g << 0.5, -1, 2, 3;
    const MarginalizationResult r = marginalize(H, g, {2, 3});
    c.check(r.information == H.topLeftCorner(2, 2) && r.gradient == g.head(2),
            "uncoupled blocks: kept block returned unchanged");
  }
  report(c, seconds_since(t0));
}

// ---- 8 ----

int run_command(const std::string& cmd) {
  const int status = std::system((cmd + " 2>/dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism_criterion(const std::string& config_dir, const std::string& cli) {
  const auto t0 = Clock::now();
  Criterion c{8, "command outputs are byte-reproducible"};
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "skidsteer_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = (dir / "short.json").string();
  std::ofstream(cfg) << R"({"profile": {"kind": "general", "length": 20.0}, "seeds": [7],
                           "modes": ["vio_xi5", "vo_icr3"]})";
  if (cli.empty()) {
    c.check(false, "command-line tool not built");
    report(c, 0.0);
    return;
  }
  struct Cmd {
    std::string name;
    std::string args;
  };
  auto path = [&](const std::string& n) { return (dir / n).string(); };
  for (const char* tag : {"1", "2"}) {
    const std::string t(tag);
    const std::vector<Cmd> cmds{
        {"simulate", "simulate -c " + cfg + " -o " + path("log" + t)},
        {"estimate", "estimate -l " + path("log1") + " -c " + cfg + " -o " + path("est" + t) +
                         " --csv " + path("csv" + t)},
        {"observability", "observability -c " + config_dir + "/general.json -c " + config_dir +
                              "/constant_circle.json -o " + path("obs" + t)},
        {"montecarlo", "montecarlo -c " + cfg + " -n 2 -j 2 -o " + path("mc" + t)},
    };
    for (const auto& cm : cmds) {
      const int rc = run_command(cli + " " + cm.args);
      if (rc != 0) c.check(false, fmt("%s exited with %d", cm.name.c_str(), rc));
    }
  }
  for (const char* f : {"log", "est", "csv", "obs", "mc"}) {
    const std::string a = read_text_file(path(std::string(f) + "1"));
    const std::string b = read_text_file(path(std::string(f) + "2"));
    c.check(!a.empty() && a == b, fmt("%-4s output %zu bytes, identical on repeat", f, a.size()));
  }
  report(c, seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false, quick = false;
  int threads = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--strict") strict = true;
    if (a == "--quick") quick = true;  // skips the Monte Carlo criteria
    if (a == "--threads" && i + 1 < argc) threads = std::atoi(argv[++i]);
  }
  const std::string config_dir = SKIDSTEER_CONFIG_DIR;
#ifdef SKIDSTEER_CLI
  const std::string cli = SKIDSTEER_CLI;
#else
  const std::string cli;
#endif

  auto guarded = [&](int id, const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception& e) {
      std::printf("[FAIL] %d. threw: %s\n", id, e.what());
      ++g_failed_criteria;
    }
  };
  guarded(1, kinematics_criterion);
  guarded(2, jacobian_criterion);
  guarded(3, observability_criterion);
  if (quick) {
    std::printf("[SKIP] 4. Monte Carlo calibration error (--quick)\n");
    std::printf("[SKIP] 5. online calibration benefit (--quick)\n");
  } else {
    guarded(4, [&] { monte_carlo_criteria(config_dir, threads); });
  }
  guarded(6, convergence_criterion);
  guarded(7, consistency_criterion);
  guarded(8, [&] { determinism_criterion(config_dir, cli); });
  std::printf("%d criteria failed\n", g_failed_criteria);
  return strict && g_failed_criteria > 0 ? 1 : 0;
}
