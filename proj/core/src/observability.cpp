#include "skidsteer/observability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/SVD>

#include "skidsteer/config.hpp"
#include "skidsteer/errors.hpp"
#include "skidsteer/scenario.hpp"

namespace skidsteer {

namespace {

constexpr double kZeroRms = 1e-6;
constexpr double kConstantRel = 1e-3;
constexpr double kProportionalRel = 1e-3;

VecX unit(int n, int i) {
  VecX e = VecX::Zero(n);
  e[i] = 1.0;
  return e;
}

VecX from_list(std::initializer_list<double> xs) {
  VecX v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

bool is_zero(const std::vector<double>& x) { return rms(x) < kZeroRms; }

bool is_constant(const std::vector<double>& x) {
  if (x.empty()) return true;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  return sd / (std::abs(mean) + 1e-6) < kConstantRel;
}

// Least-squares c in y ~ c x.
double ratio_fit(const std::vector<double>& y, const std::vector<double>& x) {
  double xy = 0.0, xx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
  }
  return xx > 0.0 ? xy / xx : 0.0;
}

bool is_proportional(const std::vector<double>& y, const std::vector<double>& x) {
  if (is_zero(x) || is_zero(y)) return false;
  const double c = ratio_fit(y, x);
  double r = 0.0, n = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    r += (y[i] - c * x[i]) * (y[i] - c * x[i]);
    n += y[i] * y[i];
  }
  return std::sqrt(r / n) < kProportionalRel;
}

struct Signals {
  std::vector<double> o_l, o_r, omega;
};

Signals signals(const InferredMotion& m) {
  Signals s;
  for (const auto& x : m.samples) {
    s.o_l.push_back(x.o_l);
    s.o_r.push_back(x.o_r);
    s.omega.push_back(x.omega);
  }
  return s;
}

void check_motion(const InferredMotion& motion) {
  if (motion.samples.size() < 2) {
    throw Error(ErrorCategory::InvalidArgument, "observability needs at least 2 samples");
  }
  for (std::size_t i = 1; i < motion.samples.size(); ++i) {
    if (!(motion.samples[i].t > motion.samples[i - 1].t)) {
      throw Error(ErrorCategory::InvalidArgument, "sample times must increase");
    }
  }
}

// Rotation-error columns of the two velocity rows: -e_i^T R [v_C]x.
Eigen::Matrix<double, 2, 3> rotation_block(const MotionSample& m, const Mat3& R_OC) {
  const Eigen::Matrix<double, 3, 3> B = -R_OC * skew(m.v_C);
  return B.topRows<2>();
}

}  // namespace

InferredMotion infer_motion(const Trajectory& traj, const KinematicParams& xi,
                            const SensorRig& rig, bool use_imu, double scale,
                            int max_samples) {
  if (traj.size() < 2) throw Error(ErrorCategory::InvalidArgument, "trajectory too short");
  if (max_samples < 2) throw Error(ErrorCategory::InvalidArgument, "max_samples must be >= 2");
  if (!(scale > 0.0)) throw Error(ErrorCategory::InvalidArgument, "scale must be positive");
  InferredMotion out;
  out.scale = use_imu ? 1.0 : scale;
  const Mat3 R_OC = rig.extrinsics_OC.R();
  const Vec3& p = rig.extrinsics_OC.p;
  const std::size_t n = traj.size();
  const std::size_t stride =
      std::max<std::size_t>(1, (n + static_cast<std::size_t>(max_samples) - 1) /
                                   static_cast<std::size_t>(max_samples));
  for (std::size_t i = 0; i < n; i += stride) {
    const TrajectorySample& s = traj[i];
    MotionSample m;
    m.t = s.t;
    m.omega = s.velocity.omega_z;
    const Vec3 v_O(s.velocity.v_x, s.velocity.v_y, 0.0);
    const Vec3 w_O(0.0, 0.0, s.velocity.omega_z);
    m.v = (v_O + w_O.cross(p)) / out.scale;
    m.v_C = R_OC.transpose() * m.v;
    const WheelSpeeds o = inverse_kinematics(xi, s.velocity.v_x, s.velocity.omega_z);
    m.o_l = o.o_l;
    m.o_r = o.o_r;
    out.samples.push_back(m);
  }
  return out;
}

Vec3 constraint_residual(const MotionSample& m, const KinematicParams& xi, double scale,
                         const Pose& extrinsics_OC) {
  const double bl = xi.alpha_l / xi.delta_y();
  const double br = xi.alpha_r / xi.delta_y();
  const double xc = extrinsics_OC.p.x();
  const double yc = extrinsics_OC.p.y();
  return Vec3(m.omega * yc + scale * m.v.x() - m.omega * xi.Y_l - bl * xi.delta_y() * m.o_l,
              -m.omega * xc + scale * m.v.y() + m.omega * xi.X_v,
              m.omega + bl * m.o_l - br * m.o_r);
}

const char* variant_name(ObsVariant v) {
  switch (v) {
    case ObsVariant::Mono5: return "mono5";
    case ObsVariant::Mono3: return "mono3";
    case ObsVariant::Vio5: return "vio5";
    case ObsVariant::ExtP: return "ext_p";
    case ObsVariant::ExtTheta: return "ext_theta";
  }
  return "?";
}

ObsVariant parse_variant(const std::string& s) {
  for (ObsVariant v : all_variants()) {
    if (s == variant_name(v)) return v;
  }
  throw Error(ErrorCategory::InvalidArgument, "unknown observability variant '" + s + "'");
}

std::vector<ObsVariant> all_variants() {
  return {ObsVariant::Mono5, ObsVariant::Mono3, ObsVariant::Vio5, ObsVariant::ExtP,
          ObsVariant::ExtTheta};
}

int ParamSet::columns() const { return static_cast<int>(column_names().size()); }

std::vector<std::string> ParamSet::column_names() const {
  switch (variant) {
    case ObsVariant::Mono5: return {"Y_l", "dY", "X_v", "beta_l", "beta_r", "s"};
    case ObsVariant::Mono3: return {"Y_l", "dY", "X_v", "s"};
    case ObsVariant::Vio5: return {"Y_l", "dY", "X_v", "beta_l", "beta_r"};
    case ObsVariant::ExtP: return {"Y_l", "dY", "X_v", "beta_l", "beta_r", "x_C", "y_C", "z_C"};
    case ObsVariant::ExtTheta:
      return {"Y_l", "dY", "X_v", "beta_l", "beta_r", "theta_1", "theta_2", "theta_3"};
  }
  return {};
}

MatX build_matrix(const InferredMotion& motion, const ParamSet& params) {
  check_motion(motion);
  if ((params.variant == ObsVariant::Mono5 || params.variant == ObsVariant::Mono3) &&
      std::abs(params.scale - motion.scale) > 1e-12 * std::max(1.0, motion.scale)) {
    throw Error(ErrorCategory::InvalidArgument, "parameter scale disagrees with the motion");
  }
  if (params.variant != ObsVariant::Mono5 && params.variant != ObsVariant::Mono3 &&
      motion.scale != 1.0) {
    throw Error(ErrorCategory::InvalidArgument,
                std::string(variant_name(params.variant)) + " expects metric motion (scale 1)");
  }
  check_params(params.xi);
  const int nc = params.columns();
  const int ns = static_cast<int>(motion.samples.size());
  MatX O = MatX::Zero(3 * ns, nc);
  const double dy = params.xi.delta_y();
  const double bl = params.beta_l();
  const Mat3 R_OC = params.extrinsics_OC.R();
  for (int i = 0; i < ns; ++i) {
    const MotionSample& m = motion.samples[static_cast<std::size_t>(i)];
    auto r = O.middleRows(3 * i, 3);
    if (params.variant == ObsVariant::Mono3) {
      r(0, 0) = -m.omega;
      r(0, 3) = m.v.x();
      r(1, 2) = m.omega;
      r(1, 3) = m.v.y();
      r(2, 1) = (m.o_r - m.o_l) / (dy * dy);
      continue;
    }
    r(0, 0) = -m.omega;
    r(0, 1) = -bl * m.o_l;
    r(0, 3) = -dy * m.o_l;
    r(1, 2) = m.omega;
    r(2, 3) = m.o_l;
    r(2, 4) = -m.o_r;
    switch (params.variant) {
      case ObsVariant::Mono5:
        r(0, 5) = m.v.x();
        r(1, 5) = m.v.y();
        break;
      case ObsVariant::ExtP:
        r(0, 6) = m.omega;
        r(1, 5) = -m.omega;
        break;
      case ObsVariant::ExtTheta:
        r.block<2, 3>(0, 5) = rotation_block(m, R_OC);
        break;
      default:
        break;
    }
  }
  return O;
}

MatX build_reduced_matrix(const InferredMotion& motion, const ParamSet& params) {
  if (params.variant == ObsVariant::Mono5 || params.variant == ObsVariant::ExtP) {
    return build_matrix(motion, params);
  }
  MatX O = build_matrix(motion, params);
  const int ns = static_cast<int>(motion.samples.size());
  for (int i = 0; i < ns; ++i) {
    const MotionSample& m = motion.samples[static_cast<std::size_t>(i)];
    auto r = O.middleRows(3 * i, 3);
    if (params.variant == ObsVariant::Mono3) {
      r(0, 3) = m.o_l;
      r(1, 3) = 0.0;
      r(2, 1) = m.o_r - m.o_l;
    } else {
      r(0, 1) = m.o_l;
      r(0, 3) = 0.0;
    }
  }
  return O;
}

const char* degeneracy_name(Degeneracy d) {
  switch (d) {
    case Degeneracy::ZeroOl: return "zero-o_l";
    case Degeneracy::ZeroOr: return "zero-o_r";
    case Degeneracy::ZeroOmega: return "zero-omega";
    case Degeneracy::AllConstant: return "all-constant";
    case Degeneracy::ProportionalWheels: return "proportional-wheels";
    case Degeneracy::OmegaProportionalOl: return "omega-proportional-o_l";
  }
  return "?";
}

ObservabilityReport analyze(const MatX& matrix, double tol_ratio) {
  if (matrix.rows() < matrix.cols()) {
    throw Error(ErrorCategory::InvalidArgument, "matrix has fewer rows than columns");
  }
  ObservabilityReport r;
  r.matrix = matrix;
  r.columns = static_cast<int>(matrix.cols());
  Eigen::JacobiSVD<MatX> svd(matrix, Eigen::ComputeFullV);
  r.singular_values = svd.singularValues();
  const double smax = r.singular_values.size() > 0 ? r.singular_values[0] : 0.0;
  const double thr = tol_ratio * smax;
  r.rank = 0;
  for (int i = 0; i < r.singular_values.size(); ++i) {
    if (r.singular_values[i] > thr) ++r.rank;
  }
  r.nullspace_basis = svd.matrixV().rightCols(r.columns - r.rank);
  return r;
}

double kernel_angle_deg(const ObservabilityReport& r, const VecX& k) {
  if (k.size() != r.columns) {
    throw Error(ErrorCategory::InvalidArgument, "vector length does not match the matrix");
  }
  const double n = k.norm();
  if (n == 0.0) throw Error(ErrorCategory::InvalidArgument, "zero vector");
  if (r.nullspace_basis.cols() == 0) return 90.0;
  const VecX proj = r.nullspace_basis * (r.nullspace_basis.transpose() * k);
  const double c = std::clamp(proj.norm() / n, 0.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

std::vector<LabeledVector> analytic_null_vectors(const InferredMotion& motion,
                                                 const ParamSet& params) {
  const Signals s = signals(motion);
  const double c = ratio_fit(s.o_l, s.omega);    // o_l ~ c * omega
  const double rho = ratio_fit(s.o_l, s.o_r);    // o_l ~ rho * o_r
  const KinematicParams& xi = params.xi;
  const Vec3& pc = params.extrinsics_OC.p;
  auto cls = [](std::string label, VecX k, Degeneracy d) {
    return LabeledVector{std::move(label), std::move(k), true, d};
  };
  switch (params.variant) {
    case ObsVariant::Mono5:
      return {{"scale", from_list({xi.Y_l - pc.y(), xi.delta_y(), xi.X_v - pc.x(), 0.0, 0.0,
                                   params.scale})}};
    case ObsVariant::Mono3:
      return {cls("zero-o_l", unit(4, 3), Degeneracy::ZeroOl),
              cls("zero-omega", unit(4, 2), Degeneracy::ZeroOmega),
              cls("all-constant", unit(4, 1), Degeneracy::AllConstant),
              cls("identical-wheels", unit(4, 1), Degeneracy::ProportionalWheels),
              cls("omega-proportional-o_l", from_list({c, 0.0, 0.0, 1.0}),
                  Degeneracy::OmegaProportionalOl),
              {"all-constant-ratio", from_list({c, 0.0, 0.0, 1.0})}};
    case ObsVariant::Vio5:
      return {cls("zero-o_l", from_list({0.0, 1.0, 0.0, 1.0, 0.0}), Degeneracy::ZeroOl),
              cls("zero-o_r", unit(5, 4), Degeneracy::ZeroOr),
              cls("zero-omega", from_list({1.0, 0.0, 1.0, 0.0, 0.0}), Degeneracy::ZeroOmega),
              cls("all-constant", unit(5, 2), Degeneracy::AllConstant),
              cls("proportional-wheels", unit(5, 3), Degeneracy::ProportionalWheels),
              cls("omega-proportional-o_l", from_list({c, 1.0, 0.0, 0.0, 0.0}),
                  Degeneracy::OmegaProportionalOl),
              {"all-constant-ratio", from_list({0.0, 0.0, 0.0, 1.0, rho})},
              {"proportional-wheels-ratio", from_list({0.0, 0.0, 0.0, 1.0, rho})}};
    case ObsVariant::ExtP:
      return {{"k1", from_list({1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0})},
              {"k2", from_list({0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0})},
              {"k3", unit(8, 7)}};
    case ObsVariant::ExtTheta:
      return {{"theta_3", unit(8, 7)}};
  }
  return {};
}

std::vector<Degeneracy> classify_motion(const InferredMotion& motion) {
  if (motion.samples.size() < 10) {
    throw Error(ErrorCategory::InvalidArgument, "classification needs at least 10 samples");
  }
  const Signals s = signals(motion);
  std::vector<Degeneracy> out;
  if (is_zero(s.o_l)) out.push_back(Degeneracy::ZeroOl);
  if (is_zero(s.o_r)) out.push_back(Degeneracy::ZeroOr);
  if (is_zero(s.omega)) out.push_back(Degeneracy::ZeroOmega);
  if (is_constant(s.o_l) && is_constant(s.o_r) && is_constant(s.omega)) {
    out.push_back(Degeneracy::AllConstant);
  }
  if (is_proportional(s.o_l, s.o_r)) out.push_back(Degeneracy::ProportionalWheels);
  if (is_proportional(s.omega, s.o_l)) out.push_back(Degeneracy::OmegaProportionalOl);
  return out;
}

ObservabilityReport observability_report(const InferredMotion& motion, const ParamSet& params,
                                         double tol_ratio) {
  ObservabilityReport r = analyze(build_reduced_matrix(motion, params), tol_ratio);
  r.variant = variant_name(params.variant);
  for (const LabeledVector& lv : analytic_null_vectors(motion, params)) {
    MatchedDirection md;
    md.label = lv.label;
    md.angle_deg = kernel_angle_deg(r, lv.k);
    md.matched = md.angle_deg < kAlignmentTolDeg;
    r.matched_null_directions.push_back(md);
    if (md.matched && lv.has_class &&
        std::find(r.degeneracy.begin(), r.degeneracy.end(), lv.cls) == r.degeneracy.end()) {
      r.degeneracy.push_back(lv.cls);
    }
  }
  if (motion.samples.size() >= 10) r.motion_flags = classify_motion(motion);
  return r;
}

IdentifiabilityResult empirical_identifiability(const ScenarioConfig& cfg, ObsVariant variant,
                                                std::uint64_t seed, double fraction) {
  IdentifiabilityResult res;
  res.variant = variant_name(variant);
  EstimatorMode mode;
  switch (variant) {
    case ObsVariant::Mono5: mode = EstimatorMode::VoXi5; break;
    case ObsVariant::Mono3: mode = EstimatorMode::VoIcr3; break;
    case ObsVariant::Vio5: mode = EstimatorMode::VioXi5; break;
    default:
      throw Error(ErrorCategory::InvalidArgument,
                  std::string(variant_name(variant)) + " has no estimator counterpart");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCategory::InvalidArgument, "fraction must be in (0, 1]");
  }
  res.mode = mode_name(mode);

  const SimulatedScenario sim = simulate_scenario(cfg, seed);
  const bool imu = mode_uses_imu(mode);
  const InferredMotion motion = infer_motion(sim.trajectory, sim.xi.at(0.0), cfg.rig, imu, 1.0,
                                             cfg.observability_samples);
  ParamSet ps;
  ps.variant = variant;
  ps.xi = sim.xi.at(0.0);
  ps.extrinsics_OC = cfg.rig.extrinsics_OC;
  res.analytic = observability_report(motion, ps, cfg.observability_tol_ratio);

  const RunResult run = run_estimator(sim.log, cfg, mode, initial_xi(cfg, sim.log, seed), seed);
  if (run.failed) {
    res.run_failed = true;
    res.error = run.error_category + ": " + run.error_message;
  }
  if (run.keyframes.empty()) return res;
  const double t0 = run.keyframes.front().t;
  const double t_end = sim.trajectory.back().t;
  const double t_cut = t0 + fraction * (t_end - t0);
  const KeyframeRecord* last = &run.keyframes.front();
  for (const KeyframeRecord& k : run.keyframes) {
    if (k.t > t_cut) break;
    last = &k;
  }
  static const char* kNames[5] = {"X_v", "Y_l", "Y_r", "alpha_l", "alpha_r"};
  const auto mask = mode_xi_mask(mode);
  for (int i = 0; i < 5; ++i) {
    if (!mask[i]) continue;
    const double a = run.keyframes.front().xi_std[i];
    const double b = last->xi_std[i];
    res.parameters.push_back(kNames[i]);
    res.initial_std.push_back(a);
    res.final_std.push_back(b);
    const double ratio = b > 0.0 ? a / b : std::numeric_limits<double>::infinity();
    res.contraction.push_back(ratio);
    res.contracted.push_back(ratio >= 2.0);
  }
  return res;
}

}  // namespace skidsteer
