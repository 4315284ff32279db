#include "skidsteer/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "skidsteer/errors.hpp"
#include "skidsteer/odometry.hpp"

namespace skidsteer {

namespace {

constexpr double kMaxSurfaceGradient = 10.0;

Quat surface_attitude(const ManifoldParams& m, const Vec3& p, double yaw) {
  const Vec3 grad = m.gradient(p);
  const Vec3 n = grad.normalized();
  const Vec3 h(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 xb = (h - h.dot(n) * n).normalized();
  const Vec3 yb = n.cross(xb);
  Mat3 R;
  R.col(0) = xb;
  R.col(1) = yb;
  R.col(2) = n;
  return normalized(Quat(R));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double MotionProfile::total_duration() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.duration;
  return t;
}

void MotionProfile::velocity_at(double t, double& v_x, double& omega_z) const {
  v_x = 0.0;
  omega_z = 0.0;
  if (segments.empty()) return;
  double t0 = 0.0;
  std::size_t k = 0;
  while (k + 1 < segments.size() && t >= t0 + segments[k].duration) {
    t0 += segments[k].duration;
    ++k;
  }
  const ProfileSegment& seg = segments[k];
  double pv = seg.v_x, pw = seg.omega_z;
  if (k > 0) {
    pv = segments[k - 1].v_x;
    pw = segments[k - 1].omega_z;
  } else if (start_from_rest) {
    pv = 0.0;
    pw = 0.0;
  }
  const double tau = t - t0;
  const double ramp = std::min(ramp_time, 0.5 * seg.duration);
  double s = 1.0;
  if (ramp > 0.0 && tau < ramp) s = 0.5 * (1.0 - std::cos(std::numbers::pi * std::max(tau, 0.0) / ramp));
  v_x = pv + s * (seg.v_x - pv);
  omega_z = pw + s * (seg.omega_z - pw);
  // Excitation fades in with the first ramp so a rest start stays at rest.
  double fade = 1.0;
  if (start_from_rest && k == 0) fade = s;
  v_x += fade * speed_wobble * std::sin(speed_wobble_freq * t);
  omega_z += fade * omega_wobble * std::sin(omega_wobble_freq * t);
}

KinematicParams XiSchedule::at(double t) const {
  KinematicParams out = base;
  for (const auto& [tf, xi] : steps) {
    if (t >= tf) out = xi;
    else break;
  }
  return out;
}

XiSchedule XiSchedule::random_walk(const KinematicParams& base, const Vec5& sigma,
                                   double duration, double step, std::uint64_t seed) {
  XiSchedule s(base);
  std::mt19937_64 rng(derive_seed(seed, 11));
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec5 cur = base.vec();
  const double sq = std::sqrt(step);
  for (double t = step; t <= duration + 1e-12; t += step) {
    for (int i = 0; i < 5; ++i) cur[i] += sigma[i] * sq * nd(rng);
    s.steps.emplace_back(t, KinematicParams::from_vec(cur));
  }
  return s;
}

SensorRig SensorRig::default_rig() {
  SensorRig rig;
  Mat3 R_OC;
  R_OC.col(0) = Vec3(0.0, -1.0, 0.0);
  R_OC.col(1) = Vec3(0.0, 0.0, -1.0);
  R_OC.col(2) = Vec3(1.0, 0.0, 0.0);
  // Slight mounting tilt, 2 degrees down.
  const Quat tilt = so3_exp(Vec3(0.0, 0.0349, 0.0));
  rig.extrinsics_OC.q = normalized(tilt * Quat(R_OC));
  rig.extrinsics_OC.p = Vec3(0.25, 0.02, 0.45);
  rig.extrinsics_OI.q = normalized(so3_exp(Vec3(0.01, -0.015, 0.02)));
  rig.extrinsics_OI.p = Vec3(0.05, -0.03, 0.15);
  return rig;
}

Trajectory generate_trajectory(const MotionProfile& profile, const XiSchedule& xi, double dt) {
  if (!(dt > 0.0) || dt > 0.02) {
    throw Error(ErrorCategory::InvalidArgument, "trajectory dt must lie in (0, 0.02]");
  }
  const double T = profile.total_duration();
  const auto n = static_cast<std::size_t>(std::llround(T / dt)) + 1;
  Trajectory traj;
  traj.reserve(n);
  double x = profile.start_xy.x(), y = profile.start_xy.y(), yaw = profile.start_yaw;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    double v, w;
    profile.velocity_at(t, v, w);
    const KinematicParams xt = xi.at(t);
    TrajectorySample s;
    s.t = t;
    s.velocity = BodyVelocity{v, -xt.X_v * w, w};
    Vec3 p(x, y, 0.0);
    const Vec3 grad = profile.manifold.gradient(p);
    if (grad.head<2>().norm() > kMaxSurfaceGradient) {
      throw Error(ErrorCategory::ManifoldGradient,
                  "surface gradient exceeds 10 at t = " + std::to_string(t));
    }
    p.z() = profile.manifold.surface_z(x, y);
    s.pose = Pose{surface_attitude(profile.manifold, p, yaw), p};
    traj.push_back(s);

    // Advance with the mid-step velocity along the exact arc.
    const double tm = t + 0.5 * dt;
    profile.velocity_at(tm, v, w);
    const double vy = -xi.at(tm).X_v * w;
    const ArcStep arc = arc_step(w * dt);
    const Vec3 local = arc.V * Vec3(v, vy, 0.0) * dt;
    const double c = std::cos(yaw), sn = std::sin(yaw);
    x += c * local.x() - sn * local.y();
    y += sn * local.x() + c * local.y();
    yaw += w * dt;
  }
  return traj;
}

double path_length(const Trajectory& traj) {
  double L = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) L += (traj[i].pose.p - traj[i - 1].pose.p).norm();
  return L;
}

const TrajectorySample& sample_at(const Trajectory& traj, double t) {
  if (traj.size() < 2) return traj.front();
  const double dt = traj[1].t - traj[0].t;
  long i = std::lround((t - traj[0].t) / dt);
  i = std::clamp(i, 0L, static_cast<long>(traj.size()) - 1);
  return traj[static_cast<std::size_t>(i)];
}

std::vector<EncoderReading> synthesize_encoders(const Trajectory& traj, const XiSchedule& xi,
                                                const NoiseConfig& noise, double rate,
                                                std::uint64_t seed) {
  std::vector<EncoderReading> out;
  std::mt19937_64 rng(derive_seed(seed, 1));
  std::normal_distribution<double> nd(0.0, 1.0);
  const double T = traj.back().t;
  for (long j = 0;; ++j) {
    const double t = static_cast<double>(j) / rate;
    if (t > T + 1e-9) break;
    const TrajectorySample& s = sample_at(traj, t);
    const WheelSpeeds o = inverse_kinematics(xi.at(t), s.velocity.v_x, s.velocity.omega_z);
    const double nl = nd(rng), nr = nd(rng);
    out.push_back({t, o.o_l + noise.sigma_encoder * nl, o.o_r + noise.sigma_encoder * nr});
  }
  return out;
}

std::vector<ImuReading> synthesize_imu(const Trajectory& traj, const SensorRig& rig,
                                       const NoiseConfig& noise, double rate,
                                       std::uint64_t seed, const ImuSynthesisOptions& opts,
                                       std::vector<Vec6>* true_bias) {
  std::vector<ImuReading> out;
  std::mt19937_64 rng(derive_seed(seed, 2));
  std::normal_distribution<double> nd(0.0, 1.0);
  const double T = traj.back().t;
  const double h = traj[1].t - traj[0].t;
  const long last = static_cast<long>(traj.size()) - 1;
  auto imu_pose = [&](long i) {
    const Pose& po = traj[static_cast<std::size_t>(std::clamp(i, 0L, last))].pose;
    return po.compose(rig.extrinsics_OI);
  };
  Vec6 bias = opts.initial_bias;
  const double dts = 1.0 / rate;
  for (long j = 0;; ++j) {
    const double t = static_cast<double>(j) / rate;
    if (t > T + 1e-9) break;
    long i = std::lround(t / h);
    long ic = std::clamp(i, 1L, last - 1);
    const Pose a = imu_pose(ic - 1), b = imu_pose(ic), c = imu_pose(ic + 1);
    const Vec3 omega = so3_log(a.q.conjugate() * c.q) / (2.0 * h);
    const Vec3 acc = (c.p - 2.0 * b.p + a.p) / (h * h);
    const Pose cur = imu_pose(i);
    ImuReading r;
    r.t = t;
    r.gyro = omega;
    r.accel = cur.q.conjugate() * (acc - rig.gravity);
    if (true_bias) true_bias->push_back(bias);
    for (int k = 0; k < 3; ++k) {
      r.accel[k] += bias[k] + noise.sigma_accel * nd(rng);
      r.gyro[k] += bias[3 + k] + noise.sigma_gyro * nd(rng);
    }
    for (int k = 0; k < 3; ++k) bias[k] += noise.sigma_accel_bias_walk * std::sqrt(dts) * nd(rng);
    for (int k = 0; k < 3; ++k) bias[3 + k] += noise.sigma_gyro_bias_walk * std::sqrt(dts) * nd(rng);
    out.push_back(r);
  }
  return out;
}

std::vector<FeatureObservation> synthesize_features(const Trajectory& traj,
                                                    const std::vector<Landmark>& landmarks,
                                                    const SensorRig& rig,
                                                    const NoiseConfig& noise, double frame_rate,
                                                    std::uint64_t seed) {
  if (landmarks.empty()) {
    throw Error(ErrorCategory::InvalidArgument, "feature synthesis needs landmarks");
  }
  std::vector<FeatureObservation> out;
  std::mt19937_64 rng(derive_seed(seed, 3));
  std::normal_distribution<double> nd(0.0, 1.0);
  const double T = traj.back().t;
  const double cos_fov = std::cos(rig.fov_half_angle);
  for (int j = 0;; ++j) {
    const double t = static_cast<double>(j) / frame_rate;
    if (t > T + 1e-9) break;
    const Pose cam = sample_at(traj, t).pose.compose(rig.extrinsics_OC);
    const Mat3 RcT = cam.R().transpose();
    for (const Landmark& lm : landmarks) {
      const Vec3 pc = RcT * (lm.position - cam.p);
      const double r = pc.norm();
      if (pc.z() < rig.min_depth || r > rig.max_range) continue;
      if (pc.z() / r < cos_fov) continue;
      FeatureObservation ob;
      ob.frame_t = t;
      ob.frame_id = j;
      ob.landmark_id = lm.id;
      ob.uv = pc.head<2>() / pc.z();
      ob.uv.x() += noise.sigma_pixel * nd(rng);
      ob.uv.y() += noise.sigma_pixel * nd(rng);
      out.push_back(ob);
    }
  }
  return out;
}

std::vector<Landmark> scatter_landmarks(const Trajectory& traj, int count, double corridor_width,
                                        std::uint64_t seed) {
  if (count <= 0) throw Error(ErrorCategory::InvalidArgument, "landmark count must be positive");
  std::vector<double> cum(traj.size(), 0.0);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    cum[i] = cum[i - 1] + (traj[i].pose.p - traj[i - 1].pose.p).norm();
  }
  std::mt19937_64 rng(derive_seed(seed, 4));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Landmark> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double s = u01(rng) * cum.back();
    const double lateral = (u01(rng) - 0.5) * corridor_width;
    const double height = 0.2 + 2.8 * u01(rng);
    auto it = std::lower_bound(cum.begin(), cum.end(), s);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()),
                                                traj.size() - 1);
    const Pose& po = traj[i].pose;
    Vec3 fwd = po.R().col(0);
    fwd.z() = 0.0;
    if (fwd.norm() < 1e-9) fwd = Vec3::UnitX();
    fwd.normalize();
    const Vec3 left(-fwd.y(), fwd.x(), 0.0);
    out.push_back(Landmark{k, po.p + lateral * left + Vec3(0.0, 0.0, height)});
  }
  return out;
}

MotionProfile general_motion_profile(double target_length) {
  MotionProfile p;
  p.segments = {{8, 1.0, 0.0},   {6, 1.2, 0.30},  {5, 1.4, -0.20}, {7, 0.9, 0.45},
                {6, 1.5, 0.0},   {5, 1.1, -0.40}, {8, 1.3, 0.15},  {6, 0.8, -0.50},
                {7, 1.6, 0.05},  {5, 1.0, 0.35},  {6, 1.2, -0.25}, {8, 1.4, 0.0},
                {6, 0.9, 0.40},  {5, 1.3, -0.35}, {7, 1.1, 0.20},  {6, 1.5, -0.10},
                {6, 1.0, -0.45}, {7, 1.2, 0.25},  {5, 1.4, 0.0},   {6, 0.9, -0.30}};
  p.ramp_time = 1.5;
  p.omega_wobble = 0.08;
  p.omega_wobble_freq = 0.9;
  p.speed_wobble = 0.1;
  p.speed_wobble_freq = 0.45;
  p.manifold.m << 2e-4, 1e-4, -1.5e-4, 0.02, -0.015, 0.0;
  if (target_length > 0.0) {
    for (int iter = 0; iter < 8; ++iter) {
      double L = 0.0;
      const double dt = 0.01;
      const double T = p.total_duration();
      for (double t = 0.5 * dt; t < T; t += dt) {
        double v, w;
        p.velocity_at(t, v, w);
        L += std::abs(v) * dt;
      }
      const double scale = target_length / L;
      if (std::abs(scale - 1.0) < 1e-9) break;
      for (auto& s : p.segments) s.duration *= scale;
    }
  }
  return p;
}

MotionProfile straight_profile(double duration, double speed, double speed_wobble) {
  MotionProfile p;
  p.segments = {{duration, speed, 0.0}};
  p.ramp_time = 0.0;
  p.start_from_rest = false;
  p.speed_wobble = speed_wobble;
  p.speed_wobble_freq = 0.5;
  return p;
}

MotionProfile circle_profile(double duration, double speed, double omega) {
  MotionProfile p;
  p.segments = {{duration, speed, omega}};
  p.ramp_time = 0.0;
  p.start_from_rest = false;
  return p;
}

}  // namespace skidsteer
