#include "skidsteer/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "skidsteer/errors.hpp"
#include "skidsteer/marginalize.hpp"
#include "skidsteer/vision.hpp"

namespace skidsteer {

const char* mode_name(EstimatorMode m) {
  switch (m) {
    case EstimatorMode::VioXi5: return "vio_xi5";
    case EstimatorMode::VoIcr3: return "vo_icr3";
    case EstimatorMode::VioFixedXi: return "vio_fixed_xi";
    case EstimatorMode::VioIcr3: return "vio_icr3";
    case EstimatorMode::VoXi5: return "vo_xi5";
  }
  return "?";
}

EstimatorMode parse_mode(const std::string& s) {
  for (EstimatorMode m : {EstimatorMode::VioXi5, EstimatorMode::VoIcr3, EstimatorMode::VioFixedXi,
                          EstimatorMode::VioIcr3, EstimatorMode::VoXi5}) {
    if (s == mode_name(m)) return m;
  }
  throw Error(ErrorCategory::InvalidArgument, "unknown estimator mode '" + s + "'");
}

bool mode_uses_imu(EstimatorMode m) {
  return m != EstimatorMode::VoIcr3 && m != EstimatorMode::VoXi5;
}

Eigen::Matrix<bool, 5, 1> mode_xi_mask(EstimatorMode m) {
  Eigen::Matrix<bool, 5, 1> mask = Eigen::Matrix<bool, 5, 1>::Constant(true);
  if (m == EstimatorMode::VioFixedXi) mask.setConstant(false);
  if (m == EstimatorMode::VoIcr3 || m == EstimatorMode::VioIcr3) mask.tail<2>().setConstant(false);
  return mask;
}

void EstimatorConfig::validate() const {
  if (!(keyframe_translation_gate > 0.0) || !(keyframe_rotation_gate > 0.0)) {
    throw Error(ErrorCategory::InvalidArgument, "keyframe gates must be positive");
  }
  if (window_size < 3) throw Error(ErrorCategory::InvalidArgument, "window_size must be >= 3");
  if (solver.max_iterations < 1) {
    throw Error(ErrorCategory::InvalidArgument, "solver max_iterations must be >= 1");
  }
  if ((manifold_weights.array() < 0.0).any()) {
    throw Error(ErrorCategory::InvalidArgument, "manifold weights must be non-negative");
  }
  noise.validate();
}

bool should_create_keyframe(const Pose& last, const Pose& predicted, const EstimatorConfig& cfg) {
  const double dp = (predicted.p - last.p).norm();
  const double dr = rotation_angle(last.q.conjugate() * predicted.q);
  return dp > cfg.keyframe_translation_gate || dr > cfg.keyframe_rotation_gate;
}

SolverSummary solve_window(Values& values, const std::vector<FactorPtr>& factors,
                           const ActiveMask& mask, const SolverOptions& opts) {
  SolverSummary s = solve_problem(values, factors, mask, opts);
  if (s.diverged) {
    throw Error(ErrorCategory::SolverDiverged,
                "cost did not decrease after " + std::to_string(opts.max_escalations) +
                    " damping escalations");
  }
  return s;
}

ManifoldParams manifold_from_pose(const Pose& pose) {
  const Vec3 n = pose.R().col(2);
  ManifoldParams m;
  m.m[3] = n.x() / n.z();
  m.m[4] = n.y() / n.z();
  m.m[5] = -(m.m[3] * pose.p.x() + m.m[4] * pose.p.y() + pose.p.z());
  return m;
}

SlidingWindowEstimator::SlidingWindowEstimator(const EstimatorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
}

void SlidingWindowEstimator::add_encoders(std::span<const EncoderReading> r) {
  for (const auto& e : r) {
    if (!encoders_.empty() && e.t <= encoders_.back().t) {
      throw Error(ErrorCategory::InvalidArgument, "encoder timestamps must increase");
    }
    encoders_.push_back(e);
  }
}

void SlidingWindowEstimator::add_imu(std::span<const ImuReading> r) {
  for (const auto& e : r) {
    if (!imu_.empty() && e.t <= imu_.back().t) {
      throw Error(ErrorCategory::InvalidArgument, "imu timestamps must increase");
    }
    imu_.push_back(e);
  }
}

ActiveMask SlidingWindowEstimator::mask() const {
  ActiveMask m;
  m.xi = mode_xi_mask(cfg_.mode);
  return m;
}

std::vector<EncoderReading> SlidingWindowEstimator::encoder_slice(double t0, double t1) const {
  auto lo = std::upper_bound(encoders_.begin(), encoders_.end(), t0,
                             [](double v, const EncoderReading& r) { return v < r.t; });
  if (lo != encoders_.begin()) --lo;
  auto hi = std::lower_bound(encoders_.begin(), encoders_.end(), t1,
                             [](const EncoderReading& r, double v) { return r.t < v; });
  if (hi == encoders_.end()) {
    throw Error(ErrorCategory::MeasurementGap,
                "no encoder reading at or after t = " + std::to_string(t1));
  }
  return std::vector<EncoderReading>(lo, hi + 1);
}

std::vector<ImuReading> SlidingWindowEstimator::imu_slice(double t0, double t1) const {
  auto lo = std::upper_bound(imu_.begin(), imu_.end(), t0,
                             [](double v, const ImuReading& r) { return v < r.t; });
  if (lo != imu_.begin()) --lo;
  auto hi = std::lower_bound(imu_.begin(), imu_.end(), t1,
                             [](const ImuReading& r, double v) { return r.t < v; });
  if (hi == imu_.end()) {
    throw Error(ErrorCategory::MeasurementGap,
                "no imu reading at or after t = " + std::to_string(t1));
  }
  return std::vector<ImuReading>(lo, hi + 1);
}

void SlidingWindowEstimator::initialize(const InitialState& init,
                                        const std::vector<FeatureObservation>& obs) {
  if (initialized()) throw Error(ErrorCategory::InvalidArgument, "estimator already initialized");
  check_params(init.xi);
  const bool imu = mode_uses_imu(cfg_.mode);
  const long id = 0;
  values_.poses[id] = init.pose;
  values_.xi[id] = init.xi.vec();
  if (imu) values_.sb[id] = init.speed_bias;
  if (cfg_.use_manifold) values_.m[id] = init.manifold.m;

  std::vector<BlockKey> keys{{BlockKind::Pose, id}, {BlockKind::Xi, id}};
  std::vector<double> stds(6, cfg_.prior_pose_std);
  for (int i = 0; i < 5; ++i) stds.push_back(cfg_.prior_xi_std[i]);
  if (imu) {
    keys.push_back({BlockKind::SpeedBias, id});
    for (int i = 0; i < 3; ++i) stds.push_back(cfg_.prior_velocity_std);
    for (int i = 0; i < 3; ++i) stds.push_back(cfg_.prior_accel_bias_std);
    for (int i = 0; i < 3; ++i) stds.push_back(cfg_.prior_gyro_bias_std);
  }
  if (cfg_.use_manifold) {
    keys.push_back({BlockKind::Manifold, id});
    for (int i = 0; i < 6; ++i) stds.push_back(cfg_.prior_manifold_std[i]);
  }
  const int n = static_cast<int>(stds.size());
  VecX info(n);
  for (int i = 0; i < n; ++i) info[i] = 1.0 / (stds[static_cast<std::size_t>(i)] * stds[static_cast<std::size_t>(i)]);
  Values lin;
  for (const auto& k : keys) lin.copy_block(k, values_);
  nonvisual_.push_back(
      std::make_shared<PriorFactor>(keys, lin, MatX(info.asDiagonal()), VecX::Zero(n)));
  if (cfg_.use_manifold) {
    nonvisual_.push_back(std::make_shared<ManifoldFactor>(id, id, cfg_.manifold_weights));
  }
  window_.push_back(id);
  kf_time_[id] = init.t;
  add_observations(id, obs);

  KeyframeRecord rec;
  rec.id = id;
  rec.t = init.t;
  rec.pose = init.pose;
  rec.xi = init.xi.vec();
  if (imu) rec.speed_bias = init.speed_bias;
  rec.manifold = init.manifold.m;
  rec.pose_std.setConstant(cfg_.prior_pose_std);
  const auto xm = mode_xi_mask(cfg_.mode);
  for (int i = 0; i < 5; ++i) rec.xi_std[i] = xm[i] ? cfg_.prior_xi_std[i] : 0.0;
  history_.push_back(rec);
}

void SlidingWindowEstimator::add_observations(long kf_id,
                                              const std::vector<FeatureObservation>& obs) {
  for (const auto& o : obs) {
    auto it = active_track_.find(o.landmark_id);
    long key;
    if (it == active_track_.end()) {
      key = next_track_key_++;
      active_track_[o.landmark_id] = key;
      tracks_[key].landmark_id = o.landmark_id;
    } else {
      key = it->second;
    }
    tracks_[key].obs[kf_id] = o.uv;
  }
}

void SlidingWindowEstimator::triangulate_pending() {
  TriangulationOptions topt;
  topt.sigma_pixel = cfg_.noise.sigma_pixel;
  topt.min_parallax = cfg_.min_triangulation_parallax;
  for (auto& [key, tr] : tracks_) {
    if (tr.triangulated || tr.obs.size() < 2) continue;
    std::vector<Vec2> uvs;
    std::vector<Pose> poses;
    for (const auto& [kf, uv] : tr.obs) {
      uvs.push_back(uv);
      poses.push_back(values_.poses.at(kf));
    }
    const TriangulationResult res = triangulate(uvs, poses, cfg_.rig, topt);
    if (res.ok) {
      tr.triangulated = true;
      values_.lm[key] = res.position;
    }
  }
}

void SlidingWindowEstimator::drop_negative_depth() {
  for (auto& [key, tr] : tracks_) {
    if (!tr.triangulated) continue;
    for (auto it = tr.obs.begin(); it != tr.obs.end();) {
      try {
        visual_residual(values_.poses.at(it->first), values_.lm.at(key), it->second, cfg_.rig);
        ++it;
      } catch (const Error& e) {
        if (e.category() != ErrorCategory::NegativeDepth) throw;
        it = tr.obs.erase(it);
      }
    }
    if (tr.obs.size() < 2) {
      tr.triangulated = false;
      values_.lm.erase(key);
    }
  }
}

std::vector<FactorPtr> SlidingWindowEstimator::visual_factors_of(long key) const {
  std::vector<FactorPtr> out;
  const Track& tr = tracks_.at(key);
  if (!tr.triangulated) return out;
  for (const auto& [kf, uv] : tr.obs) {
    out.push_back(std::make_shared<VisualFactor>(kf, key, uv, cfg_.rig, cfg_.noise.sigma_pixel));
  }
  return out;
}

std::vector<FactorPtr> SlidingWindowEstimator::window_factors() const {
  std::vector<FactorPtr> f = nonvisual_;
  for (const auto& [key, tr] : tracks_) {
    auto v = visual_factors_of(key);
    f.insert(f.end(), v.begin(), v.end());
  }
  return f;
}

bool SlidingWindowEstimator::process_frame(double t, const std::vector<FeatureObservation>& obs) {
  if (!initialized()) throw Error(ErrorCategory::InvalidArgument, "estimator not initialized");
  const long prev = window_.back();
  const double t0 = kf_time_.at(prev);
  if (t <= t0) throw Error(ErrorCategory::InvalidArgument, "frame time must increase");
  const std::vector<EncoderReading> enc = encoder_slice(t0, t);
  const OdometryState start{values_.poses.at(prev), KinematicParams::from_vec(values_.xi.at(prev))};
  PropagationOptions popt;
  popt.xi_walk_mask = mode_xi_mask(cfg_.mode);
  popt.with_covariance = false;
  const PropagationResult pred = propagate_odometry(start, enc, t0, t, cfg_.noise, popt);
  if (!should_create_keyframe(start.pose, pred.predicted.pose, cfg_)) return false;

  const long id = prev + 1;
  popt.with_covariance = true;
  const PropagationResult cov = propagate_odometry(start, enc, t0, t, cfg_.noise, popt);
  values_.poses[id] = pred.predicted.pose;
  values_.xi[id] = values_.xi.at(prev);
  nonvisual_.push_back(std::make_shared<OdometerFactor>(prev, id, enc, t0, t,
                                                        MatX(cov.noise_information)));
  if (mode_uses_imu(cfg_.mode)) {
    const Vec9& sb = values_.sb.at(prev);
    const std::vector<ImuReading> im = imu_slice(t0, t);
    const ImuPreintegration pre = imu_preintegrate(im, t0, t, sb.tail<6>(), cfg_.noise);
    Vec9 sb_new = sb;
    const Mat3 R_GI = values_.poses.at(prev).R() * cfg_.rig.extrinsics_OI.R();
    sb_new.head<3>() += cfg_.rig.gravity * pre.duration + R_GI * pre.delta_velocity;
    values_.sb[id] = sb_new;
    nonvisual_.push_back(
        std::make_shared<ImuFactor>(prev, id, pre, cfg_.rig.gravity, cfg_.rig.extrinsics_OI));
  }
  if (cfg_.use_manifold) {
    values_.m[id] = values_.m.at(prev);
    nonvisual_.push_back(std::make_shared<ManifoldFactor>(id, id, prev, cfg_.manifold_weights));
  }
  window_.push_back(id);
  kf_time_[id] = t;
  add_observations(id, obs);
  triangulate_pending();
  drop_negative_depth();

  std::vector<FactorPtr> factors = window_factors();
  try {
    last_summary_ = solve_window(values_, factors, mask(), cfg_.solver);
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::SolverDiverged) throw;
    throw Error(ErrorCategory::SolverDiverged,
                std::string(e.what()) + "; last good keyframe index " + std::to_string(prev));
  }
  drop_negative_depth();
  factors = window_factors();
  record_history(id, factors);
  marginalize_step(prev);
  return true;
}

void SlidingWindowEstimator::record_history(long id, const std::vector<FactorPtr>& factors) {
  KeyframeRecord rec;
  rec.id = id;
  rec.t = kf_time_.at(id);
  rec.pose = values_.poses.at(id);
  rec.xi = values_.xi.at(id);
  if (values_.sb.count(id)) rec.speed_bias = values_.sb.at(id);
  if (values_.m.count(id)) rec.manifold = values_.m.at(id);
  rec.landmarks = static_cast<int>(values_.lm.size());
  rec.iterations = last_summary_.iterations;
  if (cfg_.compute_marginals) {
    const BlockKey kp{BlockKind::Pose, id}, kx{BlockKind::Xi, id};
    const auto cov = marginal_covariances(values_, factors, mask(), cfg_.solver, {kp, kx});
    rec.pose_std = cov.at(kp).diagonal().cwiseMax(0.0).cwiseSqrt();
    rec.xi_std = cov.at(kx).diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  history_.push_back(rec);
}

void SlidingWindowEstimator::marginalize_step(long prev) {
  std::set<BlockKey> marg{{BlockKind::Xi, prev}};
  if (values_.sb.count(prev)) marg.insert({BlockKind::SpeedBias, prev});
  if (values_.m.count(prev)) marg.insert({BlockKind::Manifold, prev});

  std::vector<FactorPtr> factors = nonvisual_;
  std::vector<long> marg_tracks;
  long oldest = -1;
  if (static_cast<int>(window_.size()) > cfg_.window_size) {
    oldest = window_.front();
    marg.insert({BlockKind::Pose, oldest});
    for (const auto& [key, tr] : tracks_) {
      if (tr.obs.count(oldest)) marg_tracks.push_back(key);
    }
    for (long key : marg_tracks) {
      auto v = visual_factors_of(key);
      factors.insert(factors.end(), v.begin(), v.end());
    }
  }

  const LinearSystem sys = build_linear_system(values_, factors, cfg_.solver);
  const ActiveMask am = mask();
  std::vector<int> sel;       // active indices into sys
  std::vector<int> marg_pos;  // positions within sel
  std::vector<BlockKey> kept;
  for (const auto& k : sys.keys) {
    const bool m = marg.count(k) > 0;
    if (!m) kept.push_back(k);
    const int off = sys.offset.at(k);
    for (int d = 0; d < tangent_dim(k.kind); ++d) {
      if (!am.is_active(k.kind, d)) continue;
      if (m) marg_pos.push_back(static_cast<int>(sel.size()));
      sel.push_back(off + d);
    }
  }
  const int ns = static_cast<int>(sel.size());
  MatX H(ns, ns);
  VecX g(ns);
  for (int i = 0; i < ns; ++i) {
    g[i] = sys.b[sel[static_cast<std::size_t>(i)]];
    for (int j = 0; j < ns; ++j) H(i, j) = sys.H(sel[static_cast<std::size_t>(i)], sel[static_cast<std::size_t>(j)]);
  }
  const MarginalizationResult res = marginalize(H, g, marg_pos);
  if (res.singular_block) ++singular_marginalizations_;

  // Spread the result back onto the full tangent space of the kept keys.
  std::map<BlockKey, int> kept_off;
  int nk = 0;
  for (const auto& k : kept) {
    kept_off[k] = nk;
    nk += tangent_dim(k.kind);
  }
  std::vector<int> full_index;  // for each kept row of res
  for (int r : res.kept_indices) {
    const int sys_idx = sel[static_cast<std::size_t>(r)];
    for (const auto& k : kept) {
      const int off = sys.offset.at(k);
      if (sys_idx >= off && sys_idx < off + tangent_dim(k.kind)) {
        full_index.push_back(kept_off.at(k) + sys_idx - off);
        break;
      }
    }
  }
  MatX info = MatX::Zero(nk, nk);
  VecX grad = VecX::Zero(nk);
  for (std::size_t i = 0; i < full_index.size(); ++i) {
    grad[full_index[i]] = res.gradient[static_cast<int>(i)];
    for (std::size_t j = 0; j < full_index.size(); ++j) {
      info(full_index[i], full_index[j]) = res.information(static_cast<int>(i), static_cast<int>(j));
    }
  }
  Values lin;
  for (const auto& k : kept) lin.copy_block(k, values_);

  if (cfg_.record_factors) {
    for (const auto& f : factors) {
      if (f != marg_prior_) recorded_.push_back(f);
    }
  }
  for (const auto& k : marg) {
    retired_.copy_block(k, values_);
    values_.erase(k);
  }
  for (long key : marg_tracks) {
    if (values_.lm.count(key)) {
      retired_.lm[key] = values_.lm.at(key);
      values_.lm.erase(key);
    }
    const int lid = tracks_.at(key).landmark_id;
    auto it = active_track_.find(lid);
    if (it != active_track_.end() && it->second == key) active_track_.erase(it);
    tracks_.erase(key);
  }
  if (oldest >= 0) window_.erase(window_.begin());

  marg_prior_ = std::make_shared<PriorFactor>(kept, lin, info, grad);
  nonvisual_.assign(1, marg_prior_);
}

std::vector<FactorPtr> SlidingWindowEstimator::recorded_factors() const {
  std::vector<FactorPtr> out = recorded_;
  for (const auto& f : nonvisual_) {
    if (f != marg_prior_) out.push_back(f);
  }
  for (const auto& [key, tr] : tracks_) {
    auto v = visual_factors_of(key);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

Values SlidingWindowEstimator::all_values() const {
  Values v = retired_;
  for (const auto& [k, x] : values_.poses) v.poses[k] = x;
  for (const auto& [k, x] : values_.xi) v.xi[k] = x;
  for (const auto& [k, x] : values_.sb) v.sb[k] = x;
  for (const auto& [k, x] : values_.m) v.m[k] = x;
  for (const auto& [k, x] : values_.lm) v.lm[k] = x;
  return v;
}

}  // namespace skidsteer
