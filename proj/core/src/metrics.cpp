#include "skidsteer/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "skidsteer/errors.hpp"

namespace skidsteer {

Pose interpolate_pose(const std::vector<StampedPose>& track, double t) {
  if (track.empty()) throw Error(ErrorCategory::InvalidArgument, "empty pose track");
  const double eps = 1e-9;
  if (t < track.front().t - eps || t > track.back().t + eps) {
    throw Error(ErrorCategory::InvalidArgument,
                "time " + std::to_string(t) + " outside the ground-truth range");
  }
  auto it = std::lower_bound(track.begin(), track.end(), t,
                             [](const StampedPose& s, double v) { return s.t < v; });
  if (it == track.end()) return track.back().pose;
  if (it == track.begin() || it->t == t) return it->pose;
  const StampedPose& b = *it;
  const StampedPose& a = *(it - 1);
  const double s = (t - a.t) / (b.t - a.t);
  Pose p;
  p.p = (1.0 - s) * a.pose.p + s * b.pose.p;
  p.q = a.pose.q.slerp(s, b.pose.q).normalized();
  return p;
}

std::vector<StampedPose> matched_ground_truth(const std::vector<StampedPose>& est,
                                              const std::vector<StampedPose>& gt) {
  std::vector<StampedPose> out;
  out.reserve(est.size());
  for (const auto& e : est) out.push_back({e.t, interpolate_pose(gt, e.t)});
  return out;
}

std::vector<StampedPose> align_first_pose(const std::vector<StampedPose>& est,
                                          const std::vector<StampedPose>& gt) {
  if (est.empty()) return {};
  const Pose g0 = interpolate_pose(gt, est.front().t);
  const Pose T = g0.compose(est.front().pose.inverse());
  std::vector<StampedPose> out;
  out.reserve(est.size());
  for (const auto& e : est) out.push_back({e.t, T.compose(e.pose)});
  return out;
}

AteResult absolute_trajectory_error(const std::vector<StampedPose>& est,
                                    const std::vector<StampedPose>& gt) {
  AteResult r;
  const auto aligned = align_first_pose(est, gt);
  const auto ref = matched_ground_truth(est, gt);
  double st = 0.0, sr = 0.0;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    st += (aligned[i].pose.p - ref[i].pose.p).squaredNorm();
    const double a = rotation_angle(ref[i].pose.q.conjugate() * aligned[i].pose.q);
    sr += a * a;
  }
  r.count = aligned.size();
  if (r.count > 0) {
    r.translation_rmse = std::sqrt(st / static_cast<double>(r.count));
    r.rotation_rmse = std::sqrt(sr / static_cast<double>(r.count));
  }
  return r;
}

DriftResult final_drift(const std::vector<StampedPose>& est, const std::vector<StampedPose>& gt) {
  DriftResult d;
  if (est.empty()) return d;
  const auto aligned = align_first_pose(est, gt);
  d.xyz = aligned.back().pose.p - interpolate_pose(gt, est.back().t).p;
  d.norm = d.xyz.norm();
  return d;
}

std::vector<RpeEntry> relative_pose_error(const std::vector<StampedPose>& est,
                                          const std::vector<StampedPose>& gt,
                                          const std::vector<double>& lengths) {
  const auto ref = matched_ground_truth(est, gt);
  std::vector<double> dist(ref.size(), 0.0);
  for (std::size_t i = 1; i < ref.size(); ++i) {
    dist[i] = dist[i - 1] + (ref[i].pose.p - ref[i - 1].pose.p).norm();
  }
  std::vector<RpeEntry> out;
  for (double L : lengths) {
    RpeEntry e;
    e.length = L;
    double st = 0.0, sr = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      j = std::max(j, i + 1);
      while (j < ref.size() && dist[j] - dist[i] < L) ++j;
      if (j >= ref.size()) break;
      const Pose dg = ref[i].pose.inverse().compose(ref[j].pose);
      const Pose de = est[i].pose.inverse().compose(est[j].pose);
      const Pose err = dg.inverse().compose(de);
      st += err.p.norm();
      sr += rotation_angle(err.q);
      ++e.count;
    }
    if (e.count > 0) {
      e.mean_translation = st / static_cast<double>(e.count);
      e.mean_rotation = sr / static_cast<double>(e.count);
    }
    out.push_back(e);
  }
  return out;
}

bool rpe_non_decreasing(const std::vector<RpeEntry>& table) {
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (table[i].count == 0 || table[i - 1].count == 0) continue;
    if (table[i].mean_translation < table[i - 1].mean_translation) return false;
  }
  return true;
}

}  // namespace skidsteer
