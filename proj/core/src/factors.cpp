#include "skidsteer/factors.hpp"

#include <string>

#include "skidsteer/errors.hpp"
#include "skidsteer/vision.hpp"

namespace skidsteer {

int tangent_dim(BlockKind kind) {
  switch (kind) {
    case BlockKind::Pose: return 6;
    case BlockKind::Xi: return 5;
    case BlockKind::SpeedBias: return 9;
    case BlockKind::Manifold: return 6;
    case BlockKind::Landmark: return 3;
  }
  return 0;
}

const char* factor_kind_name(FactorKind k) {
  switch (k) {
    case FactorKind::Prior: return "prior";
    case FactorKind::Visual: return "visual";
    case FactorKind::Imu: return "imu";
    case FactorKind::Odometer: return "odometer";
    case FactorKind::Manifold: return "manifold";
  }
  return "?";
}

bool Values::contains(const BlockKey& k) const {
  switch (k.kind) {
    case BlockKind::Pose: return poses.count(k.id) > 0;
    case BlockKind::Xi: return xi.count(k.id) > 0;
    case BlockKind::SpeedBias: return sb.count(k.id) > 0;
    case BlockKind::Manifold: return m.count(k.id) > 0;
    case BlockKind::Landmark: return lm.count(k.id) > 0;
  }
  return false;
}

void Values::retract(const BlockKey& k, const VecX& d) {
  switch (k.kind) {
    case BlockKind::Pose: {
      Pose& p = poses.at(k.id);
      p = boxplus(p, Vec6(d));
      break;
    }
    case BlockKind::Xi: xi.at(k.id) += d; break;
    case BlockKind::SpeedBias: sb.at(k.id) += d; break;
    case BlockKind::Manifold: m.at(k.id) += d; break;
    case BlockKind::Landmark: lm.at(k.id) += d; break;
  }
}

VecX Values::local(const BlockKey& k, const Values& b) const {
  switch (k.kind) {
    case BlockKind::Pose: return boxminus(poses.at(k.id), b.poses.at(k.id));
    case BlockKind::Xi: return xi.at(k.id) - b.xi.at(k.id);
    case BlockKind::SpeedBias: return sb.at(k.id) - b.sb.at(k.id);
    case BlockKind::Manifold: return m.at(k.id) - b.m.at(k.id);
    case BlockKind::Landmark: return lm.at(k.id) - b.lm.at(k.id);
  }
  return VecX();
}

MatX Values::local_jacobian(const BlockKey& k, const Values& b) const {
  const int n = tangent_dim(k.kind);
  MatX J = MatX::Identity(n, n);
  if (k.kind == BlockKind::Pose) {
    const Vec3 g = extract_attitude_error(b.poses.at(k.id).q, poses.at(k.id).q);
    J.topLeftCorner<3, 3>() = gibbs_right_jacobian(g);
  }
  return J;
}

void Values::copy_block(const BlockKey& k, const Values& from) {
  switch (k.kind) {
    case BlockKind::Pose: poses[k.id] = from.poses.at(k.id); break;
    case BlockKind::Xi: xi[k.id] = from.xi.at(k.id); break;
    case BlockKind::SpeedBias: sb[k.id] = from.sb.at(k.id); break;
    case BlockKind::Manifold: m[k.id] = from.m.at(k.id); break;
    case BlockKind::Landmark: lm[k.id] = from.lm.at(k.id); break;
  }
}

void Values::erase(const BlockKey& k) {
  switch (k.kind) {
    case BlockKind::Pose: poses.erase(k.id); break;
    case BlockKind::Xi: xi.erase(k.id); break;
    case BlockKind::SpeedBias: sb.erase(k.id); break;
    case BlockKind::Manifold: m.erase(k.id); break;
    case BlockKind::Landmark: lm.erase(k.id); break;
  }
}

VisualFactor::VisualFactor(long pose_id, long landmark_key, const Vec2& uv, const SensorRig& rig,
                           double sigma_pixel)
    : uv_(uv), rig_(rig) {
  keys_ = {{BlockKind::Pose, pose_id}, {BlockKind::Landmark, landmark_key}};
  info_ = MatX::Identity(2, 2) / (sigma_pixel * sigma_pixel);
}

VecX VisualFactor::evaluate(const Values& v, std::vector<MatX>* J) const {
  VisualJacobians vj;
  const Vec2 r = visual_residual(v.poses.at(keys_[0].id), v.lm.at(keys_[1].id), uv_, rig_,
                                 J ? &vj : nullptr);
  if (J) {
    J->resize(2);
    (*J)[0] = vj.d_pose;
    (*J)[1] = vj.d_landmark;
  }
  return r;
}

OdometerFactor::OdometerFactor(long id_km1, long id_k, std::vector<EncoderReading> slice,
                               double t0, double t1, const MatX& information)
    : slice_(std::move(slice)), t0_(t0), t1_(t1) {
  keys_ = {{BlockKind::Pose, id_km1}, {BlockKind::Xi, id_km1}, {BlockKind::Pose, id_k},
           {BlockKind::Xi, id_k}};
  info_ = information;
}

VecX OdometerFactor::evaluate(const Values& v, std::vector<MatX>* J) const {
  const Pose& a = v.poses.at(keys_[0].id);
  const Vec5& xa = v.xi.at(keys_[1].id);
  const Pose& b = v.poses.at(keys_[2].id);
  const Vec5& xb = v.xi.at(keys_[3].id);
  PropagationOptions opts;
  opts.with_covariance = false;
  NoiseConfig unused;
  const PropagationResult inc = propagate_odometry(
      OdometryState{Pose::Identity(), KinematicParams::from_vec(xa)}, slice_, t0_, t1_, unused, opts);
  const Quat q_pred = a.q * inc.delta_q;
  const Mat3 Ra = a.R();
  VecX r(11);
  const Vec3 g = gibbs(q_pred.conjugate() * b.q);
  r.segment<3>(0) = g;
  r.segment<3>(3) = b.p - a.p - Ra * inc.delta_p;
  r.segment<5>(6) = xb - xa;
  if (J) {
    J->resize(4);
    MatX Ja = MatX::Zero(11, 6), Jxa = MatX::Zero(11, 5), Jb = MatX::Zero(11, 6),
         Jxb = MatX::Zero(11, 5);
    const Mat3 JL = gibbs_left_jacobian(g);
    Ja.block<3, 3>(0, 0) = -JL * inc.delta_q.toRotationMatrix().transpose();
    Ja.block<3, 3>(3, 0) = Ra * skew(inc.delta_p);
    Ja.block<3, 3>(3, 3) = -Mat3::Identity();
    Jb.block<3, 3>(0, 0) = gibbs_right_jacobian(g);
    Jb.block<3, 3>(3, 3) = Mat3::Identity();
    Jxa.block<3, 5>(0, 0) = -JL * inc.dtheta_dxi;
    Jxa.block<3, 5>(3, 0) = -Ra * inc.dp_dxi;
    Jxa.block<5, 5>(6, 0) = -MatX::Identity(5, 5);
    Jxb.block<5, 5>(6, 0) = MatX::Identity(5, 5);
    (*J)[0] = Ja;
    (*J)[1] = Jxa;
    (*J)[2] = Jb;
    (*J)[3] = Jxb;
  }
  return r;
}

ImuFactor::ImuFactor(long id_km1, long id_k, const ImuPreintegration& pre, const Vec3& gravity,
                     const Pose& ext_OI)
    : pre_(pre), gravity_(gravity), ext_(ext_OI) {
  keys_ = {{BlockKind::Pose, id_km1}, {BlockKind::SpeedBias, id_km1}, {BlockKind::Pose, id_k},
           {BlockKind::SpeedBias, id_k}};
  info_ = floored_inverse(pre.covariance, kInformationFloor);
}

VecX ImuFactor::evaluate(const Values& v, std::vector<MatX>* J) const {
  ImuResidualJacobians ij;
  const Vec15 r = imu_factor_residual(v.poses.at(keys_[2].id), v.poses.at(keys_[0].id),
                                      v.sb.at(keys_[3].id), v.sb.at(keys_[1].id), pre_, gravity_,
                                      ext_, J ? &ij : nullptr);
  if (J) {
    J->resize(4);
    (*J)[0] = ij.d_pose_km1;
    (*J)[1] = ij.d_sb_km1;
    (*J)[2] = ij.d_pose_k;
    (*J)[3] = ij.d_sb_k;
  }
  return r;
}

ManifoldFactor::ManifoldFactor(long pose_id, long m_id, long m_prev_id, const Vec9& w)
    : has_prev_(true) {
  keys_ = {{BlockKind::Pose, pose_id}, {BlockKind::Manifold, m_id},
           {BlockKind::Manifold, m_prev_id}};
  info_ = w.asDiagonal();
}

ManifoldFactor::ManifoldFactor(long pose_id, long m_id, const Vec9& w) : has_prev_(false) {
  keys_ = {{BlockKind::Pose, pose_id}, {BlockKind::Manifold, m_id}};
  info_ = w.tail<3>().asDiagonal();
}

VecX ManifoldFactor::evaluate(const Values& v, std::vector<MatX>* J) const {
  const Pose& pose = v.poses.at(keys_[0].id);
  ManifoldParams mk{v.m.at(keys_[1].id)};
  ManifoldParams mp = has_prev_ ? ManifoldParams{v.m.at(keys_[2].id)} : mk;
  ManifoldJacobians mj;
  const Vec9 r = manifold_residual(pose, mk, mp, J ? &mj : nullptr);
  if (has_prev_) {
    if (J) {
      J->resize(3);
      (*J)[0] = mj.d_pose;
      (*J)[1] = mj.d_m;
      (*J)[2] = mj.d_m_prev;
    }
    return r;
  }
  if (J) {
    J->resize(2);
    (*J)[0] = mj.d_pose.bottomRows<3>();
    (*J)[1] = mj.d_m.bottomRows<3>();
  }
  return r.tail<3>();
}

PriorFactor::PriorFactor(std::vector<BlockKey> keys, Values lin_point, const MatX& information,
                         const VecX& gradient)
    : lin_(std::move(lin_point)), g_(gradient) {
  keys_ = std::move(keys);
  info_ = information;
  int n = 0;
  for (const auto& k : keys_) n += tangent_dim(k.kind);
  if (info_.rows() != n || info_.cols() != n || g_.size() != n) {
    throw Error(ErrorCategory::InvalidArgument, "prior dimension mismatch");
  }
}

VecX PriorFactor::evaluate(const Values& v, std::vector<MatX>* J) const {
  int n = 0;
  for (const auto& k : keys_) n += tangent_dim(k.kind);
  VecX r(n);
  if (J) J->resize(keys_.size());
  int off = 0;
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    const int d = tangent_dim(keys_[i].kind);
    r.segment(off, d) = v.local(keys_[i], lin_);
    if (J) {
      MatX Ji = MatX::Zero(n, d);
      Ji.block(off, 0, d, d) = v.local_jacobian(keys_[i], lin_);
      (*J)[i] = Ji;
    }
    off += d;
  }
  return r;
}

}  // namespace skidsteer
