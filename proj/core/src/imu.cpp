#include "skidsteer/imu.hpp"

#include <algorithm>
#include <string>

#include "skidsteer/errors.hpp"

namespace skidsteer {

namespace {

using Mat15x12 = Eigen::Matrix<double, 15, 12>;

ImuReading lerp(const ImuReading& a, const ImuReading& b, double t) {
  const double s = (t - a.t) / (b.t - a.t);
  return ImuReading{t, a.gyro + s * (b.gyro - a.gyro), a.accel + s * (b.accel - a.accel)};
}

ImuReading sample_at(std::span<const ImuReading> m, double t) {
  auto it = std::lower_bound(m.begin(), m.end(), t,
                             [](const ImuReading& r, double v) { return r.t < v; });
  if (it != m.end() && it->t == t) return *it;
  if (it == m.begin() || it == m.end()) {
    throw Error(ErrorCategory::TooFewSamples,
                "imu samples do not bracket t = " + std::to_string(t));
  }
  return lerp(*(it - 1), *it, t);
}

}  // namespace

ImuPreintegration imu_preintegrate(std::span<const ImuReading> m, const Vec6& bias,
                                   const NoiseConfig& noise) {
  if (m.size() < 2) {
    throw Error(ErrorCategory::TooFewSamples, "imu preintegration needs at least 2 readings");
  }
  ImuPreintegration out;
  out.bias_linearization_point = bias;
  const Vec3 ba = bias.head<3>();
  const Vec3 bg = bias.tail<3>();

  Quat dq = Quat::Identity();
  Vec3 dp = Vec3::Zero();
  Vec3 dv = Vec3::Zero();
  Mat15 J = Mat15::Identity();
  Mat15 P = Mat15::Zero();
  Eigen::Matrix<double, 12, 1> qdiag;

  for (std::size_t i = 0; i + 1 < m.size(); ++i) {
    const double dt = m[i + 1].t - m[i].t;
    if (dt <= 0.0) {
      throw Error(ErrorCategory::InvalidArgument, "imu timestamps must increase");
    }
    const Vec3 phi = (0.5 * (m[i].gyro + m[i + 1].gyro) - bg) * dt;
    const Quat e = so3_exp(phi);
    const Mat3 E = e.toRotationMatrix();
    const Mat3 Jr = so3_right_jacobian(phi);
    const Mat3 R0 = dq.toRotationMatrix();
    const Mat3 R1 = R0 * E;
    const Vec3 f0 = m[i].accel - ba;
    const Vec3 f1 = m[i + 1].accel - ba;
    const Vec3 abar = 0.5 * (R0 * f0 + R1 * f1);

    const Mat3 da_dth = 0.5 * (-R0 * skew(f0) - R1 * skew(f1) * E.transpose());
    const Mat3 da_dba = -0.5 * (R0 + R1);
    const Mat3 da_dbg = 0.5 * R1 * skew(f1) * Jr * dt;

    Mat15 F = Mat15::Identity();
    F.block<3, 3>(0, 0) = E.transpose();
    F.block<3, 3>(0, 12) = -Jr * dt;
    F.block<3, 3>(3, 0) = 0.5 * dt * dt * da_dth;
    F.block<3, 3>(3, 6) = Mat3::Identity() * dt;
    F.block<3, 3>(3, 9) = 0.5 * dt * dt * da_dba;
    F.block<3, 3>(3, 12) = 0.5 * dt * dt * da_dbg;
    F.block<3, 3>(6, 0) = dt * da_dth;
    F.block<3, 3>(6, 9) = dt * da_dba;
    F.block<3, 3>(6, 12) = dt * da_dbg;

    Mat15x12 G = Mat15x12::Zero();
    G.block<3, 3>(0, 0) = -Jr * dt;
    G.block<3, 3>(3, 0) = 0.5 * dt * dt * da_dbg;
    G.block<3, 3>(3, 3) = 0.5 * dt * dt * da_dba;
    G.block<3, 3>(6, 0) = dt * da_dbg;
    G.block<3, 3>(6, 3) = dt * da_dba;
    G.block<3, 3>(9, 6) = Mat3::Identity();
    G.block<3, 3>(12, 9) = Mat3::Identity();
    qdiag << Vec3::Constant(noise.sigma_gyro * noise.sigma_gyro),
        Vec3::Constant(noise.sigma_accel * noise.sigma_accel),
        Vec3::Constant(noise.sigma_accel_bias_walk * noise.sigma_accel_bias_walk * dt),
        Vec3::Constant(noise.sigma_gyro_bias_walk * noise.sigma_gyro_bias_walk * dt);

    P = F * P * F.transpose() + G * qdiag.asDiagonal() * G.transpose();
    J = F * J;

    dp = dp + dv * dt + 0.5 * abar * dt * dt;
    dv = dv + abar * dt;
    dq = normalized(dq * e);
  }

  out.delta_rotation = dq;
  out.delta_position = dp;
  out.delta_velocity = dv;
  out.covariance = 0.5 * (P + P.transpose());
  out.duration = m.back().t - m.front().t;
  out.dR_dbg = J.block<3, 3>(0, 12);
  out.dp_dba = J.block<3, 3>(3, 9);
  out.dp_dbg = J.block<3, 3>(3, 12);
  out.dv_dba = J.block<3, 3>(6, 9);
  out.dv_dbg = J.block<3, 3>(6, 12);
  return out;
}

ImuPreintegration imu_preintegrate(std::span<const ImuReading> m, double t0, double t1,
                                   const Vec6& bias, const NoiseConfig& noise) {
  if (t1 <= t0) {
    ImuPreintegration out;
    out.bias_linearization_point = bias;
    return out;
  }
  std::vector<ImuReading> seg;
  seg.push_back(sample_at(m, t0));
  auto it = std::upper_bound(m.begin(), m.end(), t0,
                             [](double v, const ImuReading& r) { return v < r.t; });
  for (; it != m.end() && it->t < t1; ++it) seg.push_back(*it);
  seg.push_back(sample_at(m, t1));
  return imu_preintegrate(seg, bias, noise);
}

Vec15 imu_factor_residual(const Pose& pose_k, const Pose& pose_km1, const Vec9& sb_k,
                          const Vec9& sb_km1, const ImuPreintegration& pre, const Vec3& gravity,
                          const Pose& ext_OI, ImuResidualJacobians* jac) {
  const double T = pre.duration;
  const Quat qa = pose_km1.q * ext_OI.q;
  const Quat qb = pose_k.q * ext_OI.q;
  const Vec3 pa = pose_km1.transform(ext_OI.p);
  const Vec3 pb = pose_k.transform(ext_OI.p);
  const Vec3 va = sb_km1.segment<3>(0);
  const Vec3 vb = sb_k.segment<3>(0);
  const Vec3 dba = sb_km1.segment<3>(3) - pre.bias_linearization_point.head<3>();
  const Vec3 dbg = sb_km1.segment<3>(6) - pre.bias_linearization_point.tail<3>();

  const Vec3 u = pre.dR_dbg * dbg;
  const Quat qc(1.0, 0.5 * u.x(), 0.5 * u.y(), 0.5 * u.z());
  const Quat q0 = pre.delta_rotation.conjugate() * qa.conjugate() * qb;
  const Quat qe = qc.conjugate() * q0;
  const Mat3 A = qa.toRotationMatrix();
  const Vec3 d_p = pb - pa - va * T - 0.5 * gravity * T * T;
  const Vec3 d_v = vb - va - gravity * T;

  Vec15 r;
  r.segment<3>(0) = gibbs(qe);
  r.segment<3>(3) = A.transpose() * d_p - (pre.delta_position + pre.dp_dba * dba + pre.dp_dbg * dbg);
  r.segment<3>(6) = A.transpose() * d_v - (pre.delta_velocity + pre.dv_dba * dba + pre.dv_dbg * dbg);
  r.segment<3>(9) = sb_k.segment<3>(3) - sb_km1.segment<3>(3);
  r.segment<3>(12) = sb_k.segment<3>(6) - sb_km1.segment<3>(6);

  if (jac) {
    const Vec3 g = r.segment<3>(0);
    const Mat3 ROI_T = ext_OI.q.toRotationMatrix().transpose();
    // Map from IMU-frame error [dth_I; dp_I] to odometer-frame error.
    auto chain = [&](const Pose& pose_o) {
      Eigen::Matrix<double, 6, 6> M = Eigen::Matrix<double, 6, 6>::Zero();
      M.block<3, 3>(0, 0) = ROI_T;
      M.block<3, 3>(3, 0) = -pose_o.R() * skew(ext_OI.p);
      M.block<3, 3>(3, 3) = Mat3::Identity();
      return M;
    };
    Eigen::Matrix<double, 15, 6> dA = Eigen::Matrix<double, 15, 6>::Zero();
    Eigen::Matrix<double, 15, 6> dB = Eigen::Matrix<double, 15, 6>::Zero();
    const Quat qc_full = pre.delta_rotation * qc;
    dA.block<3, 3>(0, 0) =
        -gibbs_left_jacobian(g) * qc_full.normalized().toRotationMatrix().transpose();
    dB.block<3, 3>(0, 0) = gibbs_right_jacobian(g);
    dA.block<3, 3>(3, 0) = skew(A.transpose() * d_p);
    dA.block<3, 3>(3, 3) = -A.transpose();
    dB.block<3, 3>(3, 3) = A.transpose();
    dA.block<3, 3>(6, 0) = skew(A.transpose() * d_v);
    jac->d_pose_km1 = dA * chain(pose_km1);
    jac->d_pose_k = dB * chain(pose_k);

    const double w0 = q0.w();
    const Vec3 v0 = q0.vec();
    const double W = qe.w();
    const Vec3 V = qe.vec();
    const Mat3 dg_du = (-w0 * Mat3::Identity() + skew(v0)) / W - V * v0.transpose() / (W * W);

    jac->d_sb_km1.setZero();
    jac->d_sb_k.setZero();
    jac->d_sb_km1.block<3, 3>(0, 6) = dg_du * pre.dR_dbg;
    jac->d_sb_km1.block<3, 3>(3, 0) = -A.transpose() * T;
    jac->d_sb_km1.block<3, 3>(3, 3) = -pre.dp_dba;
    jac->d_sb_km1.block<3, 3>(3, 6) = -pre.dp_dbg;
    jac->d_sb_km1.block<3, 3>(6, 0) = -A.transpose();
    jac->d_sb_km1.block<3, 3>(6, 3) = -pre.dv_dba;
    jac->d_sb_km1.block<3, 3>(6, 6) = -pre.dv_dbg;
    jac->d_sb_km1.block<3, 3>(9, 3) = -Mat3::Identity();
    jac->d_sb_km1.block<3, 3>(12, 6) = -Mat3::Identity();
    jac->d_sb_k.block<3, 3>(6, 0) = A.transpose();
    jac->d_sb_k.block<3, 3>(9, 3) = Mat3::Identity();
    jac->d_sb_k.block<3, 3>(12, 6) = Mat3::Identity();
  }
  return r;
}

}  // namespace skidsteer
