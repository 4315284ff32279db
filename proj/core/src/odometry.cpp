#include "skidsteer/odometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "skidsteer/errors.hpp"

namespace skidsteer {

namespace {

struct Node {
  double t;
  double o_l;
  double o_r;
};

EncoderReading interpolate(std::span<const EncoderReading> m, double t) {
  auto it = std::lower_bound(m.begin(), m.end(), t,
                             [](const EncoderReading& r, double v) { return r.t < v; });
  if (it != m.end() && it->t == t) return *it;
  if (it == m.begin() || it == m.end()) {
    throw Error(ErrorCategory::MeasurementGap,
                "encoder samples do not bracket t = " + std::to_string(t));
  }
  const EncoderReading& b = *it;
  const EncoderReading& a = *(it - 1);
  if (b.t - a.t > kMaxEncoderGap) {
    throw Error(ErrorCategory::MeasurementGap,
                "encoder gap of " + std::to_string(b.t - a.t) + " s near t = " + std::to_string(t));
  }
  const double s = (t - a.t) / (b.t - a.t);
  return EncoderReading{t, a.o_l + s * (b.o_l - a.o_l), a.o_r + s * (b.o_r - a.o_r)};
}

std::vector<Node> build_nodes(std::span<const EncoderReading> m, double t0, double t1) {
  std::vector<Node> nodes;
  EncoderReading a = interpolate(m, t0);
  nodes.push_back({t0, a.o_l, a.o_r});
  auto it = std::upper_bound(m.begin(), m.end(), t0,
                             [](double v, const EncoderReading& r) { return v < r.t; });
  for (; it != m.end() && it->t < t1; ++it) {
    if (it->t - nodes.back().t > kMaxEncoderGap) {
      throw Error(ErrorCategory::MeasurementGap,
                  "encoder gap of " + std::to_string(it->t - nodes.back().t) + " s at t = " +
                      std::to_string(it->t));
    }
    nodes.push_back({it->t, it->o_l, it->o_r});
  }
  EncoderReading b = interpolate(m, t1);
  if (t1 - nodes.back().t > kMaxEncoderGap) {
    throw Error(ErrorCategory::MeasurementGap, "encoder gap before t = " + std::to_string(t1));
  }
  nodes.push_back({t1, b.o_l, b.o_r});
  return nodes;
}

}  // namespace

ArcStep arc_step(double phi) {
  double s, c1, ds, dc1;
  if (std::abs(phi) < 1e-2) {
    const double p2 = phi * phi;
    const double p4 = p2 * p2;
    s = 1.0 - p2 / 6.0 + p4 / 120.0 - p4 * p2 / 5040.0;
    c1 = phi * (0.5 - p2 / 24.0 + p4 / 720.0 - p4 * p2 / 40320.0);
    ds = phi * (-1.0 / 3.0 + p2 / 30.0 - p4 / 840.0 + p4 * p2 / 45360.0);
    dc1 = 0.5 - p2 / 8.0 + p4 / 144.0 - p4 * p2 / 5760.0;
  } else {
    const double sn = std::sin(phi), cs = std::cos(phi);
    s = sn / phi;
    c1 = (1.0 - cs) / phi;
    ds = (phi * cs - sn) / (phi * phi);
    dc1 = (phi * sn - (1.0 - cs)) / (phi * phi);
  }
  ArcStep a;
  a.V << s, -c1, 0.0, c1, s, 0.0, 0.0, 0.0, 1.0;
  a.dV << ds, -dc1, 0.0, dc1, ds, 0.0, 0.0, 0.0, 0.0;
  return a;
}

MatX floored_inverse(const MatX& cov, double floor) {
  MatX sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<MatX> es(sym);
  VecX inv = es.eigenvalues().cwiseMax(floor).cwiseInverse();
  MatX out = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

PropagationResult propagate_odometry(const OdometryState& prev,
                                     std::span<const EncoderReading> measurements,
                                     double t_start, double t_end, const NoiseConfig& noise,
                                     const PropagationOptions& opts) {
  PropagationResult res;
  res.predicted = prev;
  res.xi_lin = prev.xi;
  if (t_end <= t_start) {
    if (opts.with_covariance) {
      res.noise_information = floored_inverse(res.covariance, kInformationFloor);
    }
    return res;
  }
  check_params(prev.xi);
  const std::vector<Node> nodes = build_nodes(measurements, t_start, t_end);

  const Vec3 e3 = Vec3::UnitZ();
  Quat q = prev.pose.q;
  Vec3 p = prev.pose.p;
  // Relative increment, starting from identity.
  Quat dq = Quat::Identity();
  Vec3 dp = Vec3::Zero();
  Mat35 dth_dxi = Mat35::Zero();
  Mat35 dp_dxi = Mat35::Zero();
  Mat11 J = Mat11::Identity();
  Mat11 P = Mat11::Zero();
  const double var_o = noise.sigma_encoder * noise.sigma_encoder;

  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double dt = nodes[i + 1].t - nodes[i].t;
    if (dt <= 0.0) continue;
    const double ol = 0.5 * (nodes[i].o_l + nodes[i + 1].o_l);
    const double orr = 0.5 * (nodes[i].o_r + nodes[i + 1].o_r);
    const BodyVelocity bv = forward_kinematics(prev.xi, ol, orr);
    const KinematicJacobians kj = jacobians(prev.xi, ol, orr);
    const Vec3 v(bv.v_x, bv.v_y, 0.0);
    const double w = bv.omega_z;
    const Quat c_full = so3_exp(e3 * (w * dt));
    const Mat3 C_full = c_full.toRotationMatrix();
    const ArcStep arc = arc_step(w * dt);
    const Vec3 h = arc.V * v * dt;
    const Eigen::Matrix<double, 1, 5> Jw = kj.J_wxi.row(2);
    const Eigen::Matrix<double, 1, 2> Jwo = kj.J_wo.row(2);
    // d(V v dt)/dxi through both v and the yaw increment.
    const Mat35 dh_dxi = arc.V * dt * kj.J_vxi + arc.dV * v * (dt * dt) * Jw;
    const Eigen::Matrix<double, 3, 2> dh_dn = arc.V * dt * kj.J_vo + arc.dV * v * (dt * dt) * Jwo;

    // Relative increment sensitivity.
    const Mat3 dR = dq.toRotationMatrix();
    dp_dxi = dp_dxi - dR * skew(h) * dth_dxi + dR * dh_dxi;
    dth_dxi = C_full.transpose() * dth_dxi + e3 * dt * Jw;
    dp = dp + dR * h;
    dq = normalized(dq * c_full);

    const Mat3 R = q.toRotationMatrix();
    if (opts.with_covariance) {
      Mat11 F = Mat11::Identity();
      F.block<3, 3>(0, 0) = C_full.transpose();
      F.block<3, 5>(0, 6) = e3 * dt * Jw;
      F.block<3, 3>(3, 0) = -R * skew(h);
      F.block<3, 5>(3, 6) = R * dh_dxi;
      Eigen::Matrix<double, 11, 2> G = Eigen::Matrix<double, 11, 2>::Zero();
      G.block<3, 2>(0, 0) = e3 * dt * Jwo;
      G.block<3, 2>(3, 0) = R * dh_dn;
      P = F * P * F.transpose() + var_o * G * G.transpose();
      const double var_s = noise.sigma_planar_slack * noise.sigma_planar_slack * dt * dt;
      P(0, 0) += var_s;
      P(1, 1) += var_s;
      const Vec3 up = R.col(2);
      P.block<3, 3>(3, 3) += var_s * up * up.transpose();
      for (int k = 0; k < 5; ++k) {
        if (opts.xi_walk_mask[k]) {
          P(6 + k, 6 + k) += noise.sigma_xi_walk[k] * noise.sigma_xi_walk[k] * dt;
        }
      }
      J = F * J;
    }
    p = p + R * h;
    q = normalized(q * c_full);
  }

  res.predicted.pose = Pose{q, p};
  res.delta_q = dq;
  res.delta_p = dp;
  res.dtheta_dxi = dth_dxi;
  res.dp_dxi = dp_dxi;
  res.duration = t_end - t_start;
  if (opts.with_covariance) {
    res.jacobian_wrt_prev = J;
    res.covariance = 0.5 * (P + P.transpose());
    res.noise_information = floored_inverse(res.covariance, kInformationFloor);
  } else {
    // Closed form of the chained transition, which does not need the noise.
    const Mat3 R0 = prev.pose.R();
    res.jacobian_wrt_prev.setIdentity();
    res.jacobian_wrt_prev.block<3, 3>(0, 0) = dq.toRotationMatrix().transpose();
    res.jacobian_wrt_prev.block<3, 5>(0, 6) = dth_dxi;
    res.jacobian_wrt_prev.block<3, 3>(3, 0) = -R0 * skew(dp);
    res.jacobian_wrt_prev.block<3, 5>(3, 6) = R0 * dp_dxi;
  }
  return res;
}

Vec11 odometry_factor_residual(const OdometryState& state_k, const OdometryState& state_km1,
                               const PropagationResult& prop) {
  const Vec5 dxi = state_km1.xi.vec() - prop.xi_lin.vec();
  const Vec3 th = prop.dtheta_dxi * dxi;
  const Quat corr(1.0, 0.5 * th.x(), 0.5 * th.y(), 0.5 * th.z());
  const Quat q_pred = state_km1.pose.q * prop.delta_q * corr;
  const Vec3 p_pred = state_km1.pose.p + state_km1.pose.q * (prop.delta_p + prop.dp_dxi * dxi);
  Vec11 r;
  r.segment<3>(0) = gibbs(q_pred.conjugate() * state_k.pose.q);
  r.segment<3>(3) = state_k.pose.p - p_pred;
  r.segment<5>(6) = state_k.xi.vec() - state_km1.xi.vec();
  return r;
}

}  // namespace skidsteer
