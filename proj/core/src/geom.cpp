#include "skidsteer/geom.hpp"

#include <cmath>

namespace skidsteer {

Pose Pose::compose(const Pose& rhs) const {
  return Pose{normalized(q * rhs.q), q * rhs.p + p};
}

Pose Pose::inverse() const {
  Quat qi = q.conjugate();
  return Pose{qi, -(qi * p)};
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Quat normalized(const Quat& q) {
  Quat r = q.normalized();
  if (r.w() < 0.0) r.coeffs() *= -1.0;
  return r;
}

Quat apply_attitude_error(const Quat& q_hat, const Vec3& dtheta) {
  Quat dq(1.0, 0.5 * dtheta.x(), 0.5 * dtheta.y(), 0.5 * dtheta.z());
  return normalized(q_hat * dq.normalized());
}

Vec3 gibbs(const Quat& q) { return 2.0 * q.vec() / q.w(); }

Vec3 extract_attitude_error(const Quat& q_hat, const Quat& q) {
  return gibbs(q_hat.conjugate() * q);
}

Mat3 gibbs_right_jacobian(const Vec3& g) {
  return Mat3::Identity() + 0.5 * skew(g) + 0.25 * g * g.transpose();
}

Mat3 gibbs_left_jacobian(const Vec3& g) {
  return Mat3::Identity() - 0.5 * skew(g) + 0.25 * g * g.transpose();
}

Quat so3_exp(const Vec3& phi) {
  double th = phi.norm();
  if (th < 1e-12) {
    return Quat(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z()).normalized();
  }
  Vec3 axis = phi / th;
  double s = std::sin(0.5 * th);
  return Quat(std::cos(0.5 * th), s * axis.x(), s * axis.y(), s * axis.z());
}

Vec3 so3_log(const Quat& qin) {
  Quat q = normalized(qin);
  double vn = q.vec().norm();
  if (vn < 1e-12) return 2.0 * q.vec();
  double th = 2.0 * std::atan2(vn, q.w());
  return th * q.vec() / vn;
}

Mat3 so3_right_jacobian(const Vec3& phi) {
  double th = phi.norm();
  Mat3 K = skew(phi);
  if (th < 1e-6) return Mat3::Identity() - 0.5 * K + K * K / 6.0;
  double th2 = th * th;
  return Mat3::Identity() - (1.0 - std::cos(th)) / th2 * K +
         (th - std::sin(th)) / (th2 * th) * K * K;
}

Pose boxplus(const Pose& x, const Vec6& d) {
  return Pose{apply_attitude_error(x.q, d.head<3>()), x.p + d.tail<3>()};
}

Vec6 boxminus(const Pose& a, const Pose& b) {
  Vec6 d;
  d.head<3>() = extract_attitude_error(b.q, a.q);
  d.tail<3>() = a.p - b.p;
  return d;
}

double rotation_angle(const Quat& q) { return so3_log(q).norm(); }

}  // namespace skidsteer
