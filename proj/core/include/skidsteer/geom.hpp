#pragma once

// Rotation and pose plumbing.
//
// Quaternions are Eigen::Quaterniond everywhere: Hamilton product,
// constructor order (w, x, y, z), storage order (x, y, z, w). A quaternion
// q_AB maps vectors from frame B into frame A.
//
// Attitude errors compose on the right: R = R_hat * (I + [dtheta]x). The
// retraction normalizes the quaternion [1, dtheta/2], and the matching chart
// reads the error back as the Gibbs vector 2 * q.vec() / q.w(). The pair is an
// exact inverse, and both agree with the exponential map to second order.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skidsteer {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

using Rotation = Quat;

struct Pose {
  Quat q = Quat::Identity();
  Vec3 p = Vec3::Zero();

  Mat3 R() const { return q.toRotationMatrix(); }
  Vec3 transform(const Vec3& x) const { return q * x + p; }
  Pose compose(const Pose& rhs) const;
  Pose inverse() const;
  static Pose Identity() { return Pose{}; }
};

Mat3 skew(const Vec3& v);

Quat apply_attitude_error(const Quat& q_hat, const Vec3& dtheta);
Vec3 extract_attitude_error(const Quat& q_hat, const Quat& q);

// Gibbs chart of a (not necessarily unit) quaternion.
Vec3 gibbs(const Quat& q);
// d gibbs(q * dq(d)) / dd and d gibbs(dq(d) * q) / dd at d = 0, written in
// terms of g = gibbs(q).
Mat3 gibbs_right_jacobian(const Vec3& g);
Mat3 gibbs_left_jacobian(const Vec3& g);

Quat so3_exp(const Vec3& phi);
Vec3 so3_log(const Quat& q);
Mat3 so3_right_jacobian(const Vec3& phi);

// 6-vector ordering is [dtheta; dp], position error in the global frame.
Pose boxplus(const Pose& x, const Vec6& d);
Vec6 boxminus(const Pose& a, const Pose& b);

double rotation_angle(const Quat& q);
Quat normalized(const Quat& q);

}  // namespace skidsteer
