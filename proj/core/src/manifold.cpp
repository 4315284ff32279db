#include "skidsteer/manifold.hpp"

namespace skidsteer {

double ManifoldParams::height_residual(const Vec3& p) const {
  const double x = p.x(), y = p.y();
  return 0.5 * (m[0] * x * x + 2.0 * m[1] * x * y + m[2] * y * y) + m[3] * x + m[4] * y + p.z() +
         m[5];
}

Vec3 ManifoldParams::gradient(const Vec3& p) const {
  const double x = p.x(), y = p.y();
  return Vec3(m[0] * x + m[1] * y + m[3], m[1] * x + m[2] * y + m[4], 1.0);
}

double ManifoldParams::surface_z(double x, double y) const {
  return -height_residual(Vec3(x, y, 0.0));
}

Vec9 manifold_residual(const Pose& pose, const ManifoldParams& mk, const ManifoldParams& mkm1,
                       ManifoldJacobians* jac) {
  const Vec3& p = pose.p;
  const Mat3 R = pose.R();
  const Vec3 n = R.col(2);
  const Vec3 grad = mk.gradient(p);
  const Vec3 cross = n.cross(grad);

  Vec9 r;
  r.head<6>() = mk.m - mkm1.m;
  r[6] = mk.height_residual(p);
  r[7] = cross.x();
  r[8] = cross.y();

  if (jac) {
    const double x = p.x(), y = p.y();
    const Vec6& a = mk.m;
    jac->d_pose.setZero();
    jac->d_m.setZero();
    jac->d_m_prev.setZero();
    jac->d_m.topLeftCorner<6, 6>().setIdentity();
    jac->d_m_prev.topLeftCorner<6, 6>() = -Eigen::Matrix<double, 6, 6>::Identity();

    jac->d_pose.block<1, 3>(6, 3) = grad.transpose();
    jac->d_m.row(6) << 0.5 * x * x, x * y, 0.5 * y * y, x, y, 1.0;

    Mat3 H = Mat3::Zero();
    H << a[0], a[1], 0.0, a[1], a[2], 0.0, 0.0, 0.0, 0.0;
    const Mat3 d_theta = skew(grad) * R * skew(Vec3::UnitZ());
    const Mat3 d_p = skew(n) * H;
    Eigen::Matrix<double, 3, 6> dgrad_dm = Eigen::Matrix<double, 3, 6>::Zero();
    dgrad_dm.row(0) << x, y, 0.0, 1.0, 0.0, 0.0;
    dgrad_dm.row(1) << 0.0, x, y, 0.0, 1.0, 0.0;
    const Eigen::Matrix<double, 3, 6> d_m = skew(n) * dgrad_dm;
    jac->d_pose.block<2, 3>(7, 0) = d_theta.topRows<2>();
    jac->d_pose.block<2, 3>(7, 3) = d_p.topRows<2>();
    jac->d_m.block<2, 6>(7, 0) = d_m.topRows<2>();
  }
  return r;
}

}  // namespace skidsteer
