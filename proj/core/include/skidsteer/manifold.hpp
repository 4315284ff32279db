#pragma once

#include "skidsteer/geom.hpp"

namespace skidsteer {

using Mat96 = Eigen::Matrix<double, 9, 6>;

// Quadratic ground surface m = [a1, a2, a3, b1, b2, c]. The zero set of
// height(p) = 0.5 [x y] [[a1 a2][a2 a3]] [x y]^T + b1 x + b2 y + z + c
// is the surface; its gradient is the (unnormalized) upward normal.
struct ManifoldParams {
  Vec6 m = Vec6::Zero();

  double height_residual(const Vec3& p) const;
  Vec3 gradient(const Vec3& p) const;
  double surface_z(double x, double y) const;
};

// Stack [m_k - m_{k-1}; height(p); rows 1-2 of [R e3]x * gradient(p)].
struct ManifoldJacobians {
  Eigen::Matrix<double, 9, 6> d_pose;  // [dtheta, dp]
  Eigen::Matrix<double, 9, 6> d_m;
  Eigen::Matrix<double, 9, 6> d_m_prev;
};

Vec9 manifold_residual(const Pose& pose, const ManifoldParams& m, const ManifoldParams& m_prev,
                       ManifoldJacobians* jac = nullptr);

}  // namespace skidsteer
