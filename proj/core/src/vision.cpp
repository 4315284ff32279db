#include "skidsteer/vision.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "skidsteer/errors.hpp"

namespace skidsteer {

Pose camera_pose(const Pose& odom, const SensorRig& rig) {
  return odom.compose(rig.extrinsics_OC);
}

Vec2 visual_residual(const Pose& odom, const Vec3& lm, const Vec2& uv, const SensorRig& rig,
                     VisualJacobians* jac) {
  const Mat3 R_GO = odom.R();
  const Mat3 R_OC = rig.extrinsics_OC.R();
  const Vec3 q = R_GO.transpose() * (lm - odom.p);
  const Vec3 pc = R_OC.transpose() * (q - rig.extrinsics_OC.p);
  if (pc.z() < kMinResidualDepth) {
    throw Error(ErrorCategory::NegativeDepth, "landmark behind or too close to the camera");
  }
  const double iz = 1.0 / pc.z();
  Vec2 r = uv - pc.head<2>() * iz;
  if (jac) {
    Eigen::Matrix<double, 2, 3> dpi;
    dpi << iz, 0.0, -pc.x() * iz * iz, 0.0, iz, -pc.y() * iz * iz;
    const Eigen::Matrix<double, 2, 3> dr = -dpi * R_OC.transpose();
    jac->d_pose.leftCols<3>() = dr * skew(q);
    jac->d_pose.rightCols<3>() = -dr * R_GO.transpose();
    jac->d_landmark = dr * R_GO.transpose();
  }
  return r;
}

TriangulationResult triangulate(const std::vector<Vec2>& uvs, const std::vector<Pose>& poses,
                                const SensorRig& rig, const TriangulationOptions& opts) {
  TriangulationResult res;
  const std::size_t n = uvs.size();
  if (n < 2 || poses.size() != n) {
    res.failure = "need at least two views";
    return res;
  }
  std::vector<Pose> cams(n);
  double baseline = 0.0;
  for (std::size_t i = 0; i < n; ++i) cams[i] = camera_pose(poses[i], rig);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      baseline = std::max(baseline, (cams[i].p - cams[j].p).norm());
    }
  }
  if (baseline < opts.min_baseline) {
    res.failure = "insufficient baseline";
    return res;
  }

  Eigen::MatrixXd A(2 * n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat3 Rcg = cams[i].R().transpose();
    Eigen::Matrix<double, 3, 4> P;
    P.leftCols<3>() = Rcg;
    P.col(3) = -Rcg * cams[i].p;
    A.row(2 * i) = uvs[i].x() * P.row(2) - P.row(0);
    A.row(2 * i + 1) = uvs[i].y() * P.row(2) - P.row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h[3]) < 1e-12) {
    res.failure = "point at infinity";
    return res;
  }
  Vec3 X = h.head<3>() / h[3];

  for (int it = 0; it < opts.gauss_newton_iterations; ++it) {
    Mat3 H = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Mat3 Rcg = cams[i].R().transpose();
      const Vec3 pc = Rcg * (X - cams[i].p);
      if (pc.z() <= 1e-9) {
        res.failure = "non-positive depth";
        return res;
      }
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << iz, 0.0, -pc.x() * iz * iz, 0.0, iz, -pc.y() * iz * iz;
      const Eigen::Matrix<double, 2, 3> Jx = dpi * Rcg;
      const Vec2 e = pc.head<2>() * iz - uvs[i];
      H += Jx.transpose() * Jx;
      b += Jx.transpose() * e;
    }
    const Vec3 dx = -H.ldlt().solve(b);
    if (!dx.allFinite()) {
      res.failure = "degenerate refinement";
      return res;
    }
    X += dx;
    if (dx.norm() < 1e-12 * (1.0 + X.norm())) break;
  }

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 pc = cams[i].R().transpose() * (X - cams[i].p);
    if (pc.z() < opts.min_depth) {
      res.failure = "depth below minimum";
      return res;
    }
    ss += (pc.head<2>() / pc.z() - uvs[i]).squaredNorm();
  }
  res.rms = std::sqrt(ss / (2.0 * static_cast<double>(n)));
  if (opts.min_parallax > 0.0) {
    double parallax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 ri = (X - cams[i].p).normalized();
      for (std::size_t j = i + 1; j < n; ++j) {
        const Vec3 rj = (X - cams[j].p).normalized();
        parallax = std::max(parallax, std::atan2(ri.cross(rj).norm(), ri.dot(rj)));
      }
    }
    if (parallax < opts.min_parallax) {
      res.failure = "insufficient parallax";
      return res;
    }
  }
  if (res.rms > std::max(opts.max_rms_sigmas * opts.sigma_pixel, 1e-9)) {
    res.failure = "reprojection rms too large";
    return res;
  }
  res.ok = true;
  res.position = X;
  return res;
}

}  // namespace skidsteer
