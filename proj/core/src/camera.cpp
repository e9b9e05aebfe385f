#include "handfit/camera.hpp"

#include <vector>

namespace handfit {

Eigen::Matrix<double, Eigen::Dynamic, 2> project(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& points, const ImagePlane& plane,
    double min_depth) {
  std::vector<int> bad;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    if (!(points(i, 2) > min_depth)) bad.push_back(static_cast<int>(i));
  if (!bad.empty()) throw BehindCameraError(std::move(bad));

  Eigen::Matrix<double, Eigen::Dynamic, 2> uv(points.rows(), 2);
  uv.col(0) = plane.focal * points.col(0).cwiseQuotient(points.col(2));
  uv.col(1) = plane.focal * points.col(1).cwiseQuotient(points.col(2));
  uv.col(0).array() += plane.cx();
  uv.col(1).array() += plane.cy();
  return uv;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> project_vjp(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& points,
    const Eigen::Matrix<double, Eigen::Dynamic, 2>& uv_grad, const ImagePlane& plane) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> g(points.rows(), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double z = points(i, 2), inv_z = 1.0 / z;
    const double gu = uv_grad(i, 0), gv = uv_grad(i, 1);
    g(i, 0) = plane.focal * inv_z * gu;
    g(i, 1) = plane.focal * inv_z * gv;
    g(i, 2) = -plane.focal * inv_z * inv_z * (points(i, 0) * gu + points(i, 1) * gv);
  }
  return g;
}

}  // namespace handfit
