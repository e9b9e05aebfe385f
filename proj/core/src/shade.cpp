#include "handfit/shade.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>

#include "handfit/camera.hpp"
#include "handfit/rasterize.hpp"

namespace handfit {

RgbImage render_shaded(const Vertices& vertices, const Faces& faces, const ImagePlane& plane,
                       const Eigen::Vector3d& albedo, const Eigen::Vector3d& light_dir,
                       const RgbImage& background) {
  const Eigen::Matrix<double, Eigen::Dynamic, 2> uv = project(vertices, plane);
  const Eigen::Vector3d l = light_dir.normalized();

  RgbImage img = background;
  if (img.height() != plane.height || img.width() != plane.width)
    img = RgbImage(plane.height, plane.width);
  Eigen::MatrixXd zbuf = Eigen::MatrixXd::Constant(plane.height, plane.width,
                                                   std::numeric_limits<double>::infinity());

  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
    const double ax = uv(i0, 0), ay = uv(i0, 1);
    const double bx = uv(i1, 0), by = uv(i1, 1);
    const double cx = uv(i2, 0), cy = uv(i2, 1);

    // flat shading with the normal oriented toward the viewer
    Eigen::Vector3d n = (vertices.row(i1) - vertices.row(i0))
                            .cross(vertices.row(i2) - vertices.row(i0))
                            .transpose();
    const double nn = n.norm();
    double brightness = kAmbient;
    if (nn > 1e-18) {
      n /= nn;
      if (n.z() > 0.0) n = -n;
      brightness += std::max(0.0, n.dot(l));
    }
    const Eigen::Vector3d color =
        (brightness * albedo).cwiseMax(0.0).cwiseMin(1.0);

    const double inv_z0 = 1.0 / vertices(i0, 2);
    const double inv_z1 = 1.0 / vertices(i1, 2);
    const double inv_z2 = 1.0 / vertices(i2, 2);
    const double denom = (by - cy) * (ax - cx) + (cx - bx) * (ay - cy);

    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({ax, bx, cx}) - 0.5)));
    const int x1 = std::min(plane.width - 1,
                            static_cast<int>(std::floor(std::max({ax, bx, cx}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({ay, by, cy}) - 0.5)));
    const int y1 = std::min(plane.height - 1,
                            static_cast<int>(std::floor(std::max({ay, by, cy}) - 0.5)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        if (!point_in_triangle(px, py, ax, ay, bx, by, cx, cy)) continue;
        double z;
        if (std::abs(denom) < 1e-12) {
          // degenerate in screen space, still covered; nearest vertex depth
          z = std::min({vertices(i0, 2), vertices(i1, 2), vertices(i2, 2)});
        } else {
          const double b0 = ((by - cy) * (px - cx) + (cx - bx) * (py - cy)) / denom;
          const double b1 = ((cy - ay) * (px - cx) + (ax - cx) * (py - cy)) / denom;
          const double b2 = 1.0 - b0 - b1;
          z = 1.0 / (b0 * inv_z0 + b1 * inv_z1 + b2 * inv_z2);  // perspective correct
        }
        if (z < zbuf(y, x)) {
          zbuf(y, x) = z;
          img.r(y, x) = color.x();
          img.g(y, x) = color.y();
          img.b(y, x) = color.z();
        }
      }
  }
  return img;
}

}  // namespace handfit
