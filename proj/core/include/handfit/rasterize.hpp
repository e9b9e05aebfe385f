#pragma once

#include <limits>

#include "handfit/types.hpp"

namespace handfit {

// Binary coverage test shared by the hard rasterizer, the shaded renderer and
// the brute-force oracles in the tests: a pixel is covered when its center
// lies inside or on the boundary of the projected triangle, regardless of
// orientation or depth.
inline bool point_in_triangle(double px, double py, double ax, double ay, double bx,
                              double by, double cx, double cy) {
  double s0 = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  double s1 = (cx - bx) * (py - by) - (cy - by) * (px - bx);
  double s2 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx);
  bool has_neg = (s0 < 0.0) || (s1 < 0.0) || (s2 < 0.0);
  bool has_pos = (s0 > 0.0) || (s1 > 0.0) || (s2 > 0.0);
  return !(has_neg && has_pos);
}

// Signed Euclidean distance from a point to the triangle boundary, positive
// inside. Optionally fills the gradient with respect to the three vertices.
double signed_triangle_distance(double px, double py, const double* tri_xy,
                                double grad[6] = nullptr);

struct SoftRasterConfig {
  double sigma = 1.0;  // transition width in pixels
  // Optional smooth truncation of far-away face contributions, in sigma
  // units: full strength closer than window_start, exactly zero beyond
  // window_end, C2 blend between. Defaults keep the untruncated formula.
  double window_start = std::numeric_limits<double>::infinity();
  double window_end = std::numeric_limits<double>::infinity();
};

// Hard binary mask, H x W of {0,1}. Throws BehindCameraError via projection.
Eigen::MatrixXd rasterize_hard(const Vertices& vertices, const Faces& faces,
                               const ImagePlane& plane);

// Soft occupancy o = 1 - prod_f (1 - sigmoid(d_f / sigma)) accumulated in log
// space. Values are strictly inside (0,1) wherever the window permits.
Eigen::MatrixXd rasterize_soft(const Vertices& vertices, const Faces& faces,
                               const ImagePlane& plane, const SoftRasterConfig& cfg = {});

// Adjoint of rasterize_soft: occupancy-plane gradients back to the 3-d
// vertices (projection included). Recomputes the forward pass internally.
Vertices rasterize_soft_vjp(const Vertices& vertices, const Faces& faces,
                            const ImagePlane& plane, const SoftRasterConfig& cfg,
                            const Eigen::MatrixXd& occ_grad);

}  // namespace handfit
