#include "handfit/rasterize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "handfit/camera.hpp"

namespace handfit {

namespace {

// stable log(1 + exp(x))
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// C2 falloff from 1 at x=0 to 0 at x=1 (reversed quintic smoothstep).
double window_fade(double x, double* deriv) {
  if (x <= 0.0) { if (deriv) *deriv = 0.0; return 1.0; }
  if (x >= 1.0) { if (deriv) *deriv = 0.0; return 0.0; }
  const double s = x * x * x * (x * (6.0 * x - 15.0) + 10.0);
  if (deriv) *deriv = -x * x * (x * (30.0 * x - 60.0) + 30.0);
  return 1.0 - s;
}

struct FaceBox {
  int x0, x1, y0, y1;  // inclusive pixel index bounds, empty when x0 > x1
};

FaceBox pixel_bounds(const double* t, double dilate, int width, int height) {
  const double minx = std::min({t[0], t[2], t[4]}) - dilate;
  const double maxx = std::max({t[0], t[2], t[4]}) + dilate;
  const double miny = std::min({t[1], t[3], t[5]}) - dilate;
  const double maxy = std::max({t[1], t[3], t[5]}) + dilate;
  FaceBox b;
  b.x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
  b.x1 = std::min(width - 1, static_cast<int>(std::floor(maxx - 0.5)));
  b.y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
  b.y1 = std::min(height - 1, static_cast<int>(std::floor(maxy - 0.5)));
  return b;
}

}  // namespace

double signed_triangle_distance(double px, double py, const double* t, double grad[6]) {
  const bool inside = point_in_triangle(px, py, t[0], t[1], t[2], t[3], t[4], t[5]);
  const double sign = inside ? 1.0 : -1.0;

  double best = std::numeric_limits<double>::infinity();
  int be = 0;
  double bt = 0.0, bcx = 0.0, bcy = 0.0;
  for (int e = 0; e < 3; ++e) {
    const double ax = t[2 * e], ay = t[2 * e + 1];
    const double bx = t[(2 * e + 2) % 6], by = t[(2 * e + 3) % 6];
    const double ex = bx - ax, ey = by - ay;
    const double len2 = ex * ex + ey * ey;
    double s = len2 > 0.0 ? ((px - ax) * ex + (py - ay) * ey) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    const double cx = ax + s * ex, cy = ay + s * ey;
    const double d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
    if (d2 < best) {
      best = d2;
      be = e;
      bt = s;
      bcx = cx;
      bcy = cy;
    }
  }
  const double dist = std::sqrt(best);
  if (!grad) return sign * dist;

  // direction of increase of the signed distance at the pixel
  double nx, ny;
  if (dist > 1e-12) {
    nx = sign * (px - bcx) / dist;
    ny = sign * (py - bcy) / dist;
  } else {
    // on the boundary: use the inward edge normal, consistent with both sides
    const double ax = t[2 * be], ay = t[2 * be + 1];
    const double bx = t[(2 * be + 2) % 6], by = t[(2 * be + 3) % 6];
    const double ox = t[(2 * be + 4) % 6], oy = t[(2 * be + 5) % 6];
    double pxn = -(by - ay), pyn = bx - ax;
    const double n = std::hypot(pxn, pyn);
    if (n > 0.0) { pxn /= n; pyn /= n; }
    if (pxn * (ox - ax) + pyn * (oy - ay) < 0.0) { pxn = -pxn; pyn = -pyn; }
    nx = pxn;
    ny = pyn;
  }

  // closest point moves with the active edge endpoints; the clamped parameter
  // is stationary at the optimum so it can be held fixed
  for (int i = 0; i < 6; ++i) grad[i] = 0.0;
  grad[2 * be] = -(1.0 - bt) * nx;
  grad[2 * be + 1] = -(1.0 - bt) * ny;
  grad[(2 * be + 2) % 6] = -bt * nx;
  grad[(2 * be + 3) % 6] = -bt * ny;
  return sign * dist;
}

Eigen::MatrixXd rasterize_hard(const Vertices& vertices, const Faces& faces,
                               const ImagePlane& plane) {
  const Eigen::Matrix<double, Eigen::Dynamic, 2> uv = project(vertices, plane);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(plane.height, plane.width);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    double t[6];
    for (int k = 0; k < 3; ++k) {
      t[2 * k] = uv(faces(f, k), 0);
      t[2 * k + 1] = uv(faces(f, k), 1);
    }
    const FaceBox b = pixel_bounds(t, 0.0, plane.width, plane.height);
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x)
        if (mask(y, x) == 0.0 &&
            point_in_triangle(x + 0.5, y + 0.5, t[0], t[1], t[2], t[3], t[4], t[5]))
          mask(y, x) = 1.0;
  }
  return mask;
}

Eigen::MatrixXd rasterize_soft(const Vertices& vertices, const Faces& faces,
                               const ImagePlane& plane, const SoftRasterConfig& cfg) {
  const Eigen::Matrix<double, Eigen::Dynamic, 2> uv = project(vertices, plane);
  const bool windowed = std::isfinite(cfg.window_end);
  const double dilate = windowed ? cfg.window_end * cfg.sigma
                                 : std::hypot(plane.width, plane.height);

  // accumulated -log(1 - o), always >= 0
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(plane.height, plane.width);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    double t[6];
    for (int k = 0; k < 3; ++k) {
      t[2 * k] = uv(faces(f, k), 0);
      t[2 * k + 1] = uv(faces(f, k), 1);
    }
    const FaceBox b = pixel_bounds(t, dilate, plane.width, plane.height);
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) {
        const double d = signed_triangle_distance(x + 0.5, y + 0.5, t);
        double w = 1.0;
        if (windowed)
          w = window_fade((-d / cfg.sigma - cfg.window_start) /
                              (cfg.window_end - cfg.window_start),
                          nullptr);
        if (w > 0.0) acc(y, x) += w * softplus(d / cfg.sigma);
      }
  }
  // -expm1 keeps faint far-field contributions strictly above zero.
  return acc.unaryExpr([](double a) { return -std::expm1(-a); });
}

Vertices rasterize_soft_vjp(const Vertices& vertices, const Faces& faces,
                            const ImagePlane& plane, const SoftRasterConfig& cfg,
                            const Eigen::MatrixXd& occ_grad) {
  const Eigen::Matrix<double, Eigen::Dynamic, 2> uv = project(vertices, plane);
  const bool windowed = std::isfinite(cfg.window_end);
  const double dilate = windowed ? cfg.window_end * cfg.sigma
                                 : std::hypot(plane.width, plane.height);
  const double span = cfg.window_end - cfg.window_start;

  std::vector<FaceBox> boxes(faces.rows());
  std::vector<std::array<double, 6>> tris(faces.rows());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(plane.height, plane.width);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    auto& t = tris[f];
    for (int k = 0; k < 3; ++k) {
      t[2 * k] = uv(faces(f, k), 0);
      t[2 * k + 1] = uv(faces(f, k), 1);
    }
    boxes[f] = pixel_bounds(t.data(), dilate, plane.width, plane.height);
    for (int y = boxes[f].y0; y <= boxes[f].y1; ++y)
      for (int x = boxes[f].x0; x <= boxes[f].x1; ++x) {
        const double d = signed_triangle_distance(x + 0.5, y + 0.5, t.data());
        double w = 1.0;
        if (windowed)
          w = window_fade((-d / cfg.sigma - cfg.window_start) / span, nullptr);
        if (w > 0.0) acc(y, x) += w * softplus(d / cfg.sigma);
      }
  }

  // d occ / d acc = exp(-acc); then per face, d acc / d d_f through the
  // windowed softplus and the boundary distance into pixel coordinates
  Eigen::Matrix<double, Eigen::Dynamic, 2> uv_grad =
      Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(vertices.rows(), 2);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const auto& t = tris[f];
    const FaceBox& b = boxes[f];
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) {
        const double go = occ_grad(y, x);
        if (go == 0.0) continue;
        double dgrad[6];
        const double d = signed_triangle_distance(x + 0.5, y + 0.5, t.data(), dgrad);
        const double z = d / cfg.sigma;
        double w = 1.0, dw_dd = 0.0;
        if (windowed) {
          double fade_deriv;
          w = window_fade((-z - cfg.window_start) / span, &fade_deriv);
          dw_dd = fade_deriv * (-1.0 / (cfg.sigma * span));
        }
        if (w <= 0.0 && dw_dd == 0.0) continue;
        const double dacc_dd = w * sigmoid(z) / cfg.sigma + dw_dd * softplus(z);
        const double gd = go * std::exp(-acc(y, x)) * dacc_dd;
        for (int k = 0; k < 3; ++k) {
          uv_grad(faces(f, k), 0) += gd * dgrad[2 * k];
          uv_grad(faces(f, k), 1) += gd * dgrad[2 * k + 1];
        }
      }
  }
  return project_vjp(vertices, uv_grad, plane);
}

}  // namespace handfit
