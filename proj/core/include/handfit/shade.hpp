#pragma once

#include "handfit/image.hpp"
#include "handfit/types.hpp"

namespace handfit {

// Z-buffered flat Lambertian shading over a background image:
//   color = max(0, n . l) * albedo + 0.3 * albedo, clamped to [0, 1].
// Backface culling is off; coverage matches rasterize_hard exactly.
RgbImage render_shaded(const Vertices& vertices, const Faces& faces, const ImagePlane& plane,
                       const Eigen::Vector3d& albedo, const Eigen::Vector3d& light_dir,
                       const RgbImage& background);

inline constexpr double kAmbient = 0.3;

}  // namespace handfit
