#pragma once

#include <vector>

#include "handfit/types.hpp"

namespace handfit {

inline constexpr double kHeatmapSigma = 1.5;  // in heatmap cells
inline constexpr double kHeatmapScale =
    static_cast<double>(kImageSize) / kHeatmapSize;  // 7 pixels per cell

using Heatmaps = std::vector<Eigen::MatrixXd>;  // 21 channels, each 32 x 32

// One isotropic Gaussian per joint on the 32 x 32 grid, evaluated at cell
// centers and rescaled to peak value 1.
Heatmaps encode_heatmaps(const Skeleton2d& joints_px);

// Per-channel argmax decoded back to pixel coordinates of the cell center.
// Ties resolve to the lowest row-major index.
Skeleton2d decode_heatmaps(const Heatmaps& maps);

}  // namespace handfit
