#include "handfit/heatmap.hpp"

#include <cmath>

namespace handfit {

Heatmaps encode_heatmaps(const Skeleton2d& joints_px) {
  Heatmaps maps(kNumJoints);
  const double inv_two_sigma2 = 1.0 / (2.0 * kHeatmapSigma * kHeatmapSigma);
  for (int j = 0; j < kNumJoints; ++j) {
    Eigen::MatrixXd m(kHeatmapSize, kHeatmapSize);
    const double cu = joints_px(j, 0) / kHeatmapScale;  // in cell units
    const double cv = joints_px(j, 1) / kHeatmapScale;
    for (int row = 0; row < kHeatmapSize; ++row)
      for (int col = 0; col < kHeatmapSize; ++col) {
        const double dx = col + 0.5 - cu;
        const double dy = row + 0.5 - cv;
        m(row, col) = std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
      }
    const double peak = m.maxCoeff();
    if (peak > 0.0) m /= peak;
    maps[j] = std::move(m);
  }
  return maps;
}

Skeleton2d decode_heatmaps(const Heatmaps& maps) {
  Skeleton2d out;
  for (int j = 0; j < kNumJoints; ++j) {
    const Eigen::MatrixXd& m = maps[j];
    int best_row = 0, best_col = 0;
    double best = m(0, 0);
    for (int row = 0; row < kHeatmapSize; ++row)
      for (int col = 0; col < kHeatmapSize; ++col)
        if (m(row, col) > best) {  // strict: ties keep the lowest row-major cell
          best = m(row, col);
          best_row = row;
          best_col = col;
        }
    out(j, 0) = (best_col + 0.5) * kHeatmapScale;
    out(j, 1) = (best_row + 0.5) * kHeatmapScale;
  }
  return out;
}

}  // namespace handfit
