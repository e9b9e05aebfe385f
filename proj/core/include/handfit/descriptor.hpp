#pragma once

#include <memory>

#include "handfit/image.hpp"

namespace handfit {

// Image descriptor evaluated under a soft occupancy mask. Implementations
// must be differentiable with respect to the mask so the feature consistency
// loss can push gradients into the renderer.
class Descriptor {
 public:
  virtual ~Descriptor() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd eval(const RgbImage& image, const Eigen::MatrixXd& mask) const = 0;
  // Adjoint: gradient of <desc_grad, eval(image, mask)> with respect to mask.
  virtual Eigen::MatrixXd mask_vjp(const RgbImage& image, const Eigen::MatrixXd& mask,
                                   const Eigen::VectorXd& desc_grad) const = 0;
};

// Default descriptor: a 16 x 16 grid over the 224 x 224 plane; per cell the
// mask-weighted mean color (3 channels, blended toward the plain cell mean as
// mask support vanishes) and the mean occupancy. D = 16*16*4 = 1024.
class GridDescriptor final : public Descriptor {
 public:
  static constexpr int kGrid = 16;
  static constexpr int kCell = kImageSize / kGrid;
  // Smoothing mass added to the weighted-mean denominator. Keeps the color
  // channels bounded and smooth when a cell has no mask support, and makes a
  // constant-color image produce identical color features for any mask.
  static constexpr double kBlend = 1e-2;
  // Per-cell stats are scaled by 1/kGrid so a squared descriptor distance
  // averages over cells instead of summing. This keeps the feature
  // consistency term on the same scale as the other losses regardless of the
  // grid resolution; unscaled, its value and mask gradient grow with the cell
  // count and bury the skeleton terms.
  static constexpr double kNorm = 1.0 / kGrid;

  int dim() const override { return kGrid * kGrid * 4; }
  Eigen::VectorXd eval(const RgbImage& image, const Eigen::MatrixXd& mask) const override;
  Eigen::MatrixXd mask_vjp(const RgbImage& image, const Eigen::MatrixXd& mask,
                           const Eigen::VectorXd& desc_grad) const override;
};

}  // namespace handfit
