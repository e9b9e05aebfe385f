#pragma once

#include "handfit/assets.hpp"
#include "handfit/descriptor.hpp"
#include "handfit/types.hpp"

namespace handfit {

// Fixed per-sample quantities entering skeleton normalization. g is 1.5 times
// the larger side of the tight 2-d keypoint box in pixels; z_root is the
// camera-frame depth of the root joint.
struct NormalizationContext {
  int root_index = kRootJoint;
  double g = 1.0;
  double z_root = 1.0;
  double focal = kDefaultFocal;

  void validate() const {
    if (!(g > 0.0)) throw std::invalid_argument("normalization g must be positive");
    if (!(std::abs(z_root) > 0.0)) throw std::invalid_argument("z_root must be nonzero");
  }
};

// Affine map per skeleton: root to origin, x and y divided by g, z divided by
// z_root*g/focal. Exact inverse available below.
Skeleton3d normalize_skeleton(const Skeleton3d& joints, const NormalizationContext& ctx);
Skeleton3d denormalize_skeleton(const Skeleton3d& normalized, const NormalizationContext& ctx,
                                const Eigen::Vector3d& root_position);

// Articulation loss: squared L2 over all 63 coordinates of the normalized
// difference. Gradient is with respect to the raw predicted joints.
double loss_art(const Skeleton3d& pred, const Skeleton3d& gt, const NormalizationContext& ctx,
                Skeleton3d* pred_grad = nullptr);

// Silhouette loss: squared L2 over every pixel.
double loss_sh(const Eigen::MatrixXd& pred_mask, const Eigen::MatrixXd& gt_mask,
               Eigen::MatrixXd* pred_grad = nullptr);

// Smoothness: uniform graph Laplacian of the posed mesh anchored to the
// shape-blended rest mesh, summed over vertices.
double loss_lap(const Vertices& posed, const Vertices& rest, const VertexAdjacency& adj,
                Vertices* posed_grad = nullptr, Vertices* rest_grad = nullptr);

// Feature consistency: descriptor of the full image vs the masked image.
double loss_feat(const Descriptor& desc, const RgbImage& image, const Eigen::MatrixXd& mask,
                 Eigen::MatrixXd* mask_grad = nullptr);

// Silhouette gate: 1 when the mean per-joint pixel error is strictly below
// tau, else 0.
double lambda_schedule(const Skeleton2d& pred_2d, const Skeleton2d& ref_2d, double tau);

inline constexpr double kDefaultTau = 15.0;  // pixels

// Per-term scale overrides; the reference formulation weighs every term at 1.
struct LossWeights {
  double art = 1.0;
  double lap = 1.0;
  double feat = 1.0;
  double sh = 1.0;
  double ref = 1.0;
  double tau = kDefaultTau;
};

struct LossBreakdown {
  double art = 0.0;
  double lap = 0.0;
  double feat = 0.0;
  double sh = 0.0;
  double ref = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

// total = art + lap + feat + lambda*sh + ref, each term premultiplied by its
// weight override.
double loss_total(LossBreakdown& terms, const LossWeights& w);

}  // namespace handfit
