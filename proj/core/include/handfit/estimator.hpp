#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "handfit/assets.hpp"
#include "handfit/heatmap.hpp"
#include "handfit/mesh.hpp"
#include "handfit/types.hpp"

namespace handfit {

// Per-image 2-d evidence driving the estimator.
struct Evidence2D {
  Eigen::VectorXd feature;            // descriptor of the image, length D
  Skeleton2d j2d;                     // pixel coordinates
  std::optional<Heatmaps> heatmaps;   // optional confidence maps

  // Keypoints may sit slightly outside the frame but not arbitrarily far.
  static constexpr double kBoundsSlack = 32.0;
  void validate(int image_size = kImageSize) const;
};

// Two linear heads: the mesh-parameter update and the 2-d refiner.
//   delta_h = j3d_w' * [feature; j2d/224; h] + j3d_b
//   j2d'    = 224 * (ref_w' * [j2d/224; feature; h; j3d] + ref_b)
// Pixel inputs are normalized by the image size for conditioning and the
// refiner output is denormalized back to pixels; both maps are otherwise raw
// matrix-vector products.
struct LinearRegressorWeights {
  Eigen::MatrixXd j3d_w;  // (D + 42 + 63) x 63
  Eigen::VectorXd j3d_b;  // 63
  Eigen::MatrixXd ref_w;  // (42 + D + 63 + 63) x 42
  Eigen::VectorXd ref_b;  // 42

  int feature_dim() const { return static_cast<int>(j3d_w.rows()) - kJoint2dDim - kParamDim; }
  static LinearRegressorWeights zeros(int feature_dim);
  void validate() const;
};

// h(0): mean pose, zero shape, identity quaternion, zero camera entries. The
// camera block is an offset encoding; synthesis adds the defaults below so
// the initial mesh is visible.
MeshParams initial_params(const HandModelAssets& assets);

inline constexpr double kCameraScaleOffset = 1.0;
inline constexpr double kCameraDepthOffset = 2.5;

// Regressor-space vector -> raw synthesis parameters (adds the camera
// offsets). The Jacobian of this map is the identity.
MeshParams to_synthesis_encoding(const MeshParams& regressor_h);

// Conditioning scale for the feature slice of the regressor inputs, matching
// the [0,1] normalization of the keypoint slice. Without it the many small
// descriptor entries let coherent per-coordinate Adam updates move the
// parameter residual by lr * sum|x| per step, which leaves the renderable
// domain within the first epoch.
inline double feature_input_scale(int feature_dim) {
  return 1.0 / std::sqrt(static_cast<double>(feature_dim));
}

// One residual update step of the mesh parameters.
Vec63 regress_step(const Evidence2D& z, const MeshParams& h_t, const LinearRegressorWeights& w);

// Absolute 2-d refinement (not residual): zero weights give zero output.
Skeleton2d refine_2d(const Skeleton2d& j2d, const Eigen::VectorXd& feature, const MeshParams& h,
                     const Skeleton3d& j3d, const LinearRegressorWeights& w);

struct HmeResult {
  MeshParams h;                      // synthesis encoding
  Skeleton2d j2d;                    // refined keypoints, pixels
  std::vector<MeshParams> trajectory;  // regressor encoding, length iterations+1
};

inline constexpr int kHmeIterations = 3;

// Iterative estimation: fixed three rounds of regress_step + mesh synthesis +
// 2-d refinement. Throws on non-finite intermediates naming the iteration.
HmeResult run_hme(const Evidence2D& z, const LinearRegressorWeights& w,
                  const HandModelAssets& assets);

// Binary weight file I/O ("HNDW1"). Round trips are byte identical.
struct WeightsMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  std::vector<double> loss_trace;       // mean total loss per epoch
  std::vector<double> lambda_trace;     // fraction of gated instances per epoch
};

void save_weights(const std::string& path, const LinearRegressorWeights& w,
                  const WeightsMeta& meta);
LinearRegressorWeights load_weights(const std::string& path, WeightsMeta* meta = nullptr);

}  // namespace handfit
