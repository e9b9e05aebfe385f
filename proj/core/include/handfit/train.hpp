#pragma once

#include <functional>
#include <vector>

#include "handfit/dataset.hpp"
#include "handfit/estimator.hpp"
#include "handfit/losses.hpp"
#include "handfit/rasterize.hpp"
#include "handfit/synth.hpp"

namespace handfit {

struct TrainingDiverged : std::runtime_error {
  int epoch;
  explicit TrainingDiverged(int e)
      : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(e)),
        epoch(e) {}
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  AdamConfig adam;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  LossWeights weights;
  ImagePlane plane;
  // Numerical truncation for the silhouette term; the gradient check suites
  // use their own wider windows.
  SoftRasterConfig raster{1.0, 6.0, 7.0};
  bool augment = false;
  AugmentConfig augment_cfg;
  int augment_seeds_per_epoch = 4;  // deterministic rotation through the data
  int max_augmented_records = 240;  // growth cap for desk-scale runs
};

struct EpochStats {
  double mean_total = 0.0;
  double mean_art = 0.0;
  double mean_ref = 0.0;
  double lambda_fraction = 0.0;  // share of instances with the gate open
};

struct TrainResult {
  LinearRegressorWeights weights;
  std::vector<EpochStats> epochs;
};

// Mini-batch Adam over the two linear heads. Batches are shuffled by a seeded
// generator; per-sample gradients are reduced in sample-index order, so runs
// are bit-reproducible for a fixed seed regardless of thread count.
TrainResult train(const std::vector<LoadedSample>& samples, const HandModelAssets& assets,
                  const Descriptor& descriptor, const TrainConfig& cfg,
                  const std::function<void(int, const EpochStats&)>& on_epoch = nullptr);

// Exact per-sample objective and weight-space gradient, the same computation
// the trainer runs per instance. Exposed so the gradient can be verified
// externally against finite differences. The gradient reuses the weight
// container shape-for-shape.
struct SampleGrads {
  LinearRegressorWeights grad;
  LossBreakdown losses;
  // true when the regression iterate left the renderable parameter domain;
  // the sample contributes nothing to the batch
  bool skipped = false;
};

SampleGrads sample_loss_and_grad(const LoadedSample& sample, const Eigen::VectorXd& feature,
                                 const LinearRegressorWeights& w, const HandModelAssets& assets,
                                 const Descriptor& descriptor, const TrainConfig& cfg);

// Forward evidence construction shared by train/fit: descriptor feature of
// the full image plus keypoints.
Evidence2D make_evidence(const RgbImage& image, const Skeleton2d& j2d,
                         const Descriptor& descriptor);

}  // namespace handfit
