#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "handfit/assets.hpp"
#include "handfit/dataset.hpp"
#include "handfit/rng.hpp"

namespace handfit {

// Sampling ranges for synthetic variation. Pose is never resampled: the
// articulation of the seed is kept so augmentation stays on-manifold.
struct AugmentConfig {
  double shape_range = 3.0;        // uniform in [-range, range] per dimension
  double rot_lo = 0.0;             // per-axis Euler angles, uniform
  double rot_hi = 2.0 * M_PI;
  double scale_lo = 0.8;           // visible-frustum bounds: the hand covers
  double scale_hi = 1.1;           // roughly 20..80% of the image height
  double depth_lo = 2.0;
  double depth_hi = 3.0;
  double xy_range = 0.22;
  int per_seed = 3;                // records generated per seed prediction
  int start_epoch = 20;            // first epoch (0-based) that augments
};

// Resample shape, global rotation and camera placement around a seed
// parameter vector; pose is carried over unchanged. Rotation is composed from
// per-axis angles Rz(c)Ry(b)Rx(a), each uniform in [rot_lo, rot_hi).
MeshParams perturb_seed(const MeshParams& seed, const AugmentConfig& cfg, Rng& rng);

struct GeneratedRecord {
  RgbImage image;
  Eigen::MatrixXd mask;  // binary
  GroundTruth gt;
};

// Renders a complete labelled record over the supplied background: shaded
// image with randomized skin-tone albedo and light, hard mask, skeleton,
// projection and normalization context. A translation that puts vertices
// behind the camera is resampled up to 10 times before the error escapes.
GeneratedRecord generate_record(const MeshParams& h, const HandModelAssets& assets,
                                const RgbImage& background, Rng& rng);

// Epoch hook: empty before start_epoch, otherwise per_seed perturbed records
// per seed prediction. Each record draws from an independent rng split so
// parallel and serial generation agree.
std::vector<GeneratedRecord> augment_epoch_hook(int epoch,
                                                const std::vector<MeshParams>& seed_predictions,
                                                const AugmentConfig& cfg,
                                                const HandModelAssets& assets, const Rng& rng);

// Samples `count` fresh records (seeded) and writes the dataset directory.
std::vector<DatasetRecord> generate_dataset(const std::string& out_dir,
                                            const HandModelAssets& assets, int count,
                                            std::uint64_t seed,
                                            const AugmentConfig& cfg = {});

// Smooth seeded value-noise backdrop.
RgbImage procedural_background(int height, int width, Rng& rng);

}  // namespace handfit
