#pragma once

#include <vector>

#include "handfit/descriptor.hpp"
#include "handfit/estimator.hpp"
#include "handfit/losses.hpp"
#include "handfit/rasterize.hpp"

namespace handfit {

struct RefineConfig {
  int iterations = 50;
  double gamma = 1e-3;         // plain gradient descent step
  double tau = kDefaultTau;    // gate for the feature term, pixels
  double sigma = 1.0;          // soft silhouette width
  SoftRasterConfig raster{1.0, 6.0, 7.0};
  ImagePlane plane;
  // Pixel scale of the joint residual. Keeps the descent stable at the
  // default gamma for the default camera; see notes in refine.cpp.
  double joint_scale = 16.0;
  int max_backoff = 8;  // step halvings after a behind-camera rollback
};

struct RefineTraceRow {
  double total = 0.0;
  double joint = 0.0;
  double feat = 0.0;
  double lap = 0.0;
  double lambda = 0.0;
};

struct RefineResult {
  MeshParams h;
  // One row per accepted iterate including h0: length iterations + 1 unless
  // the run aborts early on a non-finite objective or an exhausted backoff.
  std::vector<RefineTraceRow> trace;
};

// Test-time objective: scaled squared pixel residual of the projected
// skeleton against the refined keypoints, the gated descriptor consistency
// term rendered from the current mesh, and the Laplacian anchor. Minimized by
// plain gradient descent with the quaternion renormalized after every step.
// Behind-camera steps roll back with a halved step; a non-finite objective
// aborts and returns the last finite iterate.
RefineResult testing_refine(const RgbImage& image, const Skeleton2d& j2d_refined,
                            const MeshParams& h0, const HandModelAssets& assets,
                            const Descriptor& descriptor, const RefineConfig& cfg = {});

void write_refine_trace_csv(const std::string& path, const std::vector<RefineTraceRow>& trace);

}  // namespace handfit
