#pragma once

#include <string>
#include <vector>

#include "handfit/image.hpp"
#include "handfit/losses.hpp"
#include "handfit/types.hpp"

namespace handfit {

// Ground truth stored per record: the generating parameters, the camera-frame
// skeleton, its projection and the normalization context.
struct GroundTruth {
  MeshParams h;
  Skeleton3d joints;
  Skeleton2d j2d;
  NormalizationContext ctx;
};

struct DatasetRecord {
  std::string id;
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;
  std::string gt_path;
};

// Directory layout: manifest.jsonl plus img/NNNNNN.ppm, mask/NNNNNN.pgm,
// gt/NNNNNN.json.
std::vector<DatasetRecord> read_manifest(const std::string& manifest_path);
void write_manifest(const std::string& manifest_path, const std::vector<DatasetRecord>& records);

GroundTruth read_ground_truth(const std::string& path);
void write_ground_truth(const std::string& path, const GroundTruth& gt);

// Absolute path of a record asset next to its manifest.
std::string resolve_path(const std::string& manifest_path, const std::string& relative);

// Fully loaded sample for training and evaluation.
struct LoadedSample {
  RgbImage image;
  Eigen::MatrixXd mask;
  GroundTruth gt;
};

LoadedSample load_sample(const std::string& manifest_path, const DatasetRecord& record);

}  // namespace handfit
