#pragma once

#include <optional>
#include <string>
#include <vector>

#include "handfit/types.hpp"

namespace handfit {

struct AssetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything the synthesis pipeline needs about the hand model. All arrays are
// stored on disk as little-endian float32; in memory they are doubles whose
// values are exactly representable in float32, so write/read round trips are
// bit identical.
struct HandModelAssets {
  Vertices template_vertices;               // 778 x 3
  Faces faces;                              // 1538 x 3
  std::vector<Vertices> shape_basis;        // 10 entries, each 778 x 3
  Eigen::MatrixXd skinning_weights;         // 778 x 16, rows sum to 1
  Eigen::MatrixXd rest_joint_regressor;     // 16 x 778, rows sum to 1
  Eigen::VectorXi kinematic_parents;        // 16, parent of root is -1
  std::array<Eigen::MatrixXd, 3> skeleton_regressor;  // per axis, 778 x 21
  Eigen::Matrix<double, kPoseDim, 1> mean_pose;
  // Reserved: optional pose-corrective blendshapes, carried through I/O but
  // not applied by synthesis.
  std::optional<std::vector<Vertices>> pose_blendshapes;

  void validate() const;  // throws AssetError on any violated invariant
};

HandModelAssets load_model_assets(const std::string& path);
void save_model_assets(const std::string& path, const HandModelAssets& assets);

// 1-ring vertex neighborhoods in CSR form, built from shared face edges.
struct VertexAdjacency {
  std::vector<int> offsets;  // size V+1
  std::vector<int> neighbors;

  int degree(int v) const { return offsets[v + 1] - offsets[v]; }
};

VertexAdjacency build_adjacency(const Faces& faces, int num_vertices = kNumVertices);

}  // namespace handfit
