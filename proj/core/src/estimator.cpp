#include "handfit/estimator.hpp"

#include <stdexcept>

#include "binary_format.hpp"

namespace handfit {

namespace {

constexpr char kWeightsMagic[] = "HNDW1";

Eigen::VectorXd flatten_j2d(const Skeleton2d& j2d) {
  Eigen::VectorXd v(kJoint2dDim);
  for (int j = 0; j < kNumJoints; ++j) {
    v[2 * j] = j2d(j, 0);
    v[2 * j + 1] = j2d(j, 1);
  }
  return v;
}

Eigen::VectorXd flatten_j3d(const Skeleton3d& j3d) {
  Eigen::VectorXd v(3 * kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) v.segment<3>(3 * j) = j3d.row(j).transpose();
  return v;
}

}  // namespace

void Evidence2D::validate(int image_size) const {
  if (feature.size() == 0) throw std::invalid_argument("evidence feature is empty");
  if (!feature.allFinite()) throw std::invalid_argument("evidence feature has non-finite values");
  if (!j2d.allFinite()) throw std::invalid_argument("evidence keypoints have non-finite values");
  const double lo = -kBoundsSlack, hi = image_size + kBoundsSlack;
  for (int j = 0; j < kNumJoints; ++j)
    if (j2d(j, 0) < lo || j2d(j, 0) > hi || j2d(j, 1) < lo || j2d(j, 1) > hi)
      throw std::invalid_argument("evidence keypoint " + std::to_string(j) +
                                  " is out of bounds");
  if (heatmaps) {
    if (heatmaps->size() != static_cast<std::size_t>(kNumJoints))
      throw std::invalid_argument("evidence heatmaps must have 21 channels");
    for (const auto& m : *heatmaps)
      if (m.rows() != kHeatmapSize || m.cols() != kHeatmapSize)
        throw std::invalid_argument("evidence heatmap channel is not 32 x 32");
  }
}

LinearRegressorWeights LinearRegressorWeights::zeros(int feature_dim) {
  LinearRegressorWeights w;
  w.j3d_w = Eigen::MatrixXd::Zero(feature_dim + kJoint2dDim + kParamDim, kParamDim);
  w.j3d_b = Eigen::VectorXd::Zero(kParamDim);
  w.ref_w = Eigen::MatrixXd::Zero(kJoint2dDim + feature_dim + kParamDim + 3 * kNumJoints,
                                  kJoint2dDim);
  w.ref_b = Eigen::VectorXd::Zero(kJoint2dDim);
  return w;
}

void LinearRegressorWeights::validate() const {
  const int d = feature_dim();
  if (d <= 0) throw std::invalid_argument("regressor weights imply a non-positive feature dim");
  if (j3d_w.cols() != kParamDim || j3d_b.size() != kParamDim)
    throw std::invalid_argument("mesh head has wrong output size");
  if (ref_w.rows() != kJoint2dDim + d + kParamDim + 3 * kNumJoints ||
      ref_w.cols() != kJoint2dDim || ref_b.size() != kJoint2dDim)
    throw std::invalid_argument("refiner head has wrong shape");
  if (!j3d_w.allFinite() || !j3d_b.allFinite() || !ref_w.allFinite() || !ref_b.allFinite())
    throw std::invalid_argument("regressor weights contain non-finite values");
}

MeshParams initial_params(const HandModelAssets& assets) {
  MeshParams h;
  h.h.setZero();
  h.h.segment<kPoseDim>(kPoseOffset) = assets.mean_pose;
  h.h[kQuatOffset] = 1.0;  // identity rotation; scale and translation stay zero
  return h;
}

MeshParams to_synthesis_encoding(const MeshParams& regressor_h) {
  MeshParams out = regressor_h;
  out.h[kScaleOffset] += kCameraScaleOffset;
  out.h[kTransOffset + 2] += kCameraDepthOffset;
  return out;
}

Vec63 regress_step(const Evidence2D& z, const MeshParams& h_t, const LinearRegressorWeights& w) {
  Eigen::VectorXd x(w.j3d_w.rows());
  x << z.feature * feature_input_scale(static_cast<int>(z.feature.size())),
      flatten_j2d(z.j2d) / kImageSize, h_t.h;
  return w.j3d_w.transpose() * x + w.j3d_b;
}

Skeleton2d refine_2d(const Skeleton2d& j2d, const Eigen::VectorXd& feature, const MeshParams& h,
                     const Skeleton3d& j3d, const LinearRegressorWeights& w) {
  Eigen::VectorXd x(w.ref_w.rows());
  x << flatten_j2d(j2d) / kImageSize,
      feature * feature_input_scale(static_cast<int>(feature.size())), h.h, flatten_j3d(j3d);
  const Eigen::VectorXd out = kImageSize * (w.ref_w.transpose() * x + w.ref_b);
  Skeleton2d r;
  for (int j = 0; j < kNumJoints; ++j) {
    r(j, 0) = out[2 * j];
    r(j, 1) = out[2 * j + 1];
  }
  return r;
}

HmeResult run_hme(const Evidence2D& z, const LinearRegressorWeights& w,
                  const HandModelAssets& assets) {
  z.validate();
  w.validate();
  if (z.feature.size() != w.feature_dim())
    throw std::invalid_argument("evidence feature dim does not match the weights");

  HmeResult res;
  MeshParams h = initial_params(assets);
  Evidence2D cur = z;
  res.trajectory.reserve(kHmeIterations + 1);
  res.trajectory.push_back(h);
  for (int t = 0; t < kHmeIterations; ++t) {
    h.h += regress_step(cur, h, w);
    if (!h.allFinite())
      throw std::runtime_error("non-finite mesh parameters at iteration " + std::to_string(t));
    res.trajectory.push_back(h);
    const MeshSynthesis synth = synthesize_mesh(to_synthesis_encoding(h), assets);
    const Skeleton3d j3d = regress_skeleton(synth.mesh.vertices, assets);
    cur.j2d = refine_2d(cur.j2d, z.feature, h, j3d, w);
    if (!cur.j2d.allFinite())
      throw std::runtime_error("non-finite refined keypoints at iteration " + std::to_string(t));
  }
  res.h = to_synthesis_encoding(h);
  res.j2d = cur.j2d;
  return res;
}

void save_weights(const std::string& path, const LinearRegressorWeights& w,
                  const WeightsMeta& meta) {
  w.validate();
  std::vector<unsigned char> payload;
  nlohmann::json fields = nlohmann::json::array();
  auto add = [&](const char* name, const Eigen::MatrixXd& m) {
    fields.push_back({{"name", name},
                      {"shape", {m.rows(), m.cols()}},
                      {"offset", payload.size()}});
    detail::append_matrix(payload, m);
  };
  add("j3d_w", w.j3d_w);
  add("j3d_b", w.j3d_b);
  add("ref_w", w.ref_w);
  add("ref_b", w.ref_b);
  nlohmann::json header{{"version", 1},
                        {"feature_dim", w.feature_dim()},
                        {"seed", meta.seed},
                        {"epochs", meta.epochs},
                        {"loss_trace", meta.loss_trace},
                        {"lambda_trace", meta.lambda_trace},
                        {"fields", fields},
                        {"payload_bytes", payload.size()}};
  detail::write_chunk_file(path, kWeightsMagic, header, payload);
}

LinearRegressorWeights load_weights(const std::string& path, WeightsMeta* meta) {
  const detail::ChunkFile f = detail::read_chunk_file(path, kWeightsMagic);
  const int d = f.header.at("feature_dim").get<int>();
  LinearRegressorWeights w = LinearRegressorWeights::zeros(d);
  std::size_t cursor = 0;
  detail::read_matrix(f.payload, cursor, w.j3d_w);
  detail::read_matrix(f.payload, cursor, w.j3d_b);
  detail::read_matrix(f.payload, cursor, w.ref_w);
  detail::read_matrix(f.payload, cursor, w.ref_b);
  if (meta) {
    meta->seed = f.header.at("seed").get<std::uint64_t>();
    meta->epochs = f.header.at("epochs").get<int>();
    meta->loss_trace = f.header.at("loss_trace").get<std::vector<double>>();
    meta->lambda_trace = f.header.at("lambda_trace").get<std::vector<double>>();
  }
  w.validate();
  return w;
}

}  // namespace handfit
