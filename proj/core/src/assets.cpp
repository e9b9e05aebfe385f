#include "handfit/assets.hpp"

#include <algorithm>
#include <set>

#include "binary_format.hpp"

namespace handfit {

namespace {

constexpr char kMagic[] = "HNDA1";

void check(bool ok, const std::string& what) {
  if (!ok) throw AssetError(what);
}

void check_convex_rows(const Eigen::MatrixXd& m, const std::string& name, double tol = 1e-6) {
  check((m.array() >= -1e-9).all(), name + " has negative weights");
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    check(std::abs(m.row(r).sum() - 1.0) <= tol,
          name + " row " + std::to_string(r) + " does not sum to 1");
}

void check_convex_cols(const Eigen::MatrixXd& m, const std::string& name, double tol = 1e-6) {
  check((m.array() >= -1e-9).all(), name + " has negative weights");
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    check(std::abs(m.col(c).sum() - 1.0) <= tol,
          name + " column " + std::to_string(c) + " does not sum to 1");
}

}  // namespace

void HandModelAssets::validate() const {
  check(template_vertices.rows() == kNumVertices && template_vertices.cols() == 3,
        "template vertex count mismatch: expected 778x3, got " +
            std::to_string(template_vertices.rows()) + "x" +
            std::to_string(template_vertices.cols()));
  check(faces.rows() == kNumFaces && faces.cols() == 3,
        "face count mismatch: expected 1538x3, got " + std::to_string(faces.rows()) + "x" +
            std::to_string(faces.cols()));
  check(template_vertices.allFinite(), "non-finite template vertices");
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    int a = faces(f, 0), b = faces(f, 1), c = faces(f, 2);
    check(a >= 0 && a < kNumVertices && b >= 0 && b < kNumVertices && c >= 0 && c < kNumVertices,
          "face " + std::to_string(f) + " references an out-of-range vertex");
    check(a != b && b != c && a != c, "face " + std::to_string(f) + " repeats a vertex");
  }
  check(static_cast<int>(shape_basis.size()) == kShapeDim, "shape basis must have 10 directions");
  for (const auto& b : shape_basis) {
    check(b.rows() == kNumVertices && b.cols() == 3, "shape basis direction has wrong shape");
    check(b.allFinite(), "non-finite shape basis");
  }
  check(skinning_weights.rows() == kNumVertices && skinning_weights.cols() == kNumKinJoints,
        "skinning weights must be 778x16");
  check_convex_rows(skinning_weights, "skinning weights");
  check(rest_joint_regressor.rows() == kNumKinJoints && rest_joint_regressor.cols() == kNumVertices,
        "rest joint regressor must be 16x778");
  check_convex_rows(rest_joint_regressor, "rest joint regressor");
  check(kinematic_parents.size() == kNumKinJoints, "kinematic parents must have 16 entries");
  check(kinematic_parents[0] == -1, "kinematic root must be joint 0 with parent -1");
  for (int j = 1; j < kNumKinJoints; ++j) {
    check(kinematic_parents[j] >= 0 && kinematic_parents[j] < kNumKinJoints,
          "kinematic parent out of range");
    // synthesis composes transforms in index order, so parents come first
    check(kinematic_parents[j] < j, "kinematic parents must be topologically ordered");
    // acyclicity: every chain must reach the root within 16 hops
    int cur = j, hops = 0;
    while (cur != 0) {
      cur = kinematic_parents[cur];
      check(cur >= 0 && ++hops <= kNumKinJoints, "kinematic tree has a cycle");
    }
  }
  for (int axis = 0; axis < 3; ++axis) {
    check(skeleton_regressor[axis].rows() == kNumVertices &&
              skeleton_regressor[axis].cols() == kNumJoints,
          "skeleton regressor must be 778x21 per axis");
    check_convex_cols(skeleton_regressor[axis], "skeleton regressor axis " + std::to_string(axis));
  }
  check(mean_pose.allFinite(), "non-finite mean pose");
  if (pose_blendshapes) {
    for (const auto& b : *pose_blendshapes)
      check(b.rows() == kNumVertices && b.cols() == 3 && b.allFinite(),
            "pose blendshape has wrong shape");
  }
}

void save_model_assets(const std::string& path, const HandModelAssets& a) {
  a.validate();
  std::vector<unsigned char> payload;
  nlohmann::json fields = nlohmann::json::array();
  auto add = [&](const std::string& name, std::initializer_list<long> shape, auto&& writer) {
    nlohmann::json f;
    f["name"] = name;
    f["shape"] = shape;
    f["offset"] = payload.size();
    writer();
    fields.push_back(std::move(f));
  };

  add("template_vertices", {kNumVertices, 3},
      [&] { detail::append_matrix(payload, a.template_vertices); });
  add("faces", {kNumFaces, 3}, [&] { detail::append_matrix(payload, a.faces.cast<double>()); });
  add("shape_basis", {kShapeDim, kNumVertices, 3}, [&] {
    for (const auto& b : a.shape_basis) detail::append_matrix(payload, b);
  });
  add("skinning_weights", {kNumVertices, kNumKinJoints},
      [&] { detail::append_matrix(payload, a.skinning_weights); });
  add("rest_joint_regressor", {kNumKinJoints, kNumVertices},
      [&] { detail::append_matrix(payload, a.rest_joint_regressor); });
  add("kinematic_parents", {kNumKinJoints},
      [&] { detail::append_matrix(payload, a.kinematic_parents.cast<double>()); });
  add("skeleton_regressor", {3, kNumVertices, kNumJoints}, [&] {
    for (const auto& m : a.skeleton_regressor) detail::append_matrix(payload, m);
  });
  add("mean_pose", {kPoseDim}, [&] { detail::append_matrix(payload, a.mean_pose); });
  if (a.pose_blendshapes) {
    add("pose_blendshapes", {static_cast<long>(a.pose_blendshapes->size()), kNumVertices, 3}, [&] {
      for (const auto& b : *a.pose_blendshapes) detail::append_matrix(payload, b);
    });
  }

  nlohmann::json header;
  header["version"] = 1;
  header["fields"] = std::move(fields);
  header["payload_bytes"] = payload.size();
  detail::write_chunk_file(path, kMagic, header, payload);
}

HandModelAssets load_model_assets(const std::string& path) {
  detail::ChunkFile file;
  try {
    file = detail::read_chunk_file(path, kMagic);
  } catch (const std::exception& e) {
    throw AssetError(e.what());
  }

  std::map<std::string, std::vector<long>> shapes;
  std::map<std::string, std::size_t> offsets;
  for (const auto& f : file.header.at("fields")) {
    shapes[f.at("name")] = f.at("shape").get<std::vector<long>>();
    offsets[f.at("name")] = f.at("offset").get<std::size_t>();
  }
  auto expect_shape = [&](const std::string& name, std::initializer_list<long> want) {
    auto it = shapes.find(name);
    if (it == shapes.end()) throw AssetError("missing field " + name + " in " + path);
    if (!std::equal(want.begin(), want.end(), it->second.begin(), it->second.end())) {
      std::string got;
      for (long d : it->second) got += (got.empty() ? "" : "x") + std::to_string(d);
      throw AssetError("dimension mismatch for " + name + ": got " + got);
    }
  };

  expect_shape("template_vertices", {kNumVertices, 3});
  expect_shape("faces", {kNumFaces, 3});
  expect_shape("shape_basis", {kShapeDim, kNumVertices, 3});
  expect_shape("skinning_weights", {kNumVertices, kNumKinJoints});
  expect_shape("rest_joint_regressor", {kNumKinJoints, kNumVertices});
  expect_shape("kinematic_parents", {kNumKinJoints});
  expect_shape("skeleton_regressor", {3, kNumVertices, kNumJoints});
  expect_shape("mean_pose", {kPoseDim});

  HandModelAssets a;
  try {
    std::size_t cur = offsets.at("template_vertices");
    a.template_vertices.resize(kNumVertices, 3);
    detail::read_matrix(file.payload, cur, a.template_vertices);

    cur = offsets.at("faces");
    Eigen::MatrixXd tmp(kNumFaces, 3);
    detail::read_matrix(file.payload, cur, tmp);
    a.faces = tmp.cast<int>();

    cur = offsets.at("shape_basis");
    a.shape_basis.assign(kShapeDim, Vertices(kNumVertices, 3));
    for (auto& b : a.shape_basis) detail::read_matrix(file.payload, cur, b);

    cur = offsets.at("skinning_weights");
    a.skinning_weights.resize(kNumVertices, kNumKinJoints);
    detail::read_matrix(file.payload, cur, a.skinning_weights);

    cur = offsets.at("rest_joint_regressor");
    a.rest_joint_regressor.resize(kNumKinJoints, kNumVertices);
    detail::read_matrix(file.payload, cur, a.rest_joint_regressor);

    cur = offsets.at("kinematic_parents");
    Eigen::MatrixXd par(kNumKinJoints, 1);
    detail::read_matrix(file.payload, cur, par);
    a.kinematic_parents = par.col(0).cast<int>();

    cur = offsets.at("skeleton_regressor");
    for (auto& m : a.skeleton_regressor) {
      m.resize(kNumVertices, kNumJoints);
      detail::read_matrix(file.payload, cur, m);
    }

    cur = offsets.at("mean_pose");
    Eigen::MatrixXd mp(kPoseDim, 1);
    detail::read_matrix(file.payload, cur, mp);
    a.mean_pose = mp.col(0);

    if (shapes.count("pose_blendshapes")) {
      const long n = shapes["pose_blendshapes"][0];
      cur = offsets.at("pose_blendshapes");
      a.pose_blendshapes.emplace(n, Vertices(kNumVertices, 3));
      for (auto& b : *a.pose_blendshapes) detail::read_matrix(file.payload, cur, b);
    }
  } catch (const std::exception& e) {
    throw AssetError(std::string("failed reading ") + path + ": " + e.what());
  }

  a.validate();
  return a;
}

VertexAdjacency build_adjacency(const Faces& faces, int num_vertices) {
  std::vector<std::set<int>> nbr(num_vertices);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const int v[3] = {faces(f, 0), faces(f, 1), faces(f, 2)};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) nbr[v[i]].insert(v[j]);
  }
  VertexAdjacency adj;
  adj.offsets.resize(num_vertices + 1, 0);
  for (int v = 0; v < num_vertices; ++v)
    adj.offsets[v + 1] = adj.offsets[v] + static_cast<int>(nbr[v].size());
  adj.neighbors.reserve(adj.offsets.back());
  for (int v = 0; v < num_vertices; ++v)
    adj.neighbors.insert(adj.neighbors.end(), nbr[v].begin(), nbr[v].end());
  return adj;
}

}  // namespace handfit
