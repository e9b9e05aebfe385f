#include "handfit/toy_model.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "handfit/rng.hpp"

namespace handfit {

namespace {

// Part ids: 0 palm, 1..5 thumb..pinky.
struct VertexInfo {
  int part = 0;
  double t = 0.0;                       // axial parameter in [0,1]
  Eigen::Vector3d radial{0, 0, 0};      // unit radial direction at the vertex
  Eigen::Vector3d axis{0, 1, 0};
};

struct PartLayout {
  int base = 0;       // first ring vertex index
  int sides = 0;
  int rings = 0;
  int pole_bottom = 0;
  int pole_top = 0;
  Eigen::Vector3d origin{0, 0, 0};
  Eigen::Vector3d dir{0, 1, 0};
  double length = 0.0;

  int ring_vertex(int ring, int k) const { return base + ring * sides + k; }
  double ring_t(int ring) const { return static_cast<double>(ring) / (rings - 1); }
  Eigen::Vector3d axis_point(double t) const { return origin + t * length * dir; }
};

class Builder {
 public:
  Builder() {
    vertices_.resize(kNumVertices, 3);
    faces_.resize(kNumFaces, 3);
    info_.resize(kNumVertices);
  }

  // Closed tube with elliptical cross sections and flat cap fans. radius_fn
  // maps t in [0,1] to the two half-axes of the section.
  PartLayout add_tube(int part, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                      double length, int sides, int rings,
                      const std::function<Eigen::Vector2d(double)>& radius_fn) {
    PartLayout lay;
    lay.base = nv_;
    lay.sides = sides;
    lay.rings = rings;
    lay.origin = origin;
    lay.dir = dir.normalized();
    lay.length = length;

    const Eigen::Vector3d n = lay.dir;
    Eigen::Vector3d u = Eigen::Vector3d::UnitX() - (Eigen::Vector3d::UnitX().dot(n)) * n;
    if (u.norm() < 1e-6) u = Eigen::Vector3d::UnitZ() - (Eigen::Vector3d::UnitZ().dot(n)) * n;
    u.normalize();
    const Eigen::Vector3d w = n.cross(u);  // (u, w, n) right-handed

    for (int j = 0; j < rings; ++j) {
      const double t = lay.ring_t(j);
      const Eigen::Vector2d r = radius_fn(t);
      const Eigen::Vector3d c = lay.axis_point(t);
      for (int k = 0; k < sides; ++k) {
        const double phi = 2.0 * M_PI * k / sides;
        const Eigen::Vector3d radial = std::cos(phi) * u + std::sin(phi) * w;
        push_vertex(c + r[0] * std::cos(phi) * u + r[1] * std::sin(phi) * w,
                    {part, t, radial, n});
      }
    }
    lay.pole_bottom = push_vertex(lay.axis_point(0.0), {part, 0.0, Eigen::Vector3d::Zero(), n});
    lay.pole_top = push_vertex(lay.axis_point(1.0), {part, 1.0, Eigen::Vector3d::Zero(), n});

    for (int j = 0; j + 1 < rings; ++j)
      for (int k = 0; k < sides; ++k) {
        const int k1 = (k + 1) % sides;
        const int a = lay.ring_vertex(j, k), b = lay.ring_vertex(j, k1);
        const int c = lay.ring_vertex(j + 1, k1), d = lay.ring_vertex(j + 1, k);
        push_face(a, b, c);
        push_face(a, c, d);
      }
    for (int k = 0; k < sides; ++k) {
      const int k1 = (k + 1) % sides;
      push_face(lay.pole_bottom, lay.ring_vertex(0, k1), lay.ring_vertex(0, k));
      push_face(lay.pole_top, lay.ring_vertex(rings - 1, k), lay.ring_vertex(rings - 1, k1));
    }
    return lay;
  }

  int push_vertex(const Eigen::Vector3d& p, const VertexInfo& vi) {
    vertices_.row(nv_) = p.transpose();
    info_[nv_] = vi;
    return nv_++;
  }

  void push_face(int a, int b, int c) {
    faces_.row(nf_) << a, b, c;
    ++nf_;
  }

  Vertices vertices_;
  Faces faces_;
  std::vector<VertexInfo> info_;
  int nv_ = 0;
  int nf_ = 0;
};

// Smooth ramp: 0 below lo, 1 above hi.
double ramp(double x, double lo, double hi) {
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  const double t = (x - lo) / (hi - lo);
  return t * t * (3.0 - 2.0 * t);
}

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void quantize_matrix(Eigen::Ref<Eigen::MatrixXd> m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = quantize_f32(m(r, c));
}

}  // namespace

HandModelAssets gen_toy_model(std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x7041ULL));
  auto jitter = [&](double base, double rel) { return base * (1.0 + rel * (2.0 * rng.u01() - 1.0)); };

  Builder b;

  // ----- palm -----
  const double palm_len = jitter(0.52, 0.05);
  const double palm_halfw = jitter(0.22, 0.05);
  const double palm_halfth = jitter(0.055, 0.08);
  const Eigen::Vector3d wrist_origin(0.0, -0.26, 0.0);
  const PartLayout palm = b.add_tube(
      0, wrist_origin, Eigen::Vector3d::UnitY(), palm_len, 23, 10, [&](double t) {
        // slightly narrower at the wrist, rounded toward the knuckles
        const double wide = 0.82 + 0.26 * std::sin(M_PI * std::min(1.0, 0.15 + 0.85 * t));
        return Eigen::Vector2d(palm_halfw * wide, palm_halfth * (1.0 - 0.15 * t * t));
      });

  // ----- fingers -----
  // order: thumb, index, middle, ring, pinky
  const int finger_rings[5] = {12, 14, 15, 14, 12};
  const double base_len[5] = {0.36, 0.48, 0.52, 0.48, 0.38};
  const double base_rad[5] = {0.050, 0.042, 0.044, 0.041, 0.036};
  const double knuckle_y = wrist_origin.y() + palm_len - 0.02;
  const double base_x[5] = {0.23, 0.165, 0.055, -0.055, -0.165};
  PartLayout fingers[5];
  for (int f = 0; f < 5; ++f) {
    const double len = jitter(base_len[f], 0.06);
    const double rad = jitter(base_rad[f], 0.05);
    Eigen::Vector3d origin, dir;
    if (f == 0) {
      origin = Eigen::Vector3d(base_x[0], wrist_origin.y() + 0.55 * palm_len, 0.0);
      dir = Eigen::Vector3d(0.62, 0.76, 0.0).normalized();
    } else {
      origin = Eigen::Vector3d(base_x[f], knuckle_y, 0.0);
      // slight outward splay
      dir = Eigen::Vector3d(0.22 * base_x[f], 1.0, 0.0).normalized();
    }
    fingers[f] = b.add_tube(f + 1, origin, dir, len, 8, finger_rings[f], [=](double t) {
      const double taper = 1.0 - 0.35 * t;
      return Eigen::Vector2d(rad * taper, rad * taper * 0.92);
    });
  }

  // ----- webbing -----
  // Two triangles between the bases of each adjacent long-finger pair. These
  // six faces bring the total to exactly 1538 without adding vertices.
  for (int f = 1; f < 4; ++f) {
    const PartLayout& hi = fingers[f];      // higher x
    const PartLayout& lo = fingers[f + 1];  // lower x
    const int a0 = hi.ring_vertex(0, 4), a1 = hi.ring_vertex(1, 4);  // -x side
    const int b0 = lo.ring_vertex(0, 0), b1 = lo.ring_vertex(1, 0);  // +x side
    b.push_face(a0, b0, b1);
    b.push_face(a0, b1, a1);
  }

  if (b.nv_ != kNumVertices || b.nf_ != kNumFaces)
    throw AssetError("toy model construction produced wrong counts: " + std::to_string(b.nv_) +
                     " vertices, " + std::to_string(b.nf_) + " faces");

  // recenter so the hand roughly straddles the origin
  const Eigen::RowVector3d center(0.0, 0.25, 0.0);
  b.vertices_.rowwise() -= center;
  PartLayout parts[6] = {palm, fingers[0], fingers[1], fingers[2], fingers[3], fingers[4]};
  for (auto& p : parts) p.origin -= center.transpose();

  HandModelAssets a;
  a.template_vertices = b.vertices_;
  a.faces = b.faces_;

  // ----- kinematic joints and skinning -----
  // joints: 0 wrist, then MCP/PIP/DIP per finger (thumb..pinky)
  const double t_pip = 0.45, t_dip = 0.72;
  a.kinematic_parents.resize(kNumKinJoints);
  a.kinematic_parents[0] = -1;
  for (int f = 0; f < 5; ++f) {
    a.kinematic_parents[1 + 3 * f] = 0;
    a.kinematic_parents[2 + 3 * f] = 1 + 3 * f;
    a.kinematic_parents[3 + 3 * f] = 2 + 3 * f;
  }

  // Convex vertex weights whose weighted sum reproduces each joint position.
  // Ring centroids sit exactly on the part axis, so a joint at axial
  // parameter t is a blend of the two bracketing rings.
  a.rest_joint_regressor = Eigen::MatrixXd::Zero(kNumKinJoints, kNumVertices);
  // Spreads unit mass over the two rings bracketing axial parameter t. Ring
  // centroids lie on the part axis, so the blend lands exactly on the joint.
  auto ring_blend = [](Eigen::RowVectorXd& row, const PartLayout& p, double t) {
    const double x = t * (p.rings - 1);
    const int j0 = std::min(static_cast<int>(std::floor(x)), p.rings - 2);
    const double al = x - j0;
    for (int k = 0; k < p.sides; ++k) {
      row[p.ring_vertex(j0, k)] += (1.0 - al) / p.sides;
      row[p.ring_vertex(j0 + 1, k)] += al / p.sides;
    }
  };
  auto blended_row = [&](const PartLayout& p, double t) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(kNumVertices);
    ring_blend(row, p, t);
    return row;
  };
  a.rest_joint_regressor.row(0) = blended_row(parts[0], 0.04);  // wrist
  for (int f = 0; f < 5; ++f) {
    a.rest_joint_regressor.row(1 + 3 * f) = blended_row(parts[f + 1], 0.0);
    a.rest_joint_regressor.row(2 + 3 * f) = blended_row(parts[f + 1], t_pip);
    a.rest_joint_regressor.row(3 + 3 * f) = blended_row(parts[f + 1], t_dip);
  }

  // skeleton: 0 palm, then MCP/PIP/DIP/TIP per finger; all three axes share
  // one set of convex weights
  for (auto& m : a.skeleton_regressor) m = Eigen::MatrixXd::Zero(kNumVertices, kNumJoints);
  auto skel_col = [&](int joint, const Eigen::RowVectorXd& row) {
    for (auto& m : a.skeleton_regressor) m.col(joint) = row.transpose();
  };
  skel_col(0, blended_row(parts[0], 0.04));
  for (int f = 0; f < 5; ++f) {
    skel_col(1 + 4 * f, blended_row(parts[f + 1], 0.0));
    skel_col(2 + 4 * f, blended_row(parts[f + 1], t_pip));
    skel_col(3 + 4 * f, blended_row(parts[f + 1], t_dip));
    Eigen::RowVectorXd tip = Eigen::RowVectorXd::Zero(kNumVertices);
    tip[parts[f + 1].pole_top] = 1.0;
    skel_col(4 + 4 * f, tip);
  }

  // skinning: palm rigidly on the wrist; finger vertices blend between the
  // bone below and above with smooth ramps around each joint, and into the
  // wrist near the base
  a.skinning_weights = Eigen::MatrixXd::Zero(kNumVertices, kNumKinJoints);
  const double blend = 0.10;
  for (int v = 0; v < kNumVertices; ++v) {
    const VertexInfo& vi = b.info_[v];
    if (vi.part == 0) {
      a.skinning_weights(v, 0) = 1.0;
      continue;
    }
    const int f = vi.part - 1;
    const double t = vi.t;
    const double w_pip = ramp(t, t_pip - blend, t_pip + blend);
    const double w_dip = ramp(t, t_dip - blend, t_dip + blend);
    const double w_wrist = 0.5 * (1.0 - ramp(t, 0.0, 0.14));
    const double finger_share = 1.0 - w_wrist;
    a.skinning_weights(v, 0) = w_wrist;
    a.skinning_weights(v, 1 + 3 * f) = finger_share * (1.0 - w_pip);
    a.skinning_weights(v, 2 + 3 * f) = finger_share * w_pip * (1.0 - w_dip);
    a.skinning_weights(v, 3 + 3 * f) = finger_share * w_pip * w_dip;
  }

  // ----- shape directions -----
  a.shape_basis.assign(kShapeDim, Vertices::Zero(kNumVertices, 3));
  for (int v = 0; v < kNumVertices; ++v) {
    const VertexInfo& vi = b.info_[v];
    const Eigen::Vector3d p = a.template_vertices.row(v).transpose();
    const bool finger = vi.part != 0;
    a.shape_basis[0].row(v) = 0.02 * p.transpose();  // overall scale
    if (finger) {
      a.shape_basis[1].row(v) = 0.05 * vi.t * vi.axis.transpose();       // finger length
      a.shape_basis[2].row(v) = 0.012 * vi.radial.transpose();           // finger girth
      a.shape_basis[9].row(v) = -0.015 * vi.t * vi.t * vi.radial.transpose();  // tip taper
      const double side = parts[vi.part].origin.x();
      a.shape_basis[8].row(v) = Eigen::RowVector3d(0.12 * vi.t * side, 0.0, 0.0);  // splay
      if (vi.part == 1) a.shape_basis[5].row(v) = 0.06 * vi.t * vi.axis.transpose();  // thumb
      if (vi.part == 2 || vi.part == 3)
        a.shape_basis[6].row(v) = 0.04 * vi.t * vi.axis.transpose();
      if (vi.part == 4 || vi.part == 5)
        a.shape_basis[6].row(v) = -0.04 * vi.t * vi.axis.transpose();
    } else {
      a.shape_basis[3].row(v) = Eigen::RowVector3d(0.03 * p.x(), 0.0, 0.0);  // palm width
      a.shape_basis[4].row(v) =
          Eigen::RowVector3d(0.0, 0.03 * (p.y() - wrist_origin.y() + center.y()), 0.0);
      a.shape_basis[7].row(v) = Eigen::RowVector3d(0.0, 0.0, 0.02 * p.z());  // palm thickness
    }
  }

  // ----- mean pose: a relaxed grip -----
  a.mean_pose.setZero();
  const double curl[3] = {-0.22, -0.32, -0.18};
  for (int f = 1; f < 5; ++f)
    for (int j = 0; j < 3; ++j) a.mean_pose[3 * (3 * f + j)] = curl[j];
  // thumb opposes with a mix of flexion and yaw
  a.mean_pose.segment<3>(0) = Eigen::Vector3d(-0.10, 0.05, -0.28);
  a.mean_pose.segment<3>(3) = Eigen::Vector3d(-0.18, 0.0, -0.12);
  a.mean_pose.segment<3>(6) = Eigen::Vector3d(-0.15, 0.0, -0.05);

  // Everything is persisted as float32; quantize now so a save/load round
  // trip reproduces these arrays bit for bit.
  quantize_matrix(a.template_vertices);
  for (auto& m : a.shape_basis) quantize_matrix(m);
  quantize_matrix(a.skinning_weights);
  quantize_matrix(a.rest_joint_regressor);
  for (auto& m : a.skeleton_regressor) quantize_matrix(m);
  quantize_matrix(a.mean_pose);

  a.validate();
  return a;
}

}  // namespace handfit
