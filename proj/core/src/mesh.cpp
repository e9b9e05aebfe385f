#include "handfit/mesh.hpp"

#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace handfit {

namespace {

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& aa) {
  const double angle = aa.norm();
  if (angle < 1e-12) {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    r(0, 1) = -aa.z(); r(0, 2) = aa.y();
    r(1, 0) = aa.z();  r(1, 2) = -aa.x();
    r(2, 0) = -aa.y(); r(2, 1) = aa.x();
    return r;
  }
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// dR/da_i for R = exp([a]x). Rotation gradients follow the closed form
//   dR/da_i = (a_i [a]x + [a x (I - R) e_i]x) / |a|^2 * R
// which degenerates to [e_i]x at the identity.
std::array<Eigen::Matrix3d, 3> rodrigues_grads(const Eigen::Vector3d& aa,
                                               const Eigen::Matrix3d& r) {
  std::array<Eigen::Matrix3d, 3> out;
  const double n2 = aa.squaredNorm();
  if (n2 < 1e-16) {
    for (int i = 0; i < 3; ++i) out[i] = cross_matrix(Eigen::Vector3d::Unit(i));
    return out;
  }
  const Eigen::Matrix3d imr = Eigen::Matrix3d::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d v = aa.cross(imr.col(i));
    out[i] = (aa[i] * cross_matrix(aa) + cross_matrix(v)) / n2 * r;
  }
  return out;
}

// Rotation from a raw (unnormalized) quaternion plus, optionally, the four
// derivative matrices with the normalization chain folded in.
Eigen::Matrix3d quat_rotation(const Eigen::Vector4d& q, std::array<Eigen::Matrix3d, 4>* grads) {
  const double n = q.norm();
  if (n < 1e-12) throw std::invalid_argument("degenerate camera quaternion");
  const Eigen::Vector4d u = q / n;
  const double w = u[0], x = u[1], y = u[2], z = u[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  if (!grads) return r;

  std::array<Eigen::Matrix3d, 4> du;  // partials of r in the unit components
  du[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
  du[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
  du[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
  du[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
  // d u_j / d q_c = (delta - u_j u_c) / n
  for (int c = 0; c < 4; ++c) {
    Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
    for (int j = 0; j < 4; ++j) acc += du[j] * (((j == c) ? 1.0 : 0.0) - u[j] * u[c]) / n;
    (*grads)[c] = acc;
  }
  return r;
}

struct BoneWeight {
  int bone;
  double w;
};

}  // namespace

MeshSynthesis synthesize_mesh(const MeshParams& h, const HandModelAssets& assets) {
  return synthesize_mesh(h, assets, nullptr);
}

MeshSynthesis synthesize_mesh(const MeshParams& h, const HandModelAssets& assets,
                              MeshJacobian* jac) {
  if (!h.allFinite()) throw std::invalid_argument("non-finite mesh parameters");
  if (!(h.scale() > 0.0)) throw std::invalid_argument("camera scale must be positive");

  const int nv = static_cast<int>(assets.template_vertices.rows());

  // shape blend
  Vertices shaped = assets.template_vertices;
  for (int i = 0; i < kShapeDim; ++i) shaped += h.shape()[i] * assets.shape_basis[i];

  // rest joints and forward kinematics; the wrist is not articulated, so its
  // world rotation is the identity and it stays pinned at its rest position
  const Eigen::Matrix<double, Eigen::Dynamic, 3> j_rest = assets.rest_joint_regressor * shaped;
  std::array<Eigen::Matrix3d, kNumKinJoints> rot_local, rot_world;
  Eigen::Matrix<double, kNumKinJoints, 3> j_posed;
  rot_local[0].setIdentity();
  rot_world[0].setIdentity();
  j_posed.row(0) = j_rest.row(0);
  for (int k = 1; k < kNumKinJoints; ++k) {
    const int p = assets.kinematic_parents[k];
    rot_local[k] = rodrigues(h.pose().segment<3>(3 * (k - 1)));
    rot_world[k] = rot_world[p] * rot_local[k];
    j_posed.row(k) = (rot_world[p] * (j_rest.row(k) - j_rest.row(p)).transpose()).transpose() +
                     j_posed.row(p);
  }

  // linear blend skinning
  std::vector<std::vector<BoneWeight>> vbones(nv);
  for (int v = 0; v < nv; ++v)
    for (int b = 0; b < kNumKinJoints; ++b)
      if (assets.skinning_weights(v, b) != 0.0)
        vbones[v].push_back({b, assets.skinning_weights(v, b)});

  Vertices posed(nv, 3);
  for (int v = 0; v < nv; ++v) {
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    const Eigen::Vector3d sv = shaped.row(v).transpose();
    for (const auto& bw : vbones[v])
      acc += bw.w * (rot_world[bw.bone] * (sv - j_rest.row(bw.bone).transpose()) +
                     j_posed.row(bw.bone).transpose());
    posed.row(v) = acc.transpose();
  }

  // global similarity
  std::array<Eigen::Matrix3d, 4> qgrads;
  const Eigen::Matrix3d r_cam = quat_rotation(h.quat(), jac ? &qgrads : nullptr);
  const double cs = h.scale();
  const Eigen::Vector3d ct = h.translation();

  MeshSynthesis out;
  out.rest_vertices = shaped;
  out.mesh.faces = &assets.faces;
  out.mesh.vertices = cs * (posed * r_cam.transpose());
  out.mesh.vertices.rowwise() += ct.transpose();

  if (!jac) return out;

  jac->dv.setZero(3 * nv, kParamDim);
  const Eigen::Matrix3d cam_lin = cs * r_cam;  // common left factor for pose/shape columns

  // pose columns: only the subtree below the perturbed joint moves
  std::array<Eigen::Matrix3d, kNumKinJoints> d_rw;
  Eigen::Matrix<double, kNumKinJoints, 3> d_jp;
  std::array<bool, kNumKinJoints> touched;
  for (int k = 1; k < kNumKinJoints; ++k) {
    const auto dr_local = rodrigues_grads(h.pose().segment<3>(3 * (k - 1)), rot_local[k]);
    for (int m = 0; m < 3; ++m) {
      const int col = 3 * (k - 1) + m;
      touched.fill(false);
      touched[k] = true;
      d_rw[k] = rot_world[assets.kinematic_parents[k]] * dr_local[m];
      d_jp.row(k).setZero();
      for (int d = k + 1; d < kNumKinJoints; ++d) {
        const int p = assets.kinematic_parents[d];
        if (!touched[p]) continue;
        touched[d] = true;
        d_rw[d] = d_rw[p] * rot_local[d];
        d_jp.row(d) = (d_rw[p] * (j_rest.row(d) - j_rest.row(p)).transpose()).transpose() +
                      d_jp.row(p);
      }
      for (int v = 0; v < nv; ++v) {
        bool hit = false;
        for (const auto& bw : vbones[v]) hit = hit || touched[bw.bone];
        if (!hit) continue;
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        const Eigen::Vector3d sv = shaped.row(v).transpose();
        for (const auto& bw : vbones[v]) {
          if (!touched[bw.bone]) continue;
          acc += bw.w * (d_rw[bw.bone] * (sv - j_rest.row(bw.bone).transpose()) +
                         d_jp.row(bw.bone).transpose());
        }
        jac->dv.block<3, 1>(3 * v, col) = cam_lin * acc;
      }
    }
  }

  // shape columns: rotations are fixed, rest geometry and joints move
  for (int i = 0; i < kShapeDim; ++i) {
    const int col = kShapeOffset + i;
    const Vertices& basis = assets.shape_basis[i];
    const Eigen::Matrix<double, Eigen::Dynamic, 3> d_jr = assets.rest_joint_regressor * basis;
    d_jp.row(0) = d_jr.row(0);
    for (int k = 1; k < kNumKinJoints; ++k) {
      const int p = assets.kinematic_parents[k];
      d_jp.row(k) = (rot_world[p] * (d_jr.row(k) - d_jr.row(p)).transpose()).transpose() +
                    d_jp.row(p);
    }
    for (int v = 0; v < nv; ++v) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      const Eigen::Vector3d dv = basis.row(v).transpose();
      for (const auto& bw : vbones[v])
        acc += bw.w * (rot_world[bw.bone] * (dv - d_jr.row(bw.bone).transpose()) +
                       d_jp.row(bw.bone).transpose());
      jac->dv.block<3, 1>(3 * v, col) = cam_lin * acc;
    }
  }

  // camera columns
  for (int c = 0; c < 4; ++c) {
    const Eigen::Matrix<double, Eigen::Dynamic, 3> dq = cs * (posed * qgrads[c].transpose());
    for (int v = 0; v < nv; ++v)
      jac->dv.block<3, 1>(3 * v, kQuatOffset + c) = dq.row(v).transpose();
  }
  const Eigen::Matrix<double, Eigen::Dynamic, 3> dscale = posed * r_cam.transpose();
  for (int v = 0; v < nv; ++v) {
    jac->dv.block<3, 1>(3 * v, kScaleOffset) = dscale.row(v).transpose();
    for (int axis = 0; axis < 3; ++axis) jac->dv(3 * v + axis, kTransOffset + axis) = 1.0;
  }
  return out;
}

Vec63 backprop_vertices(const MeshJacobian& jac, const Vertices& vertex_grad) {
  Eigen::VectorXd flat(vertex_grad.rows() * 3);
  for (Eigen::Index v = 0; v < vertex_grad.rows(); ++v)
    flat.segment<3>(3 * v) = vertex_grad.row(v).transpose();
  return jac.dv.transpose() * flat;
}

void backprop_rest_vertices(const HandModelAssets& assets, const Vertices& rest_grad,
                            Vec63& grad_h) {
  for (int i = 0; i < kShapeDim; ++i)
    grad_h[kShapeOffset + i] += (assets.shape_basis[i].array() * rest_grad.array()).sum();
}

Skeleton3d regress_skeleton(const Vertices& vertices, const HandModelAssets& assets) {
  Skeleton3d s;
  for (int axis = 0; axis < 3; ++axis)
    s.col(axis) = assets.skeleton_regressor[axis].transpose() * vertices.col(axis);
  return s;
}

Vertices skeleton_vjp(const Skeleton3d& joint_grad, const HandModelAssets& assets) {
  Vertices g(assets.skeleton_regressor[0].rows(), 3);
  for (int axis = 0; axis < 3; ++axis)
    g.col(axis) = assets.skeleton_regressor[axis] * joint_grad.col(axis);
  return g;
}

}  // namespace handfit
