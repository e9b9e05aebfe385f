#pragma once

#include "handfit/assets.hpp"
#include "handfit/types.hpp"

namespace handfit {

struct HandMesh {
  Vertices vertices;  // 778 x 3, camera frame
  const Faces* faces = nullptr;
};

struct MeshSynthesis {
  HandMesh mesh;
  Vertices rest_vertices;  // shape-blended template before articulation
};

// Dense Jacobian of all vertex coordinates with respect to the packed
// parameter vector. Row layout is 3*vertex + axis.
struct MeshJacobian {
  Eigen::Matrix<double, Eigen::Dynamic, kParamDim> dv;  // (3*778) x 63
};

// Linear blend skinning along the 16-joint tree followed by the global
// similarity transform. Throws std::invalid_argument for non-finite h or a
// non-positive scale.
MeshSynthesis synthesize_mesh(const MeshParams& h, const HandModelAssets& assets);
MeshSynthesis synthesize_mesh(const MeshParams& h, const HandModelAssets& assets,
                              MeshJacobian* jac);

// Chain rule helpers. vertex_grad is 778 x 3.
Vec63 backprop_vertices(const MeshJacobian& jac, const Vertices& vertex_grad);
// The rest mesh depends only on the shape block; adds its contribution.
void backprop_rest_vertices(const HandModelAssets& assets, const Vertices& rest_grad,
                            Vec63& grad_h);

// Skeleton regression, one convex combination per axis.
Skeleton3d regress_skeleton(const Vertices& vertices, const HandModelAssets& assets);
// Adjoint of regress_skeleton: scatter joint gradients back to vertices.
Vertices skeleton_vjp(const Skeleton3d& joint_grad, const HandModelAssets& assets);

}  // namespace handfit
