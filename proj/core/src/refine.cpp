#include "handfit/refine.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "handfit/camera.hpp"
#include "handfit/mesh.hpp"

namespace handfit {

namespace {

struct EvalResult {
  RefineTraceRow row;
  Vec63 grad = Vec63::Zero();
};

// Objective at h: scaled squared joint residual, gated descriptor consistency
// against the self-rendered soft mask, Laplacian anchor. Throws
// BehindCameraError when the mesh leaves the frustum.
//
// The joint residual is measured in units of joint_scale pixels rather than
// raw pixels. With raw pixels the translation block sees curvatures around
// 2*(f/z)^2*21 ~ 6e5 and plain descent at the pinned step of 1e-3 oscillates
// divergently; 16 px units bring the largest curvature to order 1e3, which
// the fixed step handles, while preserving the objective's minimizers.
EvalResult evaluate(const MeshParams& h, const RgbImage& image, const Skeleton2d& j2d_ref,
                    const HandModelAssets& assets, const Descriptor& descriptor,
                    const VertexAdjacency& adj, const RefineConfig& cfg) {
  MeshJacobian jac;
  const MeshSynthesis synth = synthesize_mesh(h, assets, &jac);
  const Skeleton3d joints = regress_skeleton(synth.mesh.vertices, assets);
  const Skeleton2d uv = project(joints, cfg.plane);

  EvalResult out;
  const double s2 = cfg.joint_scale * cfg.joint_scale;
  const Skeleton2d duv = uv - j2d_ref;
  out.row.joint = duv.squaredNorm() / s2;
  out.row.lambda = lambda_schedule(uv, j2d_ref, cfg.tau);

  Vertices g_verts = Vertices::Zero(synth.mesh.vertices.rows(), 3);

  // joint term
  const Skeleton2d g_uv = 2.0 * duv / s2;
  Eigen::Matrix<double, Eigen::Dynamic, 3> g_joints = project_vjp(joints, g_uv, cfg.plane);
  Skeleton3d g_joints_fixed = g_joints;
  g_verts += skeleton_vjp(g_joints_fixed, assets);

  // descriptor consistency, only when the gate is open
  if (out.row.lambda > 0.0) {
    SoftRasterConfig rcfg = cfg.raster;
    rcfg.sigma = cfg.sigma;
    const Eigen::MatrixXd soft =
        rasterize_soft(synth.mesh.vertices, assets.faces, cfg.plane, rcfg);
    Eigen::MatrixXd g_mask;
    out.row.feat = loss_feat(descriptor, image, soft, &g_mask);
    g_verts += rasterize_soft_vjp(synth.mesh.vertices, assets.faces, cfg.plane, rcfg,
                                  out.row.lambda * g_mask);
  }

  // smoothness anchor
  Vertices g_lap_posed, g_lap_rest;
  out.row.lap = loss_lap(synth.mesh.vertices, synth.rest_vertices, adj, &g_lap_posed,
                         &g_lap_rest);
  g_verts += g_lap_posed;

  out.row.total = out.row.joint + out.row.lambda * out.row.feat + out.row.lap;
  out.grad = backprop_vertices(jac, g_verts);
  backprop_rest_vertices(assets, g_lap_rest, out.grad);
  return out;
}

MeshParams apply_step(const MeshParams& h, const Vec63& grad, double step) {
  MeshParams next(h.h - step * grad);
  const double qn = next.h.segment<4>(kQuatOffset).norm();
  if (qn > 1e-12) next.h.segment<4>(kQuatOffset) /= qn;
  return next;
}

}  // namespace

RefineResult testing_refine(const RgbImage& image, const Skeleton2d& j2d_refined,
                            const MeshParams& h0, const HandModelAssets& assets,
                            const Descriptor& descriptor, const RefineConfig& cfg) {
  const VertexAdjacency adj = build_adjacency(assets.faces);

  RefineResult res;
  res.h = h0;
  EvalResult cur = evaluate(h0, image, j2d_refined, assets, descriptor, adj, cfg);
  if (!std::isfinite(cur.row.total))
    throw std::invalid_argument("refinement objective is non-finite at h0");
  res.trace.push_back(cur.row);

  for (int it = 0; it < cfg.iterations; ++it) {
    double step = cfg.gamma;
    bool moved = false;
    for (int bo = 0; bo <= cfg.max_backoff; ++bo, step *= 0.5) {
      const MeshParams cand = apply_step(res.h, cur.grad, step);
      EvalResult next;
      try {
        next = evaluate(cand, image, j2d_refined, assets, descriptor, adj, cfg);
      } catch (const BehindCameraError&) {
        continue;  // rollback, halve the step
      }
      if (!std::isfinite(next.row.total)) return res;  // keep the last finite iterate
      res.h = cand;
      cur = next;
      moved = true;
      break;
    }
    if (!moved) return res;  // stuck against the frustum
    res.trace.push_back(cur.row);
  }
  return res;
}

void write_refine_trace_csv(const std::string& path, const std::vector<RefineTraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file: " + path);
  out << "iteration,total,joint,feature,laplacian\n";
  out.precision(10);
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << i << ',' << trace[i].total << ',' << trace[i].joint << ',' << trace[i].feat << ','
        << trace[i].lap << "\n";
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace handfit
