#include "handfit/losses.hpp"

namespace handfit {

namespace {

Eigen::Vector3d axis_scales(const NormalizationContext& ctx) {
  return {ctx.g, ctx.g, ctx.z_root * ctx.g / ctx.focal};
}

}  // namespace

Skeleton3d normalize_skeleton(const Skeleton3d& joints, const NormalizationContext& ctx) {
  ctx.validate();
  const Eigen::Vector3d s = axis_scales(ctx);
  Skeleton3d out = joints;
  out.rowwise() -= joints.row(ctx.root_index);
  for (int axis = 0; axis < 3; ++axis) out.col(axis) /= s[axis];
  return out;
}

Skeleton3d denormalize_skeleton(const Skeleton3d& normalized, const NormalizationContext& ctx,
                                const Eigen::Vector3d& root_position) {
  ctx.validate();
  const Eigen::Vector3d s = axis_scales(ctx);
  Skeleton3d out = normalized;
  for (int axis = 0; axis < 3; ++axis) out.col(axis) *= s[axis];
  out.rowwise() += root_position.transpose();
  return out;
}

double loss_art(const Skeleton3d& pred, const Skeleton3d& gt, const NormalizationContext& ctx,
                Skeleton3d* pred_grad) {
  const Skeleton3d diff = normalize_skeleton(pred, ctx) - normalize_skeleton(gt, ctx);
  const double loss = diff.squaredNorm();
  if (pred_grad) {
    const Eigen::Vector3d s = axis_scales(ctx);
    Skeleton3d g = 2.0 * diff;
    for (int axis = 0; axis < 3; ++axis) g.col(axis) /= s[axis];
    // the root subtraction routes every joint's gradient through the root
    g.row(ctx.root_index) -= g.colwise().sum();
    *pred_grad = g;
  }
  return loss;
}

double loss_sh(const Eigen::MatrixXd& pred_mask, const Eigen::MatrixXd& gt_mask,
               Eigen::MatrixXd* pred_grad) {
  const Eigen::MatrixXd diff = pred_mask - gt_mask;
  if (pred_grad) *pred_grad = 2.0 * diff;
  return diff.squaredNorm();
}

double loss_lap(const Vertices& posed, const Vertices& rest, const VertexAdjacency& adj,
                Vertices* posed_grad, Vertices* rest_grad) {
  const Eigen::Index nv = posed.rows();
  Vertices d(nv, 3);
  for (Eigen::Index v = 0; v < nv; ++v) {
    Eigen::RowVector3d mp = Eigen::RowVector3d::Zero(), mr = Eigen::RowVector3d::Zero();
    const int deg = adj.degree(static_cast<int>(v));
    for (int k = adj.offsets[v]; k < adj.offsets[v + 1]; ++k) {
      mp += posed.row(adj.neighbors[k]);
      mr += rest.row(adj.neighbors[k]);
    }
    if (deg > 0) {
      mp /= deg;
      mr /= deg;
    }
    d.row(v) = (posed.row(v) - mp) - (rest.row(v) - mr);
  }
  const double loss = d.squaredNorm();
  if (posed_grad || rest_grad) {
    Vertices g = Vertices::Zero(nv, 3);
    for (Eigen::Index v = 0; v < nv; ++v) {
      g.row(v) += 2.0 * d.row(v);
      const int deg = adj.degree(static_cast<int>(v));
      if (deg == 0) continue;
      const Eigen::RowVector3d spread = 2.0 * d.row(v) / deg;
      for (int k = adj.offsets[v]; k < adj.offsets[v + 1]; ++k)
        g.row(adj.neighbors[k]) -= spread;
    }
    if (posed_grad) *posed_grad = g;
    if (rest_grad) *rest_grad = -g;
  }
  return loss;
}

double loss_feat(const Descriptor& desc, const RgbImage& image, const Eigen::MatrixXd& mask,
                 Eigen::MatrixXd* mask_grad) {
  const Eigen::MatrixXd full = Eigen::MatrixXd::Ones(mask.rows(), mask.cols());
  const Eigen::VectorXd masked_feat = desc.eval(image, mask);
  const Eigen::VectorXd full_feat = desc.eval(image, full);
  const Eigen::VectorXd diff = masked_feat - full_feat;
  if (mask_grad) *mask_grad = desc.mask_vjp(image, mask, 2.0 * diff);
  return diff.squaredNorm();
}

double lambda_schedule(const Skeleton2d& pred_2d, const Skeleton2d& ref_2d, double tau) {
  const double mean_err = (pred_2d - ref_2d).rowwise().norm().mean();
  return mean_err < tau ? 1.0 : 0.0;
}

double loss_total(LossBreakdown& terms, const LossWeights& w) {
  terms.total = w.art * terms.art + w.lap * terms.lap + w.feat * terms.feat +
                terms.lambda * w.sh * terms.sh + w.ref * terms.ref;
  return terms.total;
}

}  // namespace handfit
