#include "handfit/train.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "handfit/camera.hpp"
#include "handfit/mesh.hpp"

namespace handfit {

namespace {

Eigen::VectorXd flat_j2d(const Skeleton2d& j) {
  Eigen::VectorXd v(kJoint2dDim);
  for (int i = 0; i < kNumJoints; ++i) {
    v[2 * i] = j(i, 0);
    v[2 * i + 1] = j(i, 1);
  }
  return v;
}

Skeleton2d unflat_j2d(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Skeleton2d j;
  for (int i = 0; i < kNumJoints; ++i) {
    j(i, 0) = v[2 * i];
    j(i, 1) = v[2 * i + 1];
  }
  return j;
}

Eigen::VectorXd flat_j3d(const Skeleton3d& j) {
  Eigen::VectorXd v(3 * kNumJoints);
  for (int i = 0; i < kNumJoints; ++i) v.segment<3>(3 * i) = j.row(i).transpose();
  return v;
}

Skeleton3d unflat_j3d(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Skeleton3d j;
  for (int i = 0; i < kNumJoints; ++i) j.row(i) = v.segment<3>(3 * i).transpose();
  return j;
}

// One training instance seen through the estimator: three taped regression
// rounds, the loss terms on the final mesh, and reverse-mode accumulation
// back to the two weight matrices.
SampleGrads instance_pass(const RgbImage& image, const Eigen::MatrixXd& gt_mask,
                          const GroundTruth& gt, const Eigen::VectorXd& feature,
                          const LinearRegressorWeights& w, const HandModelAssets& assets,
                          const Descriptor& descriptor, const VertexAdjacency& adj,
                          const TrainConfig& cfg) {
  const int d = static_cast<int>(feature.size());

  // ---- forward with tape ----
  std::array<Vec63, kHmeIterations + 1> h;
  std::array<Skeleton2d, kHmeIterations + 1> j2d;
  std::array<Skeleton3d, kHmeIterations> j3d;
  std::array<MeshJacobian, kHmeIterations> jac;
  std::array<Eigen::VectorXd, kHmeIterations> x_in, y_in;
  Vertices final_verts, final_rest;

  SampleGrads out;
  out.grad = LinearRegressorWeights::zeros(d);
  LossBreakdown& L = out.losses;

  const double fscale = feature_input_scale(d);
  h[0] = initial_params(assets).h;
  j2d[0] = gt.j2d;  // evidence keypoints
  for (int t = 0; t < kHmeIterations; ++t) {
    Eigen::VectorXd x(d + kJoint2dDim + kParamDim);
    x << feature * fscale, flat_j2d(j2d[t]) / kImageSize, h[t];
    x_in[t] = x;
    h[t + 1] = h[t] + (w.j3d_w.transpose() * x + w.j3d_b);

    // poisoned inputs (NaN feature or keypoints) surface as a NaN loss so the
    // epoch mean reports divergence; an iterate that merely left the valid
    // parameter domain is a skippable excursion of the current weights
    if (!h[t + 1].allFinite()) {
      L.total = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    MeshSynthesis synth;
    try {
      synth = synthesize_mesh(to_synthesis_encoding(MeshParams(h[t + 1])), assets, &jac[t]);
    } catch (const std::invalid_argument&) {
      out.skipped = true;
      return out;
    }
    j3d[t] = regress_skeleton(synth.mesh.vertices, assets);
    if (t == kHmeIterations - 1) {
      final_verts = synth.mesh.vertices;
      final_rest = synth.rest_vertices;
    }

    Eigen::VectorXd y(kJoint2dDim + d + kParamDim + 3 * kNumJoints);
    y << flat_j2d(j2d[t]) / kImageSize, feature * fscale, h[t + 1], flat_j3d(j3d[t]);
    y_in[t] = y;
    j2d[t + 1] = unflat_j2d(kImageSize * (w.ref_w.transpose() * y + w.ref_b));
  }

  // ---- losses on the final iterate ----

  Skeleton3d g_art;
  L.art = loss_art(j3d[kHmeIterations - 1], gt.joints, gt.ctx, &g_art);

  Vertices g_lap_posed, g_lap_rest;
  L.lap = loss_lap(final_verts, final_rest, adj, &g_lap_posed, &g_lap_rest);

  // the refiner residual is measured in [0,1] image coordinates so the term
  // lands on the same scale as the skeleton and descriptor losses; in raw
  // pixels it is larger by 224^2 and its gradient cross-talk through y drowns
  // the articulation supervision of j3d_w
  for (int t = 0; t < kHmeIterations; ++t)
    L.ref += ((j2d[t + 1] - gt.j2d) / kImageSize).squaredNorm();

  // silhouette gate from the projected skeleton; raster-dependent terms are
  // dropped (with zero gradient) if the mesh leaves the view frustum
  Vertices g_raster = Vertices::Zero(final_verts.rows(), 3);
  try {
    const Skeleton2d pred2d = project(j3d[kHmeIterations - 1], cfg.plane);
    L.lambda = lambda_schedule(pred2d, gt.j2d, cfg.weights.tau);
    const Eigen::MatrixXd soft =
        rasterize_soft(final_verts, assets.faces, cfg.plane, cfg.raster);
    Eigen::MatrixXd g_mask_feat, g_mask_sh;
    L.feat = loss_feat(descriptor, image, soft, &g_mask_feat);
    Eigen::MatrixXd occ_grad = cfg.weights.feat * g_mask_feat;
    if (L.lambda > 0.0) {
      L.sh = loss_sh(soft, gt_mask, &g_mask_sh);
      occ_grad += L.lambda * cfg.weights.sh * g_mask_sh;
    }
    g_raster = rasterize_soft_vjp(final_verts, assets.faces, cfg.plane, cfg.raster, occ_grad);
  } catch (const BehindCameraError&) {
    L.lambda = 0.0;
    L.feat = 0.0;
    L.sh = 0.0;
  }
  loss_total(L, cfg.weights);

  // ---- reverse pass ----
  std::array<Vec63, kHmeIterations + 1> g_h;
  std::array<Skeleton2d, kHmeIterations + 1> g_j2d;
  std::array<Skeleton3d, kHmeIterations> g_j3d;
  std::array<Vertices, kHmeIterations> g_verts;
  for (auto& v : g_h) v.setZero();
  for (auto& v : g_j2d) v.setZero();
  for (auto& v : g_j3d) v.setZero();
  for (int t = 0; t < kHmeIterations; ++t)
    g_verts[t] = Vertices::Zero(final_verts.rows(), 3);

  for (int t = 0; t < kHmeIterations; ++t)
    g_j2d[t + 1] =
        cfg.weights.ref * 2.0 * (j2d[t + 1] - gt.j2d) / (kImageSize * kImageSize);
  g_j3d[kHmeIterations - 1] = cfg.weights.art * g_art;
  g_verts[kHmeIterations - 1] = cfg.weights.lap * g_lap_posed + g_raster;
  // rest mesh depends on the shape block of the final h
  Vec63 g_h_rest = Vec63::Zero();
  backprop_rest_vertices(assets, cfg.weights.lap * g_lap_rest, g_h_rest);
  g_h[kHmeIterations] += g_h_rest;

  for (int t = kHmeIterations - 1; t >= 0; --t) {
    // refiner: j2d[t+1] = 224 * (ref_w^T y_t + ref_b)
    const Eigen::VectorXd gout = kImageSize * flat_j2d(g_j2d[t + 1]);
    out.grad.ref_w.noalias() += y_in[t] * gout.transpose();
    out.grad.ref_b += gout;
    const Eigen::VectorXd gy = w.ref_w * gout;
    g_j2d[t] += unflat_j2d(gy.segment(0, kJoint2dDim)) / kImageSize;
    g_h[t + 1] += gy.segment(kJoint2dDim + d, kParamDim);
    g_j3d[t] += unflat_j3d(gy.segment(kJoint2dDim + d + kParamDim, 3 * kNumJoints));

    // skeleton regression and mesh synthesis
    g_verts[t] += skeleton_vjp(g_j3d[t], assets);
    g_h[t + 1] += backprop_vertices(jac[t], g_verts[t]);

    // regress step: h[t+1] = h[t] + j3d_w^T x_t + j3d_b
    out.grad.j3d_w.noalias() += x_in[t] * g_h[t + 1].transpose();
    out.grad.j3d_b += g_h[t + 1];
    const Eigen::VectorXd gx = w.j3d_w * g_h[t + 1];
    g_j2d[t] += unflat_j2d(gx.segment(d, kJoint2dDim)) / kImageSize;
    g_h[t] += gx.segment(d + kJoint2dDim, kParamDim) + g_h[t + 1];
  }
  return out;
}

std::vector<int> shuffled_indices(int n, Rng rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

struct AdamState {
  Eigen::MatrixXd m, v;
  explicit AdamState(const Eigen::MatrixXd& like)
      : m(Eigen::MatrixXd::Zero(like.rows(), like.cols())),
        v(Eigen::MatrixXd::Zero(like.rows(), like.cols())) {}

  template <typename W, typename G>
  void update(W& w, const G& g, const AdamConfig& cfg, int step) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    w -= (cfg.lr * (m / bc1).array() / ((v / bc2).array().sqrt() + cfg.eps)).matrix();
  }
};

struct TrainItem {
  const RgbImage* image;
  const Eigen::MatrixXd* mask;
  const GroundTruth* gt;
  const Eigen::VectorXd* feature;
};

}  // namespace

Evidence2D make_evidence(const RgbImage& image, const Skeleton2d& j2d,
                         const Descriptor& descriptor) {
  Evidence2D z;
  z.feature = descriptor.eval(
      image, Eigen::MatrixXd::Ones(image.height(), image.width()));
  z.j2d = j2d;
  return z;
}

SampleGrads sample_loss_and_grad(const LoadedSample& sample, const Eigen::VectorXd& feature,
                                 const LinearRegressorWeights& w, const HandModelAssets& assets,
                                 const Descriptor& descriptor, const TrainConfig& cfg) {
  const VertexAdjacency adj = build_adjacency(assets.faces);
  return instance_pass(sample.image, sample.mask, sample.gt, feature, w, assets, descriptor,
                       adj, cfg);
}

TrainResult train(const std::vector<LoadedSample>& samples, const HandModelAssets& assets,
                  const Descriptor& descriptor, const TrainConfig& cfg,
                  const std::function<void(int, const EpochStats&)>& on_epoch) {
  if (samples.empty()) throw std::invalid_argument("training needs at least one sample");

  const VertexAdjacency adj = build_adjacency(assets.faces);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(kImageSize, kImageSize);

  std::vector<Eigen::VectorXd> features;
  features.reserve(samples.size());
  for (const auto& s : samples) features.push_back(descriptor.eval(s.image, ones));

  TrainResult res;
  res.weights = LinearRegressorWeights::zeros(descriptor.dim());
  AdamState st_jw(res.weights.j3d_w), st_jb(res.weights.j3d_b);
  AdamState st_rw(res.weights.ref_w), st_rb(res.weights.ref_b);

  std::deque<GeneratedRecord> extra;
  std::deque<Eigen::VectorXd> extra_features;
  const Rng root(cfg.seed);
  int adam_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.augment && epoch >= cfg.augment_cfg.start_epoch &&
        cfg.augment_seeds_per_epoch > 0) {
      // rotate deterministically through the base data for seed predictions
      std::vector<MeshParams> seeds;
      for (int j = 0; j < cfg.augment_seeds_per_epoch; ++j) {
        const int idx = static_cast<int>(
            (static_cast<long long>(epoch) * cfg.augment_seeds_per_epoch + j) %
            static_cast<long long>(samples.size()));
        Evidence2D z;
        z.feature = features[idx];
        z.j2d = samples[idx].gt.j2d;
        try {
          seeds.push_back(run_hme(z, res.weights, assets).h);
        } catch (const std::exception&) {
          // skip seeds the current weights cannot process
        }
      }
      auto recs = augment_epoch_hook(epoch, seeds, cfg.augment_cfg, assets,
                                     root.split(0xA0660000ULL + epoch));
      for (auto& r : recs) {
        extra_features.push_back(descriptor.eval(r.image, ones));
        extra.push_back(std::move(r));
      }
      while (static_cast<int>(extra.size()) > cfg.max_augmented_records) {
        extra.pop_front();
        extra_features.pop_front();
      }
    }

    std::vector<TrainItem> items;
    items.reserve(samples.size() + extra.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
      items.push_back({&samples[i].image, &samples[i].mask, &samples[i].gt, &features[i]});
    for (std::size_t i = 0; i < extra.size(); ++i)
      items.push_back({&extra[i].image, &extra[i].mask, &extra[i].gt, &extra_features[i]});

    const std::vector<int> order =
        shuffled_indices(static_cast<int>(items.size()), root.split(0x5EED0ULL + epoch));

    EpochStats stats;
    double sum_total = 0.0, sum_art = 0.0, sum_ref = 0.0, sum_lambda = 0.0;
    std::size_t contributed = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      LinearRegressorWeights acc = LinearRegressorWeights::zeros(descriptor.dim());
      std::size_t used = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const TrainItem& it = items[order[k]];
        const SampleGrads sg = instance_pass(*it.image, *it.mask, *it.gt, *it.feature,
                                             res.weights, assets, descriptor, adj, cfg);
        if (sg.skipped) continue;
        ++used;
        acc.j3d_w += sg.grad.j3d_w;
        acc.j3d_b += sg.grad.j3d_b;
        acc.ref_w += sg.grad.ref_w;
        acc.ref_b += sg.grad.ref_b;
        sum_total += sg.losses.total;
        sum_art += sg.losses.art;
        sum_ref += sg.losses.ref;
        sum_lambda += sg.losses.lambda;
      }
      if (used == 0) continue;
      contributed += used;
      const double inv = 1.0 / static_cast<double>(used);
      ++adam_step;
      st_jw.update(res.weights.j3d_w, acc.j3d_w * inv, cfg.adam, adam_step);
      st_jb.update(res.weights.j3d_b, acc.j3d_b * inv, cfg.adam, adam_step);
      st_rw.update(res.weights.ref_w, acc.ref_w * inv, cfg.adam, adam_step);
      st_rb.update(res.weights.ref_b, acc.ref_b * inv, cfg.adam, adam_step);
    }

    // an epoch where every sample escaped the domain has no defined mean
    const double n = static_cast<double>(contributed);
    stats.mean_total = sum_total / n;
    stats.mean_art = sum_art / n;
    stats.mean_ref = sum_ref / n;
    stats.lambda_fraction = sum_lambda / n;
    if (!std::isfinite(stats.mean_total)) throw TrainingDiverged(epoch);
    res.epochs.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);
  }
  return res;
}

}  // namespace handfit
