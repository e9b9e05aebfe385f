#include "doctest.h"
#include "handfit/losses.hpp"
#include "test_helpers.hpp"

using namespace handfit;

namespace {

NormalizationContext random_ctx(Rng& rng) {
  NormalizationContext ctx;
  ctx.g = rng.uniform(20.0, 200.0);
  ctx.z_root = rng.uniform(1.5, 3.5);
  ctx.focal = kDefaultFocal;
  return ctx;
}

Skeleton3d random_skeleton(Rng& rng) {
  Skeleton3d s;
  for (int i = 0; i < s.size(); ++i) s.data()[i] = rng.normal(0.0, 0.6);
  s.col(2).array() += 2.5;
  return s;
}

// Octahedron: every vertex is adjacent to the four non-antipodal ones.
void octahedron(Vertices& v, Faces& f) {
  v.resize(6, 3);
  v << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
  f.resize(8, 3);
  f << 0, 2, 4, 2, 1, 4, 1, 3, 4, 3, 0, 4, 2, 0, 5, 1, 2, 5, 3, 1, 5, 0, 3, 5;
}

}  // namespace

TEST_CASE("skeleton normalization centers the root and scales per axis") {
  Rng rng(61);
  const NormalizationContext ctx = random_ctx(rng);
  Skeleton3d s = random_skeleton(rng);
  const Skeleton3d n = normalize_skeleton(s, ctx);
  CHECK(n.row(ctx.root_index).norm() < 1e-12);

  Skeleton3d shifted = s;
  shifted(4, 0) += ctx.g;  // one g along x maps to exactly one unit
  const Skeleton3d n2 = normalize_skeleton(shifted, ctx);
  CHECK(n2(4, 0) - n(4, 0) == doctest::Approx(1.0).epsilon(1e-9));

  shifted = s;
  shifted(4, 2) += ctx.z_root * ctx.g / ctx.focal;
  const Skeleton3d n3 = normalize_skeleton(shifted, ctx);
  CHECK(n3(4, 2) - n(4, 2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("denormalization inverts normalization to high precision") {
  Rng rng(62);
  for (int trial = 0; trial < 100; ++trial) {
    const NormalizationContext ctx = random_ctx(rng);
    const Skeleton3d s = random_skeleton(rng);
    const Skeleton3d back =
        denormalize_skeleton(normalize_skeleton(s, ctx), ctx, s.row(ctx.root_index));
    CHECK((back - s).cwiseAbs().maxCoeff() / std::max(1.0, s.cwiseAbs().maxCoeff()) < 1e-9);
  }
}

TEST_CASE("articulation loss matches its normalized-space definition") {
  Rng rng(63);
  const NormalizationContext ctx = random_ctx(rng);
  const Skeleton3d pred = random_skeleton(rng);
  const Skeleton3d gt = random_skeleton(rng);

  CHECK(loss_art(gt, gt, ctx) == 0.0);
  const double expect =
      (normalize_skeleton(pred, ctx) - normalize_skeleton(gt, ctx)).squaredNorm();
  CHECK(loss_art(pred, gt, ctx) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("articulation loss gradients match central differences") {
  Rng rng(64);
  const NormalizationContext ctx = random_ctx(rng);
  const Skeleton3d pred = random_skeleton(rng);
  const Skeleton3d gt = random_skeleton(rng);
  Skeleton3d grad;
  loss_art(pred, gt, ctx, &grad);

  const double step = 1e-6;
  for (int j : {0, ctx.root_index, 17})
    for (int axis = 0; axis < 3; ++axis) {
      auto value = [&](double delta) {
        Skeleton3d p = pred;
        p(j, axis) += delta;
        return loss_art(p, gt, ctx);
      };
      const double fd = (value(step) - value(-step)) / (2.0 * step);
      CHECK(testutil::rel_err(grad(j, axis), fd, 1e-8) < 1e-5);
    }
}

TEST_CASE("laplacian loss on a displaced octahedron has the closed form") {
  Vertices rest;
  Faces faces;
  octahedron(rest, faces);
  const VertexAdjacency adj = build_adjacency(faces, 6);
  for (int v = 0; v < 6; ++v) REQUIRE(adj.degree(v) == 4);

  const double eps = 0.01;
  Vertices posed = rest;
  posed(0, 0) += eps;
  CHECK(loss_lap(posed, rest, adj) ==
        doctest::Approx(eps * eps * (1.0 + 1.0 / 4.0)).epsilon(1e-10));
  CHECK(loss_lap(rest, rest, adj) == 0.0);
}

TEST_CASE("laplacian loss equals a direct per-vertex recomputation") {
  const HandModelAssets& a = testutil::toy();
  const VertexAdjacency adj = build_adjacency(a.faces);
  Rng rng(65);
  Vertices rest = a.template_vertices;
  Vertices posed = rest;
  for (int i = 0; i < posed.size(); ++i) posed.data()[i] += rng.normal(0.0, 0.01);

  double expect = 0.0;
  for (int v = 0; v < kNumVertices; ++v) {
    Eigen::RowVector3d mp = Eigen::RowVector3d::Zero(), mr = Eigen::RowVector3d::Zero();
    for (int k = adj.offsets[v]; k < adj.offsets[v + 1]; ++k) {
      mp += posed.row(adj.neighbors[k]);
      mr += rest.row(adj.neighbors[k]);
    }
    mp /= adj.degree(v);
    mr /= adj.degree(v);
    expect += ((posed.row(v) - mp) - (rest.row(v) - mr)).squaredNorm();
  }
  CHECK(loss_lap(posed, rest, adj) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("laplacian gradients for posed and rest meshes match central differences") {
  Vertices rest;
  Faces faces;
  octahedron(rest, faces);
  const VertexAdjacency adj = build_adjacency(faces, 6);
  Rng rng(66);
  Vertices posed = rest;
  for (int i = 0; i < posed.size(); ++i) posed.data()[i] += rng.normal(0.0, 0.05);
  Vertices rj = rest;
  for (int i = 0; i < rj.size(); ++i) rj.data()[i] += rng.normal(0.0, 0.05);

  Vertices gp, gr;
  loss_lap(posed, rj, adj, &gp, &gr);
  const double step = 1e-6;
  for (int v = 0; v < 6; ++v)
    for (int axis = 0; axis < 3; ++axis) {
      auto posed_at = [&](double d) {
        Vertices p = posed;
        p(v, axis) += d;
        return loss_lap(p, rj, adj);
      };
      auto rest_at = [&](double d) {
        Vertices r = rj;
        r(v, axis) += d;
        return loss_lap(posed, r, adj);
      };
      CHECK(testutil::rel_err(gp(v, axis), (posed_at(step) - posed_at(-step)) / (2 * step),
                              1e-8) < 1e-5);
      CHECK(testutil::rel_err(gr(v, axis), (rest_at(step) - rest_at(-step)) / (2 * step),
                              1e-8) < 1e-5);
    }
}

TEST_CASE("feature loss vanishes on a full mask and its gradient checks out") {
  Rng rng(67);
  RgbImage img(kImageSize, kImageSize);
  for (auto* c : {&img.r, &img.g, &img.b})
    for (int i = 0; i < c->size(); ++i) c->data()[i] = rng.u01();
  const GridDescriptor desc;

  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(kImageSize, kImageSize);
  CHECK(loss_feat(desc, img, ones) == 0.0);

  Eigen::MatrixXd mask(kImageSize, kImageSize);
  for (int i = 0; i < mask.size(); ++i) mask.data()[i] = rng.u01();
  Eigen::MatrixXd grad;
  const double base = loss_feat(desc, img, mask, &grad);
  CHECK(base > 0.0);

  const double step = 1e-6;
  for (int probe = 0; probe < 6; ++probe) {
    const int y = static_cast<int>(rng.below(kImageSize));
    const int x = static_cast<int>(rng.below(kImageSize));
    auto value = [&](double d) {
      Eigen::MatrixXd m = mask;
      m(y, x) += d;
      return loss_feat(desc, img, m);
    };
    const double fd = (value(step) - value(-step)) / (2.0 * step);
    CHECK(testutil::rel_err(grad(y, x), fd, 1e-8) < 1e-4);
  }
}

TEST_CASE("silhouette loss is the squared pixel difference with a linear gradient") {
  Rng rng(68);
  Eigen::MatrixXd a(8, 9), b(8, 9);
  for (int i = 0; i < a.size(); ++i) {
    a.data()[i] = rng.u01();
    b.data()[i] = rng.u01();
  }
  Eigen::MatrixXd grad;
  const double loss = loss_sh(a, b, &grad);
  CHECK(loss == doctest::Approx((a - b).squaredNorm()).epsilon(1e-12));
  CHECK((grad - 2.0 * (a - b)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(loss_sh(b, b) == 0.0);
}

TEST_CASE("the lambda gate opens strictly below tau") {
  Skeleton2d ref = Skeleton2d::Zero();
  Skeleton2d pred = ref;
  CHECK(lambda_schedule(pred, ref, 15.0) == 1.0);

  pred.col(0).setConstant(15.0);  // mean per-joint error exactly tau
  CHECK(lambda_schedule(pred, ref, 15.0) == 0.0);

  pred.col(0).setConstant(14.999);
  CHECK(lambda_schedule(pred, ref, 15.0) == 1.0);

  pred.col(0).setConstant(40.0);
  CHECK(lambda_schedule(pred, ref, 15.0) == 0.0);
}

TEST_CASE("total loss composes the weighted terms with the gated silhouette") {
  LossBreakdown t;
  t.art = 0.7;
  t.lap = 0.2;
  t.feat = 1.3;
  t.sh = 0.9;
  t.ref = 2.1;
  t.lambda = 1.0;
  LossWeights w;
  w.art = 2.0;
  w.lap = 0.5;
  w.feat = 1.5;
  w.sh = 3.0;
  w.ref = 0.25;
  const double total = loss_total(t, w);
  CHECK(total == doctest::Approx(2.0 * 0.7 + 0.5 * 0.2 + 1.5 * 1.3 + 1.0 * 3.0 * 0.9 +
                                 0.25 * 2.1)
                     .epsilon(1e-12));
  CHECK(t.total == total);

  t.lambda = 0.0;
  CHECK(loss_total(t, w) ==
        doctest::Approx(2.0 * 0.7 + 0.5 * 0.2 + 1.5 * 1.3 + 0.25 * 2.1).epsilon(1e-12));
}
