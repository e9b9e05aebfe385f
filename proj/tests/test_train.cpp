#include <doctest.h>

#include <cmath>

#include "handfit/descriptor.hpp"
#include "handfit/synth.hpp"
#include "handfit/train.hpp"
#include "test_helpers.hpp"

using namespace handfit;

namespace {

LoadedSample make_sample(std::uint64_t seed) {
  Rng rng(seed);
  const MeshParams h = testutil::random_visible_params(rng);
  const RgbImage bg = procedural_background(kImageSize, kImageSize, rng);
  GeneratedRecord rec = generate_record(h, testutil::toy(), bg, rng);
  return LoadedSample{std::move(rec.image), std::move(rec.mask), std::move(rec.gt)};
}

LinearRegressorWeights small_random_weights(int dim, std::uint64_t seed, double sigma) {
  LinearRegressorWeights w = LinearRegressorWeights::zeros(dim);
  Rng rng(seed);
  const auto fill = [&](Eigen::Ref<Eigen::MatrixXd> m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.normal(0.0, sigma);
  };
  fill(w.j3d_w);
  fill(w.j3d_b);
  fill(w.ref_w);
  fill(w.ref_b);
  return w;
}

}  // namespace

TEST_CASE("make_evidence pairs the full-frame descriptor with the keypoints") {
  Rng rng(11);
  const RgbImage image = procedural_background(kImageSize, kImageSize, rng);
  Skeleton2d j2d;
  for (int i = 0; i < kNumJoints; ++i) {
    j2d(i, 0) = rng.uniform(0.0, kImageSize);
    j2d(i, 1) = rng.uniform(0.0, kImageSize);
  }

  const GridDescriptor desc;
  const Evidence2D z = make_evidence(image, j2d, desc);
  const Eigen::VectorXd expect =
      desc.eval(image, Eigen::MatrixXd::Ones(kImageSize, kImageSize));
  CHECK((z.feature.array() == expect.array()).all());
  CHECK((z.j2d.array() == j2d.array()).all());
  CHECK_NOTHROW(z.validate());
}

TEST_CASE("per-sample weight gradient matches central differences") {
  const HandModelAssets& assets = testutil::toy();
  const GridDescriptor desc;
  const LoadedSample sample = make_sample(33);
  const Eigen::VectorXd feature =
      desc.eval(sample.image, Eigen::MatrixXd::Ones(kImageSize, kImageSize));

  LinearRegressorWeights w = small_random_weights(desc.dim(), 7, 1e-4);
  TrainConfig cfg;

  const SampleGrads base = sample_loss_and_grad(sample, feature, w, assets, desc, cfg);
  CHECK(std::isfinite(base.losses.total));
  CHECK(base.losses.total > 0.0);

  const double step = 1e-5;
  Rng pick(99);
  const auto probe = [&](Eigen::Ref<Eigen::MatrixXd> wm, const Eigen::MatrixXd& gm) {
    const Eigen::Index r = static_cast<Eigen::Index>(pick.below(wm.rows()));
    const Eigen::Index c = static_cast<Eigen::Index>(pick.below(wm.cols()));
    const double keep = wm(r, c);
    wm(r, c) = keep + step;
    const double lp = sample_loss_and_grad(sample, feature, w, assets, desc, cfg).losses.total;
    wm(r, c) = keep - step;
    const double lm = sample_loss_and_grad(sample, feature, w, assets, desc, cfg).losses.total;
    wm(r, c) = keep;
    const double fd = (lp - lm) / (2.0 * step);
    const double got = gm(r, c);
    CHECK(testutil::rel_err(fd, got, 1e-4 * (1.0 + std::abs(got))) < 2e-2);
  };

  for (int k = 0; k < 8; ++k) probe(w.j3d_w, base.grad.j3d_w);
  for (int k = 0; k < 4; ++k) probe(w.j3d_b, base.grad.j3d_b);
  for (int k = 0; k < 6; ++k) probe(w.ref_w, base.grad.ref_w);
  for (int k = 0; k < 2; ++k) probe(w.ref_b, base.grad.ref_b);
}

TEST_CASE("training runs are finite and bit-reproducible") {
  const HandModelAssets& assets = testutil::toy();
  const GridDescriptor desc;
  std::vector<LoadedSample> samples;
  for (std::uint64_t s = 0; s < 6; ++s) samples.push_back(make_sample(100 + s));

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.seed = 5;

  int calls = 0;
  const TrainResult a = train(samples, assets, desc, cfg,
                              [&](int epoch, const EpochStats& st) {
                                CHECK(epoch == calls);
                                CHECK(std::isfinite(st.mean_total));
                                ++calls;
                              });
  CHECK(calls == 2);
  REQUIRE(a.epochs.size() == 2);
  for (const EpochStats& st : a.epochs) {
    CHECK(std::isfinite(st.mean_total));
    CHECK(std::isfinite(st.mean_art));
    CHECK(std::isfinite(st.mean_ref));
    CHECK(st.lambda_fraction >= 0.0);
    CHECK(st.lambda_fraction <= 1.0);
  }
  CHECK(a.weights.j3d_w.norm() > 0.0);
  CHECK(a.weights.ref_w.norm() > 0.0);

  const TrainResult b = train(samples, assets, desc, cfg);
  CHECK((a.weights.j3d_w.array() == b.weights.j3d_w.array()).all());
  CHECK((a.weights.j3d_b.array() == b.weights.j3d_b.array()).all());
  CHECK((a.weights.ref_w.array() == b.weights.ref_w.array()).all());
  CHECK((a.weights.ref_b.array() == b.weights.ref_b.array()).all());
  for (std::size_t e = 0; e < a.epochs.size(); ++e)
    CHECK(a.epochs[e].mean_total == b.epochs[e].mean_total);
}

TEST_CASE("augmented epochs change the trajectory deterministically") {
  const HandModelAssets& assets = testutil::toy();
  const GridDescriptor desc;
  std::vector<LoadedSample> samples;
  for (std::uint64_t s = 0; s < 4; ++s) samples.push_back(make_sample(300 + s));

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 9;
  cfg.augment = true;
  cfg.augment_cfg.start_epoch = 1;
  cfg.augment_cfg.per_seed = 1;
  cfg.augment_seeds_per_epoch = 2;

  const TrainResult a = train(samples, assets, desc, cfg);
  const TrainResult b = train(samples, assets, desc, cfg);
  CHECK((a.weights.j3d_w.array() == b.weights.j3d_w.array()).all());
  CHECK((a.weights.ref_w.array() == b.weights.ref_w.array()).all());

  TrainConfig plain = cfg;
  plain.augment = false;
  const TrainResult c = train(samples, assets, desc, plain);
  CHECK_FALSE((a.weights.j3d_w.array() == c.weights.j3d_w.array()).all());
}

TEST_CASE("a poisoned sample surfaces as divergence with the failing epoch") {
  const HandModelAssets& assets = testutil::toy();
  const GridDescriptor desc;
  std::vector<LoadedSample> samples;
  samples.push_back(make_sample(41));
  samples.back().image.g.setConstant(std::numeric_limits<double>::quiet_NaN());

  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(samples, assets, desc, cfg);
    FAIL("divergence not reported");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch == 0);
  }

  CHECK_THROWS_AS(train({}, assets, desc, cfg), std::invalid_argument);
}
