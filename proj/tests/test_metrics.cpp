#include <doctest.h>

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "handfit/metrics.hpp"
#include "handfit/rng.hpp"
#include "test_helpers.hpp"

using namespace handfit;

namespace {

std::vector<Skeleton3d> random_skeletons(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Skeleton3d> out(n);
  for (Skeleton3d& s : out)
    for (int j = 0; j < kNumJoints; ++j)
      for (int a = 0; a < 3; ++a) s(j, a) = rng.normal();
  return out;
}

}  // namespace

TEST_CASE("pck is perfect on identical skeletons") {
  const auto gt = random_skeletons(5, 1);
  const PckCurve c = compute_pck_auc(gt, gt, {0.1, 0.2, 0.3});
  for (double p : c.pck) CHECK(p == 1.0);
  CHECK(c.auc == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a uniform offset produces a step curve") {
  // quarter-unit coordinates keep every distance exactly representable
  Rng rng(2);
  std::vector<Skeleton3d> gt(4);
  for (Skeleton3d& s : gt)
    for (int j = 0; j < kNumJoints; ++j)
      for (int a = 0; a < 3; ++a) s(j, a) = 0.25 * (static_cast<double>(rng.below(17)) - 8.0);
  auto pred = gt;
  for (Skeleton3d& s : pred) s.col(2).array() += 0.25;

  const PckCurve c = compute_pck_auc(pred, gt, {0.1, 0.2, 0.25, 0.4});
  CHECK(c.pck[0] == 0.0);
  CHECK(c.pck[1] == 0.0);
  CHECK(c.pck[2] == 1.0);  // inclusive threshold
  CHECK(c.pck[3] == 1.0);
  const double area = 0.5 * 0.05 + 0.15;
  CHECK(c.auc == doctest::Approx(area / 0.3).epsilon(1e-12));
}

TEST_CASE("pck and auc agree with a direct recount") {
  const auto gt = random_skeletons(7, 3);
  auto pred = gt;
  Rng rng(4);
  for (Skeleton3d& s : pred)
    for (int j = 0; j < kNumJoints; ++j)
      for (int a = 0; a < 3; ++a) s(j, a) += rng.normal(0.0, 0.7);

  const std::vector<double> thr{0.5, 1.0, 1.5, 2.0};
  const PckCurve c = compute_pck_auc(pred, gt, thr);

  std::vector<double> expect;
  for (double t : thr) {
    int hit = 0, all = 0;
    for (std::size_t i = 0; i < gt.size(); ++i)
      for (int j = 0; j < kNumJoints; ++j, ++all)
        hit += (pred[i].row(j) - gt[i].row(j)).norm() <= t;
    expect.push_back(static_cast<double>(hit) / all);
  }
  REQUIRE(c.pck.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(c.pck[i] == expect[i]);

  double area = 0.0;
  for (std::size_t i = 1; i < thr.size(); ++i)
    area += 0.5 * (expect[i] + expect[i - 1]) * (thr[i] - thr[i - 1]);
  CHECK(c.auc == doctest::Approx(area / (thr.back() - thr.front())).epsilon(1e-12));
}

TEST_CASE("pck validates its inputs") {
  const auto gt = random_skeletons(2, 5);
  const auto one = random_skeletons(1, 6);
  CHECK_THROWS_AS(compute_pck_auc(one, gt, {0.1, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(compute_pck_auc(gt, gt, {0.1}), std::invalid_argument);
  CHECK_THROWS_AS(compute_pck_auc(gt, gt, {0.2, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(compute_pck_auc(gt, gt, {0.3, 0.2}), std::invalid_argument);
}

TEST_CASE("segmentation metrics cover the canonical cases") {
  Eigen::MatrixXd gt = Eigen::MatrixXd::Zero(4, 4);
  gt.topRows(2).setOnes();

  const SegMetrics same = compute_seg_metrics(gt, gt);
  CHECK(same.iou == 1.0);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 100.0);

  Eigen::MatrixXd disjoint = Eigen::MatrixXd::Zero(4, 4);
  disjoint.bottomRows(2).setOnes();
  const SegMetrics none = compute_seg_metrics(disjoint, gt);
  CHECK(none.iou == 0.0);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  Eigen::MatrixXd half = Eigen::MatrixXd::Zero(4, 4);
  half.topRows(1).setOnes();
  const SegMetrics sub = compute_seg_metrics(half, gt);
  CHECK(sub.precision == 1.0);
  CHECK(sub.recall == 0.5);
  CHECK(sub.iou == 0.5);
  CHECK(sub.f1 == doctest::Approx(100.0 * 2.0 * 0.5 / 1.5).epsilon(1e-12));

  const Eigen::MatrixXd empty = Eigen::MatrixXd::Zero(4, 4);
  const SegMetrics blank = compute_seg_metrics(empty, empty);
  CHECK(blank.iou == 1.0);
  CHECK(blank.precision == 1.0);
  CHECK(blank.recall == 1.0);

  CHECK_THROWS_AS(compute_seg_metrics(Eigen::MatrixXd::Zero(3, 4), gt), std::invalid_argument);
}

TEST_CASE("per-sample segmentation metrics average elementwise") {
  SegMetrics a{1.0, 1.0, 1.0, 100.0};
  SegMetrics b{0.5, 1.0, 0.5, 200.0 / 3.0};
  const SegMetrics avg = average_seg_metrics({a, b});
  CHECK(avg.iou == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(avg.precision == 1.0);
  CHECK(avg.recall == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(avg.f1 == doctest::Approx(250.0 / 3.0).epsilon(1e-12));

  const SegMetrics zero = average_seg_metrics({});
  CHECK(zero.iou == 0.0);
}

TEST_CASE("the eval report serializes every number to four decimals") {
  EvalReport rep;
  rep.num_samples = 3;
  rep.mean_joint_error = 1.0 / 3.0;
  rep.pck.thresholds = {0.2, 0.3};
  rep.pck.pck = {2.0 / 3.0, 1.0};
  rep.pck.auc = 5.0 / 6.0;
  rep.seg = {1.0 / 7.0, 2.0 / 7.0, 3.0 / 7.0, 400.0 / 7.0};

  const std::string path = "eval_report_test.json";
  write_eval_report(path, rep);
  std::ifstream in(path);
  REQUIRE(in.good());
  const nlohmann::json j = nlohmann::json::parse(in);

  CHECK(j["num_samples"] == 3);
  CHECK(j["mean_joint_error"].get<double>() == 0.3333);
  CHECK(j["pck"]["thresholds"] == std::vector<double>({0.2, 0.3}));
  CHECK(j["pck"]["values"][0].get<double>() == 0.6667);
  CHECK(j["pck"]["values"][1].get<double>() == 1.0);
  CHECK(j["pck"]["auc"].get<double>() == 0.8333);
  CHECK(j["segmentation"]["iou"].get<double>() == 0.1429);
  CHECK(j["segmentation"]["precision"].get<double>() == 0.2857);
  CHECK(j["segmentation"]["recall"].get<double>() == 0.4286);
  CHECK(j["segmentation"]["f1"].get<double>() == 57.1429);
  std::remove(path.c_str());
}
