#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "handfit/descriptor.hpp"
#include "handfit/refine.hpp"
#include "handfit/synth.hpp"
#include "test_helpers.hpp"

using namespace handfit;

namespace {

struct RefineScene {
  GeneratedRecord rec;
  MeshParams h0;
};

// A labelled record plus a start point displaced from the generating
// parameters, so descent has a visible residual to work against.
RefineScene make_scene(std::uint64_t seed, double pose_sigma, double trans_sigma) {
  Rng rng(seed);
  const MeshParams gt = testutil::random_visible_params(rng);
  const RgbImage bg = procedural_background(kImageSize, kImageSize, rng);
  RefineScene sc{generate_record(gt, testutil::toy(), bg, rng), gt};
  for (int i = 0; i < kPoseDim; ++i) sc.h0.h[kPoseOffset + i] += rng.normal(0.0, pose_sigma);
  for (int i = 0; i < 3; ++i) sc.h0.h[kTransOffset + i] += rng.normal(0.0, trans_sigma);
  return sc;
}

}  // namespace

TEST_CASE("zero iterations return the start point with a single trace row") {
  const RefineScene sc = make_scene(21, 0.05, 0.02);
  const GridDescriptor desc;
  RefineConfig cfg;
  cfg.iterations = 0;
  const RefineResult res =
      testing_refine(sc.rec.image, sc.rec.gt.j2d, sc.h0, testutil::toy(), desc, cfg);
  CHECK((res.h.h.array() == sc.h0.h.array()).all());
  REQUIRE(res.trace.size() == 1);
  CHECK(std::isfinite(res.trace[0].total));
}

TEST_CASE("trace has one row per accepted iterate plus the start") {
  const RefineScene sc = make_scene(22, 0.05, 0.02);
  const GridDescriptor desc;
  RefineConfig cfg;
  cfg.iterations = 12;
  const RefineResult res =
      testing_refine(sc.rec.image, sc.rec.gt.j2d, sc.h0, testutil::toy(), desc, cfg);
  REQUIRE(res.trace.size() == 13);
  for (const RefineTraceRow& row : res.trace) {
    CHECK(std::isfinite(row.total));
    CHECK(row.total >= 0.0);
    CHECK(row.total ==
          doctest::Approx(row.joint + row.lambda * row.feat + row.lap).epsilon(1e-12));
  }
}

TEST_CASE("a small step descends monotonically at first") {
  const RefineScene sc = make_scene(23, 0.08, 0.03);
  const GridDescriptor desc;
  RefineConfig cfg;
  cfg.iterations = 10;
  cfg.gamma = 1e-4;
  const RefineResult res =
      testing_refine(sc.rec.image, sc.rec.gt.j2d, sc.h0, testutil::toy(), desc, cfg);
  REQUIRE(res.trace.size() == 11);
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].total <= res.trace[i - 1].total + 1e-12);
}

TEST_CASE("the default schedule reduces the objective and keeps the quaternion unit") {
  const RefineScene sc = make_scene(24, 0.08, 0.03);
  const GridDescriptor desc;
  const RefineResult res =
      testing_refine(sc.rec.image, sc.rec.gt.j2d, sc.h0, testutil::toy(), desc);
  REQUIRE(res.trace.size() == 51);
  CHECK(res.trace.back().total < res.trace.front().total);
  CHECK(res.h.h.segment<4>(kQuatOffset).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the joint term ignores depth-scale compensated camera changes") {
  const RefineScene sc = make_scene(25, 0.0, 0.0);
  const GridDescriptor desc;
  RefineConfig cfg;
  cfg.iterations = 0;

  MeshParams scaled = sc.h0;
  const double eps = 0.05;
  scaled.h[kScaleOffset] *= 1.0 + eps;
  scaled.h.segment<3>(kTransOffset) *= 1.0 + eps;

  const RefineResult a =
      testing_refine(sc.rec.image, sc.rec.gt.j2d, sc.h0, testutil::toy(), desc, cfg);
  const RefineResult b =
      testing_refine(sc.rec.image, sc.rec.gt.j2d, scaled, testutil::toy(), desc, cfg);
  CHECK(testutil::rel_err(a.trace[0].joint, b.trace[0].joint, 1e-12) < 1e-6);
  // the anchor term is scale sensitive, so totals must not be compared
  CHECK(a.trace[0].lap != b.trace[0].lap);
}

TEST_CASE("the gate follows the keypoint residual") {
  const RefineScene sc = make_scene(26, 0.0, 0.0);
  const GridDescriptor desc;
  RefineConfig cfg;
  cfg.iterations = 0;

  const RefineResult exact =
      testing_refine(sc.rec.image, sc.rec.gt.j2d, sc.h0, testutil::toy(), desc, cfg);
  CHECK(exact.trace[0].lambda == 1.0);

  Skeleton2d far = sc.rec.gt.j2d;
  far.col(0).array() += 4.0 * cfg.tau;
  const RefineResult off =
      testing_refine(sc.rec.image, far, sc.h0, testutil::toy(), desc, cfg);
  CHECK(off.trace[0].lambda == 0.0);
}

TEST_CASE("trace rows serialize to the documented csv layout") {
  const RefineScene sc = make_scene(27, 0.05, 0.02);
  const GridDescriptor desc;
  RefineConfig cfg;
  cfg.iterations = 3;
  const RefineResult res =
      testing_refine(sc.rec.image, sc.rec.gt.j2d, sc.h0, testutil::toy(), desc, cfg);

  const std::string path = "refine_trace_test.csv";
  write_refine_trace_csv(path, res.trace);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "iteration,total,joint,feature,laplacian");
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    REQUIRE(vals.size() == 5);
    CHECK(vals[0] == static_cast<double>(rows));
    CHECK(vals[1] == doctest::Approx(res.trace[rows].total).epsilon(1e-9));
    CHECK(vals[2] == doctest::Approx(res.trace[rows].joint).epsilon(1e-9));
    CHECK(vals[3] == doctest::Approx(res.trace[rows].feat).epsilon(1e-9));
    CHECK(vals[4] == doctest::Approx(res.trace[rows].lap).epsilon(1e-9));
    ++rows;
  }
  CHECK(rows == static_cast<int>(res.trace.size()));
  std::remove(path.c_str());
}

TEST_CASE("a non-finite start point is rejected") {
  const RefineScene sc = make_scene(28, 0.0, 0.0);
  const GridDescriptor desc;
  MeshParams bad = sc.h0;
  bad.h[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(
      testing_refine(sc.rec.image, sc.rec.gt.j2d, bad, testutil::toy(), desc),
      std::invalid_argument);
}
