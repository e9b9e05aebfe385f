#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "handfit/descriptor.hpp"
#include "handfit/heatmap.hpp"
#include "handfit/image.hpp"
#include "handfit/shade.hpp"
#include "test_helpers.hpp"

using namespace handfit;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("pgm round trip preserves every byte level") {
  Eigen::MatrixXd gray(3, 256);
  for (int k = 0; k < 256; ++k) gray.col(k).setConstant(k / 255.0);
  const auto path = temp_file("handfit_gray.pgm");
  write_pgm(path.string(), gray);
  const Eigen::MatrixXd back = read_pgm(path.string());
  CHECK((back - gray).cwiseAbs().maxCoeff() == 0.0);
  fs::remove(path);
}

TEST_CASE("byte quantization rounds half up") {
  Eigen::MatrixXd gray(1, 4);
  // 0.5/255 rounds up to 1, just below rounds down; values clamp to [0,255]
  gray << 0.5 / 255.0, 0.499 / 255.0, -0.25, 1.5;
  const auto path = temp_file("handfit_round.pgm");
  write_pgm(path.string(), gray);
  const Eigen::MatrixXd back = read_pgm(path.string());
  CHECK(back(0, 0) == doctest::Approx(1.0 / 255.0).epsilon(1e-12));
  CHECK(back(0, 1) == 0.0);
  CHECK(back(0, 2) == 0.0);
  CHECK(back(0, 3) == 1.0);
  fs::remove(path);
}

TEST_CASE("ppm round trip is exact on quantized colors and rejects bad headers") {
  Rng rng(51);
  RgbImage img(5, 7);
  for (auto* c : {&img.r, &img.g, &img.b})
    for (int i = 0; i < c->size(); ++i)
      c->data()[i] = std::round(rng.u01() * 255.0) / 255.0;
  const auto path = temp_file("handfit_color.ppm");
  write_ppm(path.string(), img);
  const RgbImage back = read_ppm(path.string());
  CHECK((back.r - img.r).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.g - img.g).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.b - img.b).cwiseAbs().maxCoeff() == 0.0);

  std::ofstream bad(path, std::ios::binary);
  bad << "P6\n7 5\n65535\n";
  bad.close();
  CHECK_THROWS_AS(read_ppm(path.string()), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("pgm parser skips comment lines") {
  const auto path = temp_file("handfit_comment.pgm");
  std::ofstream out(path, std::ios::binary);
  out << "P5\n# a comment\n2 1\n# another\n255\n";
  out.put(static_cast<char>(0));
  out.put(static_cast<char>(255));
  out.close();
  const Eigen::MatrixXd m = read_pgm(path.string());
  CHECK(m.rows() == 1);
  CHECK(m.cols() == 2);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(0, 1) == 1.0);
  fs::remove(path);
}

TEST_CASE("grid descriptor matches a direct per-cell recomputation") {
  Rng rng(52);
  RgbImage img(kImageSize, kImageSize);
  Eigen::MatrixXd mask(kImageSize, kImageSize);
  for (auto* c : {&img.r, &img.g, &img.b})
    for (int i = 0; i < c->size(); ++i) c->data()[i] = rng.u01();
  for (int i = 0; i < mask.size(); ++i) mask.data()[i] = rng.u01();

  const GridDescriptor desc;
  const Eigen::VectorXd f = desc.eval(img, mask);
  REQUIRE(f.size() == 1024);

  const int cell = GridDescriptor::kCell;
  for (int gy : {0, 7, 15})
    for (int gx : {3, 12}) {
      double msum = 0.0, r = 0.0, g = 0.0, b = 0.0, rp = 0.0, gp = 0.0, bp = 0.0;
      for (int y = gy * cell; y < (gy + 1) * cell; ++y)
        for (int x = gx * cell; x < (gx + 1) * cell; ++x) {
          msum += mask(y, x);
          r += mask(y, x) * img.r(y, x);
          g += mask(y, x) * img.g(y, x);
          b += mask(y, x) * img.b(y, x);
          rp += img.r(y, x);
          gp += img.g(y, x);
          bp += img.b(y, x);
        }
      const double n = cell * cell;
      const double denom = msum + GridDescriptor::kBlend;
      const double s = GridDescriptor::kNorm;
      const int base = 4 * (gy * GridDescriptor::kGrid + gx);
      CHECK(f[base + 0] ==
            doctest::Approx(s * (r + GridDescriptor::kBlend * rp / n) / denom).epsilon(1e-10));
      CHECK(f[base + 1] ==
            doctest::Approx(s * (g + GridDescriptor::kBlend * gp / n) / denom).epsilon(1e-10));
      CHECK(f[base + 2] ==
            doctest::Approx(s * (b + GridDescriptor::kBlend * bp / n) / denom).epsilon(1e-10));
      CHECK(f[base + 3] == doctest::Approx(s * msum / n).epsilon(1e-10));
    }
}

TEST_CASE("constant images give mask-independent color features") {
  RgbImage img(kImageSize, kImageSize);
  img.r.setConstant(0.6);
  img.g.setConstant(0.3);
  img.b.setConstant(0.8);
  Rng rng(53);
  Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(kImageSize, kImageSize);
  Eigen::MatrixXd m2(kImageSize, kImageSize);
  for (int i = 0; i < m2.size(); ++i) m2.data()[i] = rng.u01();

  const GridDescriptor desc;
  const Eigen::VectorXd f1 = desc.eval(img, m1);
  const Eigen::VectorXd f2 = desc.eval(img, m2);
  for (int c = 0; c < 256; ++c)
    for (int k = 0; k < 3; ++k)
      CHECK(f1[4 * c + k] == doctest::Approx(f2[4 * c + k]).epsilon(1e-9));
}

TEST_CASE("descriptor mask gradients match central differences") {
  Rng rng(54);
  RgbImage img(kImageSize, kImageSize);
  Eigen::MatrixXd mask(kImageSize, kImageSize);
  for (auto* c : {&img.r, &img.g, &img.b})
    for (int i = 0; i < c->size(); ++i) c->data()[i] = rng.u01();
  for (int i = 0; i < mask.size(); ++i) mask.data()[i] = rng.u01();
  const GridDescriptor desc;
  Eigen::VectorXd w(desc.dim());
  for (int i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, 1.0);

  const Eigen::MatrixXd analytic = desc.mask_vjp(img, mask, w);
  const double step = 1e-6;
  for (int probe = 0; probe < 8; ++probe) {
    const int y = static_cast<int>(rng.below(kImageSize));
    const int x = static_cast<int>(rng.below(kImageSize));
    auto value = [&](double delta) {
      Eigen::MatrixXd m = mask;
      m(y, x) += delta;
      return w.dot(desc.eval(img, m));
    };
    const double fd = (value(step) - value(-step)) / (2.0 * step);
    CHECK(testutil::rel_err(analytic(y, x), fd, 1e-8) < 1e-5);
  }
}

TEST_CASE("heatmap encoding peaks at the joint cell and decodes back") {
  Skeleton2d joints = Skeleton2d::Zero();
  joints(0, 0) = 0.0;
  joints(0, 1) = 0.0;
  for (int j = 1; j < kNumJoints; ++j) {
    joints(j, 0) = std::fmod(10.5 * j, 224.0);
    joints(j, 1) = 224.0 - 9.0 * j;
  }
  const Heatmaps maps = encode_heatmaps(joints);
  REQUIRE(maps.size() == kNumJoints);
  for (const auto& m : maps) {
    CHECK(m.rows() == kHeatmapSize);
    CHECK(m.cols() == kHeatmapSize);
    CHECK(m.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.minCoeff() >= 0.0);
  }

  const Skeleton2d decoded = decode_heatmaps(maps);
  // joint at the image origin decodes to the first cell center
  CHECK(decoded(0, 0) == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(decoded(0, 1) == doctest::Approx(3.5).epsilon(1e-12));
  for (int j = 0; j < kNumJoints; ++j) {
    CHECK(std::abs(decoded(j, 0) - joints(j, 0)) <= 7.0);
    CHECK(std::abs(decoded(j, 1) - joints(j, 1)) <= 7.0);
  }
}

TEST_CASE("heatmap argmax ties resolve to the lowest row-major cell") {
  Heatmaps maps(kNumJoints, Eigen::MatrixXd::Zero(kHeatmapSize, kHeatmapSize));
  maps[0](4, 9) = 1.0;
  maps[0](4, 10) = 1.0;  // same value, later column
  maps[0](11, 2) = 1.0;  // same value, later row
  const Skeleton2d decoded = decode_heatmaps(maps);
  CHECK(decoded(0, 0) == doctest::Approx((9 + 0.5) * 7.0));
  CHECK(decoded(0, 1) == doctest::Approx((4 + 0.5) * 7.0));
}

TEST_CASE("shaded rendering covers exactly the hard mask") {
  const HandModelAssets& a = testutil::toy();
  Rng rng(55);
  const MeshParams h = testutil::random_visible_params(rng);
  const Vertices v = synthesize_mesh(h, a).mesh.vertices;
  const ImagePlane plane;

  RgbImage bg(plane.height, plane.width);
  bg.r.setConstant(0.2);
  bg.g.setConstant(0.4);
  bg.b.setConstant(0.6);
  const Eigen::Vector3d albedo(0.8, 0.55, 0.45);
  const Eigen::Vector3d light = Eigen::Vector3d(0.2, -0.3, -1.0).normalized();
  const RgbImage img = render_shaded(v, a.faces, plane, albedo, light, bg);
  const Eigen::MatrixXd mask = rasterize_hard(v, a.faces, plane);

  for (int y = 0; y < plane.height; ++y)
    for (int x = 0; x < plane.width; ++x) {
      const bool bg_pixel =
          img.r(y, x) == 0.2 && img.g(y, x) == 0.4 && img.b(y, x) == 0.6;
      CHECK(bg_pixel == (mask(y, x) == 0.0));
    }
}

TEST_CASE("shading brightness is bounded and lit faces are brighter than ambient") {
  const HandModelAssets& a = testutil::toy();
  Rng rng(56);
  const MeshParams h = testutil::random_visible_params(rng);
  const Vertices v = synthesize_mesh(h, a).mesh.vertices;
  const ImagePlane plane;
  RgbImage bg(plane.height, plane.width);
  const Eigen::Vector3d albedo(1.0, 1.0, 1.0);
  const Eigen::Vector3d light(0.0, 0.0, -1.0);
  const RgbImage img = render_shaded(v, a.faces, plane, albedo, light, bg);
  const Eigen::MatrixXd mask = rasterize_hard(v, a.faces, plane);

  double max_val = 0.0;
  for (int y = 0; y < plane.height; ++y)
    for (int x = 0; x < plane.width; ++x)
      if (mask(y, x) > 0.5) {
        CHECK(img.r(y, x) >= kAmbient - 1e-12);
        max_val = std::max(max_val, img.r(y, x));
      }
  CHECK(max_val > kAmbient + 0.1);
  CHECK(max_val <= 1.0 + kAmbient + 1e-12);
}
