#include <benchmark/benchmark.h>

#include "handfit/camera.hpp"
#include "handfit/mesh.hpp"
#include "handfit/rasterize.hpp"
#include "handfit/rng.hpp"
#include "handfit/toy_model.hpp"

namespace {

using namespace handfit;

struct Scene {
  HandModelAssets assets = gen_toy_model(7);
  Vertices vertices;
  ImagePlane plane;

  Scene() {
    MeshParams h;
    Rng rng(11);
    for (int i = 0; i < kPoseDim; ++i) h.h[i] = assets.mean_pose[i] + rng.normal(0.0, 0.1);
    vertices = synthesize_mesh(h, assets).mesh.vertices;
  }
};

const Scene& scene() {
  static Scene s;
  return s;
}

void BM_RasterizeHard(benchmark::State& state) {
  const Scene& s = scene();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rasterize_hard(s.vertices, s.assets.faces, s.plane));
  }
}
BENCHMARK(BM_RasterizeHard)->Unit(benchmark::kMillisecond);

void BM_RasterizeSoft(benchmark::State& state) {
  const Scene& s = scene();
  SoftRasterConfig cfg;
  cfg.sigma = 1.0;
  cfg.window_start = state.range(0);
  cfg.window_end = state.range(0) + 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rasterize_soft(s.vertices, s.assets.faces, s.plane, cfg));
  }
}
BENCHMARK(BM_RasterizeSoft)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_RasterizeSoftVjp(benchmark::State& state) {
  const Scene& s = scene();
  SoftRasterConfig cfg;
  cfg.sigma = 1.0;
  const Eigen::MatrixXd occ_grad = Eigen::MatrixXd::Constant(s.plane.height, s.plane.width, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rasterize_soft_vjp(s.vertices, s.assets.faces, s.plane, cfg, occ_grad));
  }
}
BENCHMARK(BM_RasterizeSoftVjp)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
