#include <benchmark/benchmark.h>

#include "handfit/mesh.hpp"
#include "handfit/rng.hpp"
#include "handfit/toy_model.hpp"

namespace {

using namespace handfit;

const HandModelAssets& assets() {
  static HandModelAssets a = gen_toy_model(7);
  return a;
}

MeshParams random_params(std::uint64_t seed) {
  const HandModelAssets& a = assets();
  MeshParams h;
  Rng rng(seed);
  for (int i = 0; i < kPoseDim; ++i) h.h[i] = a.mean_pose[i] + rng.normal(0.0, 0.1);
  for (int i = 0; i < kShapeDim; ++i) h.h[kShapeOffset + i] = rng.normal(0.0, 0.5);
  return h;
}

void BM_SynthesizeMesh(benchmark::State& state) {
  const MeshParams h = random_params(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_mesh(h, assets()));
  }
}
BENCHMARK(BM_SynthesizeMesh)->Unit(benchmark::kMicrosecond);

void BM_SynthesizeMeshJacobian(benchmark::State& state) {
  const MeshParams h = random_params(3);
  MeshJacobian jac;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_mesh(h, assets(), &jac));
    benchmark::DoNotOptimize(jac.dv);
  }
}
BENCHMARK(BM_SynthesizeMeshJacobian)->Unit(benchmark::kMicrosecond);

void BM_RegressSkeleton(benchmark::State& state) {
  const Vertices v = synthesize_mesh(random_params(3), assets()).mesh.vertices;
  for (auto _ : state) {
    benchmark::DoNotOptimize(regress_skeleton(v, assets()));
  }
}
BENCHMARK(BM_RegressSkeleton)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
