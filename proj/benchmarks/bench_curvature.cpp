#include <benchmark/benchmark.h>

#include "vflow/curvature.hpp"
#include "vflow/ingest.hpp"

namespace {

vflow::Varifold circle(int samples) {
  vflow::ShapeSpec spec;
  spec.samples = samples;
  return vflow::generate(spec);
}

void BM_CurvatureField(benchmark::State& state) {
  const vflow::Varifold v = circle(static_cast<int>(state.range(0)));
  const vflow::Kernel k(2, 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vflow::curvature_field(v, k));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CurvatureField)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Dissipation(benchmark::State& state) {
  const vflow::Varifold v = circle(static_cast<int>(state.range(0)));
  const vflow::Kernel k(2, 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vflow::dissipation(v, k));
  }
}
BENCHMARK(BM_Dissipation)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace
