#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "vflow/kernel.hpp"

namespace {

void BM_KernelEval(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const vflow::Kernel k(n, 0.1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  std::vector<vflow::Vec> points(1024, vflow::Vec(n));
  for (vflow::Vec& x : points) {
    for (int i = 0; i < n; ++i) {
      x(i) = u(rng);
    }
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(k.eval(points[i++ % points.size()]));
  }
}
BENCHMARK(BM_KernelEval)->Arg(1)->Arg(2)->Arg(3);

void BM_KernelConstruct(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(vflow::Kernel(2, 0.1));
  }
}
BENCHMARK(BM_KernelConstruct);

}  // namespace
