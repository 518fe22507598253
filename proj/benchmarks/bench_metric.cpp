#include <benchmark/benchmark.h>

#include <random>

#include "vflow/metric.hpp"

namespace {

vflow::Varifold random_cloud(std::mt19937_64& rng, int atoms) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> mass(0.1, 1.0);
  vflow::Varifold v(1, 2);
  for (int i = 0; i < atoms; ++i) {
    vflow::Vec x(2);
    x << normal(rng), normal(rng);
    vflow::Mat dir(1, 2);
    dir << normal(rng), normal(rng);
    v.add({x, vflow::Plane::from_spanning_rows(dir), mass(rng)});
  }
  return v;
}

void BM_BLDistance(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int atoms = static_cast<int>(state.range(0));
  const vflow::Varifold a = random_cloud(rng, atoms);
  const vflow::Varifold b = random_cloud(rng, atoms);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vflow::bl_distance(a, b));
  }
}
BENCHMARK(BM_BLDistance)->Arg(25)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace
