// Serial reference kernels vs their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "autoscale/closeness.hpp"
#include "autoscale/mapgen.hpp"
#include "autoscale/metrics.hpp"
#include "autoscale/pipeline.hpp"
#include "autoscale/synth.hpp"

using namespace autoscale;

namespace {

PointSet scene(std::uint32_t size) {
  // Roughly 1 point per 400 px^2, clustered.
  const double parents = 1.0 / (400.0 * 40.0);
  return generate({size, size, ThomasProcess{parents, 40.0, 10.0}, 7});
}

void BM_DensitySerial(benchmark::State& st) {
  const auto p = scene(static_cast<std::uint32_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(reference::density_map(p, {}));
  st.counters["points"] = static_cast<double>(p.size());
}

void BM_DensityParallel(benchmark::State& st) {
  const auto p = scene(static_cast<std::uint32_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(density_map(p, {}));
  st.counters["points"] = static_cast<double>(p.size());
}

void BM_DistanceSerial(benchmark::State& st) {
  const auto p = scene(static_cast<std::uint32_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(reference::distance_map(p));
}

void BM_DistanceParallel(benchmark::State& st) {
  const auto p = scene(static_cast<std::uint32_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(distance_map(p));
}

void BM_NearestSerial(benchmark::State& st) {
  const auto p = generate({1024, 1024, PoissonProcess{double(st.range(0)) / (1024.0 * 1024.0)}, 3});
  for (auto _ : st) benchmark::DoNotOptimize(reference::nn_distances(p));
}

void BM_NearestGrid(benchmark::State& st) {
  const auto p = generate({1024, 1024, PoissonProcess{double(st.range(0)) / (1024.0 * 1024.0)}, 3});
  for (auto _ : st) benchmark::DoNotOptimize(nn_distances(p));
}

void BM_Match(benchmark::State& st) {
  const auto gt = scene(512);
  const auto pred = OracleNoisy(gt, {1.0, 0.05, 20.0, 9}).perturbed();
  MatchConfig cfg;
  cfg.strategy = st.range(0) ? MatchStrategy::Optimal : MatchStrategy::Greedy;
  for (auto _ : st) benchmark::DoNotOptimize(match_points(pred, gt, cfg));
  st.SetLabel(st.range(0) ? "optimal" : "greedy");
}

}  // namespace

BENCHMARK(BM_DensitySerial)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DensityParallel)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceSerial)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceParallel)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NearestSerial)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NearestGrid)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Match)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
