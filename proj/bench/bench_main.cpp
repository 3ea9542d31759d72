#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "uwbt/accuracy.hpp"
#include "uwbt/config.hpp"
#include "uwbt/solver.hpp"

using namespace uwbt;

namespace {

std::vector<RangeSet> make_batch(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<RangeSet> batch(n);
  for (auto& rs : batch) {
    const Position2D t{u(rng), u(rng)};
    for (int k = 0; k < 6; ++k) {
      const Position2D a{u(rng), u(rng)};
      rs.push_back({a, std::max(0.0, distance(a, t) + noise(rng))});
    }
  }
  return batch;
}

DeploymentConfig field() { return load_config(std::filesystem::path(UWBT_SCENARIO_DIR) / "field600.cfg"); }

void BM_SolveBatchSerial(benchmark::State& state) {
  const auto batch = make_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_batch_serial(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SolveBatchParallel(benchmark::State& state) {
  const auto batch = make_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_batch(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AccuracySerial(benchmark::State& state) {
  const auto c = field();
  for (auto _ : state) benchmark::DoNotOptimize(run_accuracy_serial(c, 16, 1));
}

void BM_AccuracyParallel(benchmark::State& state) {
  const auto c = field();
  for (auto _ : state) benchmark::DoNotOptimize(run_accuracy(c, 16, 1));
}

}  // namespace

BENCHMARK(BM_SolveBatchSerial)->Arg(1000)->Arg(20000);
BENCHMARK(BM_SolveBatchParallel)->Arg(1000)->Arg(20000);
BENCHMARK(BM_AccuracySerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AccuracyParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
