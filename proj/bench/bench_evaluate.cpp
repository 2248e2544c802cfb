// Serial reference against the OpenMP kernels on the same inputs.

#include <benchmark/benchmark.h>

#include "pitchlab/io.hpp"
#include "pitchlab/metrics.hpp"
#include "pitchlab/rollout.hpp"

using namespace pitchlab;

namespace {

std::vector<Segment> corpus(std::size_t n) {
  std::vector<Segment> out;
  for (std::size_t k = 0; k < n; ++k) {
    io::ScenarioSpec spec;
    spec.scenario = io::all_scenarios()[k % 5];
    spec.seed = k;
    out.push_back(io::generate_synthetic(spec));
  }
  return out;
}

void BM_EvaluateDataset(benchmark::State& state, metrics::Execution exec) {
  const auto gt = corpus(static_cast<std::size_t>(state.range(0)));
  std::vector<Segment> pred;
  for (const auto& g : gt) pred.push_back(rollout::predict_segment(rollout::ConstantVelocityPolicy{}, g, g.frames.size()));
  std::vector<metrics::SegmentPair> pairs;
  for (std::size_t k = 0; k < gt.size(); ++k) pairs.push_back({&gt[k], &pred[k]});
  auto grids = metrics::reference_grids();
  grids.push_back(metrics::AdaptiveGrid{0.05, 0.05, 0.5});
  const auto horizons = metrics::reference_horizons();
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::evaluate_dataset(pairs, grids, horizons, {}, exec));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluatePolicy(benchmark::State& state, metrics::Execution exec) {
  const auto gt = corpus(static_cast<std::size_t>(state.range(0)));
  rollout::BCParams params(50, 64);
  params.params().init_glorot(1);
  const rollout::BCPolicy bc(params);
  const auto grids = metrics::reference_grids();
  const auto horizons = metrics::reference_horizons();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout::evaluate_policy(bc, gt, grids, horizons, {}, exec));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_EvaluateDataset, serial, metrics::Execution::Serial)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_EvaluateDataset, parallel, metrics::Execution::Parallel)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_EvaluatePolicy, serial, metrics::Execution::Serial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_EvaluatePolicy, parallel, metrics::Execution::Parallel)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
