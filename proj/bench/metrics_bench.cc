// Serial reference vs OpenMP kernels for the metric hot paths.

#include <benchmark/benchmark.h>

#include <random>

#include "probe/metrics.h"
#include "probe/metrics_reference.h"

namespace {

using namespace probe;

const Dataset& dataset() {
  static const Dataset d = generate_fixture(FixtureSpec::builtin(4), 1);
  return d;
}

std::vector<ScoreRecord> records(std::size_t n) {
  const auto& d = dataset();
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  std::vector<ScoreRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({d.items[i % d.items.size()].id, "m", u(rng), u(rng), nullptr});
  return out;
}

std::vector<MetricRow> rows(std::size_t n) {
  auto r = metric_rows(records(n), dataset()).rows;
  std::mt19937_64 rng(7);
  for (auto& row : r) {
    row.scorer_id = "s" + std::to_string(rng() % 4);
    row.checkpoint_steps = (1 + rng() % 17) * 25000;
  }
  return r;
}

const std::vector<Dim> kDims = {Dim::kScorer, Dim::kCheckpoint, Dim::kDependency, Dim::kLength, Dim::kAttractor};

void BM_MetricRowsSerial(benchmark::State& state) {
  const auto recs = records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::metric_rows_serial(recs, dataset(), std::nullopt));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MetricRowsParallel(benchmark::State& state) {
  const auto recs = records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metric_rows(recs, dataset()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AggregateSerial(benchmark::State& state) {
  const auto r = rows(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::aggregate_serial(r, kDims));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AggregateParallel(benchmark::State& state) {
  const auto r = rows(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(r, kDims));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_MetricRowsSerial)->Arg(4368)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_MetricRowsParallel)->Arg(4368)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_AggregateSerial)->Arg(4368)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_AggregateParallel)->Arg(4368)->Arg(1 << 16)->Arg(1 << 20);

}  // namespace

BENCHMARK_MAIN();
