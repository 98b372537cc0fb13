#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "threshold/distributions.hpp"
#include "threshold/model.hpp"

using namespace threshold;

namespace {

std::vector<double> thresholds(std::size_t n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> t(n);
  for (auto& x : t) x = u(rng);
  return t;
}

void BM_Ccdf(benchmark::State& state) {
  const DiscParams p(0.3, static_cast<double>(state.range(0)) / 4.0);
  const auto ts = thresholds(1024);
  for (auto _ : state) {
    double acc = 0.0;
    for (double t : ts) acc += ccdf(t, p);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ts.size()));
}
BENCHMARK(BM_Ccdf)->Arg(1)->Arg(4)->Arg(16);

void BM_ConditionalMean(benchmark::State& state) {
  const DiscParams p(0.3, static_cast<double>(state.range(0)) / 4.0);
  const auto ts = thresholds(1024);
  for (auto _ : state) {
    double acc = 0.0;
    for (double t : ts) acc += conditional_mean(t, p);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ts.size()));
}
BENCHMARK(BM_ConditionalMean)->Arg(1)->Arg(4)->Arg(16);

void BM_DerivedRates(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<CellParams> cells(1024);
  for (auto& c : cells) c = {z(rng) - 1.0, 0.5 * z(rng), z(rng) - 1.5};
  for (auto _ : state) {
    double acc = 0.0;
    for (const auto& c : cells) {
      const auto r = derived_rates(c);
      acc += r.search_rate + r.hit_rate;
    }
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cells.size()));
}
BENCHMARK(BM_DerivedRates);

void BM_DrawLabeled(benchmark::State& state) {
  const DiscParams p(0.5, 1.5);
  std::mt19937_64 rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(draw_labeled(p, rng));
}
BENCHMARK(BM_DrawLabeled);

}  // namespace
