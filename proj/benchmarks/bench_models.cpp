#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "threshold/frisk_model.hpp"
#include "threshold/robustness.hpp"
#include "threshold/sampler.hpp"
#include "threshold/stop_model.hpp"

using namespace threshold;

namespace {

std::vector<double> start_point(std::size_t n) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> q(n);
  for (auto& x : q) x = u(rng);
  return q;
}

const FriskModel& frisk_model() {
  static const FriskModel model(generate(frisk_scenario(3, 30, 10000, 1)), {});
  return model;
}

const StopModel& stop_model() {
  static const StopModel model(generate_stop(stop_scenario(3, 30, 30000, 1)), {});
  return model;
}

void BM_FriskLogDensity(benchmark::State& state) {
  const auto& model = frisk_model();
  const auto q = start_point(model.dimension());
  for (auto _ : state) benchmark::DoNotOptimize(model.log_density(q));
}
BENCHMARK(BM_FriskLogDensity);

void BM_FriskGradient(benchmark::State& state) {
  const auto& model = frisk_model();
  const auto q = start_point(model.dimension());
  std::vector<double> grad(q.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.log_density_gradient(q, grad));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_FriskGradient);

void BM_StopGradient(benchmark::State& state) {
  const auto& model = stop_model();
  const auto q = start_point(model.dimension());
  std::vector<double> grad(q.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.log_density_gradient(q, grad));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_StopGradient);

void BM_FriskLeapfrog(benchmark::State& state) {
  const auto& model = frisk_model();
  const auto q = start_point(model.dimension());
  std::vector<double> p(q.size());
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  for (auto& x : p) x = z(rng);
  const auto steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(leapfrog_energy_error(model, q, p, 1e-3, steps));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FriskLeapfrog)->Arg(16)->Arg(256);

}  // namespace
