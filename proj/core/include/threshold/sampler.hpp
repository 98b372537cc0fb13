#pragma once

// Multi-chain Hamiltonian Monte Carlo with dynamic trajectory lengths
// (multinomial sampling along the trajectory, generalized no-U-turn
// termination), dual-averaging step-size adaptation and a diagonal metric
// estimated over expanding warmup windows.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "threshold/log_density.hpp"

namespace threshold {

class WorkerBudget;

struct SamplerConfig {
  std::size_t chains = 5;
  std::size_t warmup_iters = 2500;
  std::size_t sampling_iters = 2500;
  double target_accept = 0.8;
  std::size_t max_tree_depth = 10;
  std::uint64_t seed = 1;
  double init_radius = 2.0;  // initial points drawn uniformly from [-r, r]^n

  /// Throws std::invalid_argument on an invalid configuration.
  void validate() const;
};

struct ChainStats {
  double warmup_seconds = 0.0;
  double sampling_seconds = 0.0;
  std::uint64_t warmup_leapfrog_steps = 0;
  std::uint64_t sampling_leapfrog_steps = 0;
  std::size_t warmup_divergences = 0;
  double step_size = 0.0;
  std::vector<double> inverse_metric;
};

/// Post-warmup draws, chain-major: values[(c * iterations + i) * dimension + k].
struct PosteriorDraws {
  std::size_t chains = 0;
  std::size_t iterations = 0;
  std::size_t dimension = 0;
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<std::uint32_t> leapfrog_steps;  // per (chain, iteration)
  std::vector<std::uint8_t> divergent;        // per (chain, iteration)
  std::vector<double> accept_stat;            // per (chain, iteration)
  std::vector<ChainStats> chain_stats;

  double at(std::size_t chain, std::size_t iteration, std::size_t k) const {
    return values[(chain * iterations + iteration) * dimension + k];
  }
  std::span<const double> draw(std::size_t chain, std::size_t iteration) const {
    return {values.data() + (chain * iterations + iteration) * dimension, dimension};
  }
  std::size_t total_draws() const { return chains * iterations; }
  /// One vector per chain for parameter k.
  std::vector<std::vector<double>> parameter_chains(std::size_t k) const;
  std::vector<double> posterior_mean() const;
  std::size_t divergences() const;

  /// Throws std::invalid_argument on inconsistent sizes or NaN draws.
  void validate() const;

  /// Every draw equal to q; used to evaluate reports at fixed parameters.
  static PosteriorDraws constant(std::vector<std::string> names, std::span<const double> q, std::size_t chains,
                                 std::size_t iterations);
};

/// Run config.chains chains concurrently, each holding a slot of `budget`
/// (the global budget when null) while it runs. Chains start at
/// initial_points when given (one per chain), otherwise uniformly in
/// [-init_radius, init_radius]^n. Deterministic in (seed, chain count,
/// initial points) regardless of scheduling.
/// Throws std::runtime_error if no finite initial point is found and
/// std::invalid_argument on malformed initial points.
PosteriorDraws sample(const LogDensity& target, const SamplerConfig& config, WorkerBudget* budget = nullptr,
                      std::span<const std::vector<double>> initial_points = {});

/// |H(end) - H(start)| after `steps` leapfrog steps of size step_size under a
/// unit metric. Exposed for integrator-order checks.
double leapfrog_energy_error(const LogDensity& target, std::span<const double> q, std::span<const double> p,
                             double step_size, std::size_t steps);

}  // namespace threshold
