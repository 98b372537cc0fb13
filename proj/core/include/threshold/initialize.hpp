#pragma once

// Chain starting points for the threshold models. Uniform random starts can
// land where stop or search probabilities saturate at 0 or 1; the gradient
// vanishes there and warmup adapts to a vanishing step size. Each start is
// instead moved toward a mode of prior + beta * likelihood with beta annealed
// up to 1, holding the hierarchical scales (log sigma) at their random values
// so the search cannot run into the sigma -> 0 funnel.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "threshold/log_density.hpp"
#include "threshold/model.hpp"

namespace threshold {

struct InitConfig {
  std::size_t starts = 4;                  // random starts per chain; the best is kept
  std::size_t iterations_per_stage = 200;  // L-BFGS iterations per beta
  std::vector<double> schedule = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0};

  /// Throws std::invalid_argument on an invalid configuration.
  void validate() const;
};

/// One starting point per chain for `model`, whose density must be
/// log_prior(layout, priors, .) plus a likelihood. Starts are drawn uniformly
/// from [-radius, radius]^n. Deterministic in (seed, chain).
/// Throws std::runtime_error if a chain finds no finite start.
std::vector<std::vector<double>> annealed_starts(const LogDensity& model, const ModelLayout& layout,
                                                 const PriorConfig& priors, std::size_t chains, double radius,
                                                 std::uint64_t seed, const InitConfig& config = {});

}  // namespace threshold
