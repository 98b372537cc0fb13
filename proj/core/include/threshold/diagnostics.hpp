#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "threshold/sampler.hpp"

namespace threshold {

using ChainSet = std::vector<std::vector<double>>;

/// Classic split R-hat (each chain halved, between/within variance ratio).
double split_rhat(const ChainSet& chains);

/// Rank-normalised split R-hat: max of the bulk and folded (|x - median|)
/// variants. Constant input gives 1.
double rank_normalized_rhat(const ChainSet& chains);

/// Effective sample size from split chains, autocorrelations summed over
/// Geyer's initial monotone sequence.
double effective_sample_size(const ChainSet& chains);

/// Type-7 sample quantile; `values` need not be sorted.
double quantile(std::vector<double> values, double prob);

struct ParameterDiagnostics {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double rhat = 1.0;
  double ess = 0.0;
};

struct Diagnostics {
  std::vector<ParameterDiagnostics> parameters;
  std::size_t chains = 0;
  std::size_t total_draws = 0;
  std::uint64_t leapfrog_steps = 0;  // post-warmup, all chains
  double sampling_seconds = 0.0;     // post-warmup, summed over chains
  double warmup_seconds = 0.0;
  double max_chain_seconds = 0.0;  // slowest chain, warmup included
  std::size_t divergences = 0;
  double divergence_rate = 0.0;

  double min_ess = 0.0;
  double mean_ess = 0.0;
  double max_rhat = 1.0;

  // Cost decomposition; all per post-warmup draw and based on min_ess.
  double seconds_per_neff = 0.0;
  double samples_per_neff = 0.0;
  double steps_per_sample = 0.0;
  double seconds_per_step = 0.0;

  /// |seconds_per_neff - product of the three factors| / seconds_per_neff.
  double identity_residual() const;
};

/// Throws std::invalid_argument for fewer than two chains or an empty run;
/// logs a warning below 100 draws per chain.
Diagnostics diagnose(const PosteriorDraws& draws);

}  // namespace threshold
