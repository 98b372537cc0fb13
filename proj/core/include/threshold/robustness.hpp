#pragma once

// Synthetic data generation and the robustness battery: posterior predictive
// checks, threshold-heterogeneity refits, placebo relabeling, subset
// disaggregation and census sensitivity.

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "threshold/inference.hpp"
#include "threshold/records.hpp"

namespace threshold {

struct SyntheticSpec {
  std::vector<std::string> races;
  std::vector<std::string> locations;
  ModelParams params;                // generating parameters
  std::vector<std::int64_t> stops;   // per cell, r * D + d
  double heterogeneity_sigma = 0.0;  // stop-level threshold is logit-normal(logit t_rd, sigma)
  std::uint64_t seed = 1;
  std::size_t placebo_levels = 7;                 // levels of the independent "day" attribute
  std::map<std::string, std::string> attributes;  // copied onto every generated record

  ModelLayout layout() const { return ModelLayout(races.size(), locations.size()); }
  /// Throws std::invalid_argument on inconsistent sizes, negative counts or sigma < 0.
  void validate() const;
};

/// Aggregated counts of the per-stop process. Each cell has its own random
/// stream and every stop consumes the same draws whatever sigma is, so specs
/// differing only in sigma share their random numbers.
FriskData generate(const SyntheticSpec& spec);
/// The same stops as generate(), one record each; aggregate() of the result
/// equals generate(spec). Records carry a uniformly random "day" attribute.
std::vector<RawStopRecord> generate_records(const SyntheticSpec& spec);

/// Reference frisk scenario: race 0 is held to a higher threshold than the
/// other races; location effects and per-cell thresholds are drawn from seed.
SyntheticSpec frisk_scenario(std::size_t races = 3, std::size_t locations = 30, std::int64_t stops_per_cell = 10000,
                             std::uint64_t seed = 1);

struct StopSyntheticSpec {
  std::vector<std::string> races;
  std::vector<std::string> locations;
  ModelParams params;
  std::vector<std::vector<double>> census;  // per location, one share per race
  std::vector<std::int64_t> stops;          // total stops per location
  std::uint64_t seed = 1;

  ModelLayout layout() const { return ModelLayout(races.size(), locations.size()); }
  void validate() const;
};

/// Stop composition ~ Multinomial(N_d, theta_d), hits ~ Binomial(S_rd, h_rd).
StopData generate_stop(const StopSyntheticSpec& spec);
StopSyntheticSpec stop_scenario(std::size_t races = 3, std::size_t locations = 30,
                                std::int64_t stops_per_location = 30000, std::uint64_t seed = 1);

struct PPCCell {
  std::size_t race = 0;
  std::size_t location = 0;
  std::int64_t stops = 0;
  double observed_rate = 0.0;  // search rate (frisk) or share of the location's stops (stop model)
  double predicted_rate = 0.0;
  double observed_hit_rate = 0.0;  // NaN when the cell has no searches
  double predicted_hit_rate = 0.0;
};

struct PPCReport {
  std::vector<PPCCell> cells;
  double rate_rmse = 0.0;  // stop-weighted
  double hit_rate_rmse = 0.0;  // stop-weighted over cells with at least one search
  // Values reported for the original real-data frisk fit, for scale.
  static constexpr double kReferenceRateRmse = 0.0005;
  static constexpr double kReferenceHitRateRmse = 0.025;
};

/// Predicted rates are posterior means over the draws; the _at variants
/// evaluate them at one fixed parameter vector.
PPCReport ppc(const PosteriorDraws& draws, const FriskData& data);
PPCReport ppc_at(std::span<const double> q, const FriskData& data);
PPCReport ppc_stop(const PosteriorDraws& draws, const StopData& data);
PPCReport ppc_stop_at(std::span<const double> q, const StopData& data);

struct SweepConfig {
  PriorConfig priors;
  SamplerConfig sampler;
  WorkerBudget* budget = nullptr;  // global budget when null
};

std::vector<double> default_sigma_grid();

struct HeterogeneityPoint {
  double sigma = 0.0;
  FitResult fit;
};
/// Regenerate `base` at each sigma (same seed) and refit. Fits run
/// concurrently under the worker budget.
std::vector<HeterogeneityPoint> heterogeneity_sweep(const SyntheticSpec& base, std::span<const double> sigmas,
                                                    const SweepConfig& config);

class IdentifiabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Fit the frisk model with `column` standing in for race.
FitResult placebo(const std::vector<RawStopRecord>& records, const std::string& column, const SweepConfig& config);
/// Always throws IdentifiabilityError: relabeling breaks the census link the
/// stop model relies on.
[[noreturn]] void placebo(const StopData& data, const std::string& column);

struct LevelFit {
  std::string level;
  std::size_t records = 0;
  FitResult fit;
};
/// One independent fit per level of `column`, concurrently under the budget.
/// With `levels` empty every observed level is used; requested levels without
/// records are skipped with a warning.
std::vector<LevelFit> subset_disaggregate(const std::vector<RawStopRecord>& records, const std::string& column,
                                          const SweepConfig& config, std::vector<std::string> levels = {});

struct CensusPoint {
  double factor = 1.0;
  FitResult fit;
};
std::vector<CensusPoint> census_sweep(const StopData& data, std::size_t race, std::span<const double> factors,
                                      const SweepConfig& config);

bool intervals_overlap(const RaceThreshold& a, const RaceThreshold& b);
/// Every pair of race-level credible intervals overlaps.
bool all_intervals_overlap(const ThresholdTable& table);

/// Race-level posterior means never increase from one table to the next, for every race.
bool thresholds_nonincreasing(std::span<const ThresholdTable* const> tables);
/// Sign of (mean_r - mean_reference) is the same in every table, for every race r.
bool gaps_preserved(std::span<const ThresholdTable* const> tables, std::size_t reference);
/// Every pairwise order of race-level means is the same in every table.
bool ordering_preserved(std::span<const ThresholdTable* const> tables);

}  // namespace threshold
