#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "threshold/diagnostics.hpp"
#include "threshold/frisk_model.hpp"
#include "threshold/sampler.hpp"
#include "threshold/stop_model.hpp"

namespace threshold {

struct CellThreshold {
  std::size_t race = 0;
  std::size_t location = 0;
  double mean = 0.0;
  double lower = 0.0;  // 2.5% posterior quantile
  double upper = 0.0;  // 97.5% posterior quantile
};

struct RaceThreshold {
  std::size_t race = 0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct ThresholdTable {
  std::vector<std::string> races;
  std::vector<std::string> locations;
  std::vector<CellThreshold> cells;  // r * D + d
  std::vector<RaceThreshold> race_level;
};

/// Posterior summaries of t_rd on the probability scale. Race-level values
/// average each draw's thresholds over locations, weighting location d by its
/// total stops across races so every race is compared on the same geography;
/// equal weights are used when no stops are given or all are zero.
/// Throws std::invalid_argument when the draws do not match the layout.
ThresholdTable extract_thresholds(const PosteriorDraws& draws, const ModelLayout& layout,
                                  std::span<const double> stops_by_cell, std::vector<std::string> races,
                                  std::vector<std::string> locations);

struct FitResult {
  PosteriorDraws draws;
  std::optional<Diagnostics> diagnostics;  // absent for single-chain runs
  ThresholdTable thresholds;
  double wall_seconds = 0.0;
};

FitResult fit_frisk(const FriskData& data, const PriorConfig& priors, const SamplerConfig& sampler,
                    WorkerBudget* budget = nullptr);
FitResult fit_stop(const StopData& data, const PriorConfig& priors, const SamplerConfig& sampler,
                   WorkerBudget* budget = nullptr);

}  // namespace threshold
