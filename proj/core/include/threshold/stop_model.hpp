#pragma once

// Threshold test for stop decisions, where people who were not stopped are
// never observed. In location d the race composition of stops is
//   S_d ~ Multinomial(theta_d, N_d),  theta_rd ∝ c_rd Pr(stopped | r)
// with c_rd the population share and Pr(stopped | r) = Pr(P_rd > t_rd).
// Every stop is treated as a search, so H_rd ~ Binomial(S_rd, h_rd).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "threshold/log_density.hpp"
#include "threshold/model.hpp"

namespace threshold {

struct PrecinctStopData {
  std::size_t location = 0;
  std::vector<std::int64_t> stops;  // per race
  std::vector<std::int64_t> hits;   // per race
  std::vector<double> census;       // per race population share

  std::int64_t total_stops() const;
};

struct StopData {
  std::vector<std::string> races;
  std::vector<std::string> locations;
  std::vector<PrecinctStopData> precincts;

  ModelLayout layout() const { return ModelLayout(races.size(), locations.size()); }
  /// Throws std::invalid_argument on malformed rows or an all-zero census vector.
  void validate() const;
  std::vector<double> stops_by_cell() const;
};

/// Normalise each precinct's census shares to sum to one. A race with zero
/// share but observed stops has its share floored at 1e-4 and a warning is
/// logged. Throws std::invalid_argument for an all-zero census vector.
void normalize_census(StopData& data);

/// Scale the census share of one race by `factor` in every precinct and renormalise.
StopData rescale_census(const StopData& data, std::size_t race, double factor);

class StopModel final : public LogDensity {
 public:
  /// Validates and normalises the census shares of `data`.
  StopModel(StopData data, PriorConfig priors);

  std::size_t dimension() const override { return layout_.dimension(); }
  double log_density(std::span<const double> q) const override;
  double log_density_gradient(std::span<const double> q, std::span<double> grad) const override;
  std::vector<std::string> parameter_names() const override;

  const StopData& data() const { return data_; }
  const ModelLayout& layout() const { return layout_; }

 private:
  double evaluate(std::span<const double> q, std::span<double> grad) const;

  StopData data_;
  PriorConfig priors_;
  ModelLayout layout_;
  std::vector<double> log_constants_;
};

/// Pr(stopped | R_d = r): the cell's ccdf at its threshold.
double stop_probability(const ModelLayout& layout, std::span<const double> q, std::size_t r, std::size_t d);

/// theta_d ∝ c_d * Pr(stopped | r). Throws std::invalid_argument for an all-zero census.
std::vector<double> composition(const ModelLayout& layout, std::span<const double> q, std::size_t d,
                                std::span<const double> census);

double stop_log_posterior(const ModelParams& params, const StopData& data, const PriorConfig& priors);
std::vector<double> stop_log_posterior_grad(const ModelParams& params, const StopData& data,
                                            const PriorConfig& priors);

}  // namespace threshold
