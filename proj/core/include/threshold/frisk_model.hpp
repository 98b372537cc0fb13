#pragma once

// Threshold test for search (frisk) decisions. For each (race, location) cell
//   searches ~ Binomial(stops, s_rd),     s_rd = Pr(P_rd > t_rd)
//   hits     ~ Binomial(searches, h_rd),  h_rd = E[P_rd | P_rd > t_rd]
// with P_rd ~ disc(phi_rd, delta_rd).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "threshold/log_density.hpp"
#include "threshold/model.hpp"

namespace threshold {

struct CellCounts {
  std::size_t race = 0;
  std::size_t location = 0;
  std::int64_t stops = 0;
  std::int64_t searches = 0;
  std::int64_t hits = 0;

  friend bool operator==(const CellCounts&, const CellCounts&) = default;
};

/// Aggregated observations with the category labels they index into.
struct FriskData {
  std::vector<std::string> races;
  std::vector<std::string> locations;
  std::vector<CellCounts> cells;

  ModelLayout layout() const { return ModelLayout(races.size(), locations.size()); }
  /// Throws std::invalid_argument on out-of-range indices or inconsistent counts.
  void validate() const;
  /// Stops per (race, location), r * D + d.
  std::vector<double> stops_by_cell() const;

  friend bool operator==(const FriskData&, const FriskData&) = default;
};

class FriskModel final : public LogDensity {
 public:
  FriskModel(FriskData data, PriorConfig priors);

  std::size_t dimension() const override { return layout_.dimension(); }
  double log_density(std::span<const double> q) const override;
  double log_density_gradient(std::span<const double> q, std::span<double> grad) const override;
  std::vector<std::string> parameter_names() const override;

  const FriskData& data() const { return data_; }
  const ModelLayout& layout() const { return layout_; }
  const PriorConfig& priors() const { return priors_; }

 private:
  double evaluate(std::span<const double> q, std::span<double> grad) const;

  FriskData data_;
  PriorConfig priors_;
  ModelLayout layout_;
  std::vector<double> log_binomial_constants_;
};

double frisk_log_posterior(const ModelParams& params, const FriskData& data, const PriorConfig& priors);
std::vector<double> frisk_log_posterior_grad(const ModelParams& params, const FriskData& data,
                                             const PriorConfig& priors);

}  // namespace threshold
