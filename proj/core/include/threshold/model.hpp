#pragma once

// Parameterisation shared by the frisk and stop threshold models.
//
// Risk in cell (r, d) follows disc(phi_rd, delta_rd) with
//   phi_rd   = logistic(phi_r + phi_d)
//   delta_rd = exp(lambda_r + lambda_d)
// and decisions are taken above a cell threshold t_rd, sampled as logit(t_rd).
// The first location is the reference: phi_d = lambda_d = 0 there.
//
// Flat unconstrained vector layout:
//   phi_r[R] | phi_d[D-1] | lambda_r[R] | lambda_d[D-1] | logit_t[R*D] |
//   mu_t[R] | log sigma_phi | log sigma_lambda

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace threshold {

struct PriorConfig {
  double phi_race_scale = 2.0;
  double lambda_race_scale = 2.0;
  double threshold_mean_center = -3.0;  // prior mean of each race's mu_t
  double threshold_mean_scale = 2.0;
  double threshold_scale = 1.0;         // logit(t_rd) ~ N(mu_t,r, threshold_scale)
  double location_phi_scale = 0.25;     // half-normal scale of sigma_phi
  double location_lambda_scale = 0.25;  // half-normal scale of sigma_lambda

  /// Throws std::invalid_argument unless every scale is positive.
  void validate() const;
};

class ModelLayout {
 public:
  ModelLayout(std::size_t races, std::size_t locations);

  std::size_t races() const { return races_; }
  std::size_t locations() const { return locations_; }
  std::size_t cells() const { return races_ * locations_; }
  std::size_t dimension() const { return sigma_lambda_index() + 1; }

  std::size_t phi_race_index(std::size_t r) const { return r; }
  /// Only valid for d >= 1.
  std::size_t phi_location_index(std::size_t d) const { return races_ + d - 1; }
  std::size_t lambda_race_index(std::size_t r) const { return races_ + locations_ - 1 + r; }
  std::size_t lambda_location_index(std::size_t d) const { return 2 * races_ + locations_ - 1 + d - 1; }
  std::size_t threshold_index(std::size_t r, std::size_t d) const {
    return 2 * (races_ + locations_ - 1) + r * locations_ + d;
  }
  std::size_t threshold_mean_index(std::size_t r) const { return 2 * (races_ + locations_ - 1) + cells() + r; }
  std::size_t sigma_phi_index() const { return 2 * (races_ + locations_ - 1) + cells() + races_; }
  std::size_t sigma_lambda_index() const { return sigma_phi_index() + 1; }

  std::vector<std::string> parameter_names(std::span<const std::string> race_labels,
                                           std::span<const std::string> location_labels) const;

  friend bool operator==(const ModelLayout&, const ModelLayout&) = default;

 private:
  std::size_t races_;
  std::size_t locations_;
};

/// Structured view of the unconstrained parameter vector.
struct ModelParams {
  std::vector<double> phi_race;
  std::vector<double> phi_location;  // size D, entry 0 pinned at 0
  std::vector<double> lambda_race;
  std::vector<double> lambda_location;  // size D, entry 0 pinned at 0
  std::vector<double> logit_threshold;  // r * D + d
  std::vector<double> threshold_mean;
  double log_sigma_phi = 0.0;
  double log_sigma_lambda = 0.0;

  static ModelParams zeros(const ModelLayout& layout);
  static ModelParams unpack(const ModelLayout& layout, std::span<const double> q);
  std::vector<double> pack(const ModelLayout& layout) const;
};

/// Risk-distribution and threshold parameters of one cell.
struct CellParams {
  double logit_phi;
  double log_delta;
  double logit_threshold;

  double phi() const;
  double delta() const;
  double threshold() const;
};

CellParams cell_params(const ModelLayout& layout, std::span<const double> q, std::size_t r, std::size_t d);

/// Search (or stop) rate Pr(P > t) and hit rate E[P | P > t] of a cell.
struct DerivedRates {
  double search_rate;
  double hit_rate;
};
DerivedRates derived_rates(const CellParams& c);

/// Log prior density (with change-of-variables terms) accumulated into grad
/// when grad is non-empty.
double log_prior(const ModelLayout& layout, const PriorConfig& priors, std::span<const double> q,
                 std::span<double> grad);

}  // namespace threshold
