#pragma once

// Approximating beta and logit-normal distributions by discriminant
// distributions under total-variation distance.
//
// All densities are handled as densities of logit(P) on the real line. The
// total-variation distance is invariant under that bijection and the
// transformed densities are bounded, which removes the 1/(t(1-t)) edge
// singularities of the probability-space densities.

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "threshold/distributions.hpp"

namespace threshold {

/// Log density of logit(P) tabulated on a uniform grid and linearly
/// interpolated; zero density outside the grid.
class TabulatedDensity {
 public:
  TabulatedDensity(double z_lo, double z_hi, std::vector<double> log_density);

  double log_pdf_logit(double z) const;
  double z_lo() const { return z_lo_; }
  double z_hi() const { return z_hi_; }

 private:
  double z_lo_;
  double z_hi_;
  double step_;
  std::vector<double> log_density_;
};

using Distribution = std::variant<DiscParams, BetaDist, LogitNormalDist, TabulatedDensity>;

Distribution to_distribution(const RefDist& d);

/// Tabulate any distribution's logit density on n points spanning its support.
TabulatedDensity tabulate(const Distribution& d, std::size_t n);

double log_pdf_logit(double z, const Distribution& d);

/// Interval of logit space outside which the distribution has mass below tail_mass.
struct LogitSupport {
  double lo;
  double hi;
};
LogitSupport logit_support(const Distribution& d, double tail_mass = 1e-13);

struct Moments {
  double mean;
  double variance;
};
Moments moments(const Distribution& d);

struct TvOptions {
  std::size_t grid_points = 512;  // resolution of the density-crossing scan
  double tolerance = 1e-10;       // adaptive quadrature tolerance per piece
};

/// Half the L1 distance between the two densities, in [0, 1].
double tv_distance(const Distribution& a, const Distribution& b, const TvOptions& options = {});

struct ApproxResult {
  Distribution target;
  DiscParams fitted;
  double tv_distance;
  std::size_t optimizer_evals;
  bool converged;
};

struct FitOptions {
  std::size_t max_evaluations_per_start = 2000;
  TvOptions tv;
};

/// Multi-start Nelder-Mead over (logit phi, log delta) from five fixed starts:
/// phi at the target mean with delta in {0.5, 1, 2, 4} and a variance-matched
/// delta. `converged` is false only when every start exhausted its budget.
ApproxResult fit_disc(const Distribution& target, const FitOptions& options = {});

/// Target grid for the logit-normal and beta approximation sweeps.
struct ApproxGrid {
  std::vector<double> logit_normal_mu{-4.0, -3.0, -2.0, -1.0, 0.0};
  std::vector<double> logit_normal_sigma{0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> beta_phi{0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> beta_lambda{1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0};

  std::vector<RefDist> targets() const;
};

/// Fit every target, spreading fits over up to `threads` workers (0 = hardware).
std::vector<ApproxResult> approx_sweep(const std::vector<RefDist>& targets, const FitOptions& options = {},
                                       std::size_t threads = 0);

std::string describe_kind(const Distribution& d);

}  // namespace threshold
