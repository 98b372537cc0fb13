#include "threshold/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cell_terms.hpp"
#include "threshold/special.hpp"

namespace threshold {

void PriorConfig::validate() const {
  for (double s : {phi_race_scale, lambda_race_scale, threshold_mean_scale, threshold_scale, location_phi_scale,
                   location_lambda_scale}) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("prior scales must be positive and finite");
  }
  if (!std::isfinite(threshold_mean_center)) throw std::invalid_argument("prior threshold center must be finite");
}

ModelLayout::ModelLayout(std::size_t races, std::size_t locations) : races_(races), locations_(locations) {
  if (races == 0 || locations == 0) throw std::invalid_argument("model needs at least one race and one location");
}

std::vector<std::string> ModelLayout::parameter_names(std::span<const std::string> race_labels,
                                                      std::span<const std::string> location_labels) const {
  auto race = [&](std::size_t r) { return r < race_labels.size() ? race_labels[r] : std::to_string(r); };
  auto loc = [&](std::size_t d) { return d < location_labels.size() ? location_labels[d] : std::to_string(d); };
  std::vector<std::string> names(dimension());
  for (std::size_t r = 0; r < races_; ++r) {
    names[phi_race_index(r)] = "phi_race[" + race(r) + "]";
    names[lambda_race_index(r)] = "lambda_race[" + race(r) + "]";
    names[threshold_mean_index(r)] = "threshold_mean[" + race(r) + "]";
    for (std::size_t d = 0; d < locations_; ++d) {
      names[threshold_index(r, d)] = "logit_threshold[" + race(r) + "," + loc(d) + "]";
    }
  }
  for (std::size_t d = 1; d < locations_; ++d) {
    names[phi_location_index(d)] = "phi_location[" + loc(d) + "]";
    names[lambda_location_index(d)] = "lambda_location[" + loc(d) + "]";
  }
  names[sigma_phi_index()] = "log_sigma_phi";
  names[sigma_lambda_index()] = "log_sigma_lambda";
  return names;
}

ModelParams ModelParams::zeros(const ModelLayout& layout) {
  ModelParams p;
  p.phi_race.assign(layout.races(), 0.0);
  p.lambda_race.assign(layout.races(), 0.0);
  p.phi_location.assign(layout.locations(), 0.0);
  p.lambda_location.assign(layout.locations(), 0.0);
  p.logit_threshold.assign(layout.cells(), 0.0);
  p.threshold_mean.assign(layout.races(), 0.0);
  return p;
}

ModelParams ModelParams::unpack(const ModelLayout& layout, std::span<const double> q) {
  if (q.size() != layout.dimension()) throw std::invalid_argument("parameter vector has the wrong dimension");
  auto p = zeros(layout);
  for (std::size_t r = 0; r < layout.races(); ++r) {
    p.phi_race[r] = q[layout.phi_race_index(r)];
    p.lambda_race[r] = q[layout.lambda_race_index(r)];
    p.threshold_mean[r] = q[layout.threshold_mean_index(r)];
    for (std::size_t d = 0; d < layout.locations(); ++d) {
      p.logit_threshold[r * layout.locations() + d] = q[layout.threshold_index(r, d)];
    }
  }
  for (std::size_t d = 1; d < layout.locations(); ++d) {
    p.phi_location[d] = q[layout.phi_location_index(d)];
    p.lambda_location[d] = q[layout.lambda_location_index(d)];
  }
  p.log_sigma_phi = q[layout.sigma_phi_index()];
  p.log_sigma_lambda = q[layout.sigma_lambda_index()];
  return p;
}

std::vector<double> ModelParams::pack(const ModelLayout& layout) const {
  if (phi_race.size() != layout.races() || lambda_race.size() != layout.races() ||
      threshold_mean.size() != layout.races() || phi_location.size() != layout.locations() ||
      lambda_location.size() != layout.locations() || logit_threshold.size() != layout.cells()) {
    throw std::invalid_argument("model parameters do not match the layout");
  }
  std::vector<double> q(layout.dimension());
  for (std::size_t r = 0; r < layout.races(); ++r) {
    q[layout.phi_race_index(r)] = phi_race[r];
    q[layout.lambda_race_index(r)] = lambda_race[r];
    q[layout.threshold_mean_index(r)] = threshold_mean[r];
    for (std::size_t d = 0; d < layout.locations(); ++d) {
      q[layout.threshold_index(r, d)] = logit_threshold[r * layout.locations() + d];
    }
  }
  for (std::size_t d = 1; d < layout.locations(); ++d) {
    q[layout.phi_location_index(d)] = phi_location[d];
    q[layout.lambda_location_index(d)] = lambda_location[d];
  }
  q[layout.sigma_phi_index()] = log_sigma_phi;
  q[layout.sigma_lambda_index()] = log_sigma_lambda;
  return q;
}

double CellParams::phi() const { return inv_logit(logit_phi); }
double CellParams::delta() const { return std::exp(log_delta); }
double CellParams::threshold() const { return inv_logit(logit_threshold); }

CellParams cell_params(const ModelLayout& layout, std::span<const double> q, std::size_t r, std::size_t d) {
  double a = q[layout.phi_race_index(r)];
  double l = q[layout.lambda_race_index(r)];
  if (d > 0) {
    a += q[layout.phi_location_index(d)];
    l += q[layout.lambda_location_index(d)];
  }
  return {a, l, q[layout.threshold_index(r, d)]};
}

DerivedRates derived_rates(const CellParams& c) {
  const auto t = detail::cell_terms(c.logit_phi, c.log_delta, c.logit_threshold);
  return {std::exp(log_sum_exp(t.above0, t.above1)), inv_logit(t.above1 - t.above0)};
}

namespace {

// Adds log N(x; mean, sd) and its gradient with respect to x (and the mean
// when mean_slot is given).
double normal_term(double x, double mean, double sd, double* x_slot, double* mean_slot) {
  const double z = (x - mean) / sd;
  if (x_slot) *x_slot -= z / sd;
  if (mean_slot) *mean_slot += z / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

// Location effects ~ N(0, sigma), sigma = exp(s) ~ half-N(0, scale), sampled
// on s with log-Jacobian s.
double location_block(const ModelLayout& layout, std::span<const double> q, std::span<double> grad,
                      std::size_t (ModelLayout::*index)(std::size_t) const, std::size_t sigma_index, double scale) {
  const bool g = !grad.empty();
  const double s = q[sigma_index];
  const double sigma = std::exp(s);
  double lp = std::numbers::ln2 - std::log(scale) - kLogSqrt2Pi - 0.5 * (sigma / scale) * (sigma / scale) + s;
  double d_s = 1.0 - (sigma / scale) * (sigma / scale);
  for (std::size_t d = 1; d < layout.locations(); ++d) {
    const std::size_t i = (layout.*index)(d);
    const double z = q[i] / sigma;
    lp += -0.5 * z * z - s - kLogSqrt2Pi;
    d_s += z * z - 1.0;
    if (g) grad[i] -= z / sigma;
  }
  if (g) grad[sigma_index] += d_s;
  return lp;
}

}  // namespace

double log_prior(const ModelLayout& layout, const PriorConfig& priors, std::span<const double> q,
                 std::span<double> grad) {
  const bool g = !grad.empty();
  auto slot = [&](std::size_t i) { return g ? &grad[i] : nullptr; };
  double lp = 0.0;
  for (std::size_t r = 0; r < layout.races(); ++r) {
    lp += normal_term(q[layout.phi_race_index(r)], 0.0, priors.phi_race_scale, slot(layout.phi_race_index(r)), nullptr);
    lp += normal_term(q[layout.lambda_race_index(r)], 0.0, priors.lambda_race_scale,
                      slot(layout.lambda_race_index(r)), nullptr);
    const std::size_t mu = layout.threshold_mean_index(r);
    lp += normal_term(q[mu], priors.threshold_mean_center, priors.threshold_mean_scale, slot(mu), nullptr);
    // Logit-normal prior on t_rd plus the log|dt/du| Jacobian of u = logit(t)
    // collapses to a normal density on u.
    for (std::size_t d = 0; d < layout.locations(); ++d) {
      const std::size_t i = layout.threshold_index(r, d);
      lp += normal_term(q[i], q[mu], priors.threshold_scale, slot(i), slot(mu));
    }
  }
  lp += location_block(layout, q, grad, &ModelLayout::phi_location_index, layout.sigma_phi_index(),
                       priors.location_phi_scale);
  lp += location_block(layout, q, grad, &ModelLayout::lambda_location_index, layout.sigma_lambda_index(),
                       priors.location_lambda_scale);
  return lp;
}

}  // namespace threshold
