#include "threshold/stop_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cell_terms.hpp"
#include "threshold/log.hpp"
#include "threshold/special.hpp"

namespace threshold {

namespace {

constexpr double kCensusFloor = 1e-4;

}  // namespace

std::int64_t PrecinctStopData::total_stops() const { return std::accumulate(stops.begin(), stops.end(), std::int64_t{0}); }

void StopData::validate() const {
  if (races.empty() || locations.empty()) throw std::invalid_argument("stop data: no races or locations");
  for (const auto& p : precincts) {
    if (p.location >= locations.size()) throw std::invalid_argument("stop data: location index out of range");
    if (p.stops.size() != races.size() || p.hits.size() != races.size() || p.census.size() != races.size()) {
      throw std::invalid_argument("stop data: per-race vectors must have one entry per race");
    }
    double census_total = 0.0;
    for (std::size_t r = 0; r < races.size(); ++r) {
      if (p.stops[r] < 0 || p.hits[r] < 0 || p.hits[r] > p.stops[r]) {
        throw std::invalid_argument("stop data: counts must satisfy 0 <= hits <= stops");
      }
      if (!(p.census[r] >= 0.0) || !std::isfinite(p.census[r])) {
        throw std::invalid_argument("stop data: census shares must be non-negative");
      }
      census_total += p.census[r];
    }
    if (!(census_total > 0.0)) {
      throw std::invalid_argument("stop data: all-zero census vector for location " + locations[p.location]);
    }
  }
}

std::vector<double> StopData::stops_by_cell() const {
  std::vector<double> out(races.size() * locations.size(), 0.0);
  for (const auto& p : precincts) {
    for (std::size_t r = 0; r < races.size(); ++r) {
      out[r * locations.size() + p.location] += static_cast<double>(p.stops[r]);
    }
  }
  return out;
}

void normalize_census(StopData& data) {
  data.validate();
  for (auto& p : data.precincts) {
    for (std::size_t r = 0; r < data.races.size(); ++r) {
      if (p.census[r] == 0.0 && p.stops[r] > 0) {
        log_warning("census share of " + data.races[r] + " in " + data.locations[p.location] +
                    " is zero but stops were observed; flooring at 1e-4");
        p.census[r] = kCensusFloor;
      }
    }
    const double total = std::accumulate(p.census.begin(), p.census.end(), 0.0);
    for (auto& c : p.census) c /= total;
  }
}

StopData rescale_census(const StopData& data, std::size_t race, double factor) {
  if (race >= data.races.size()) throw std::invalid_argument("rescale_census: race index out of range");
  if (!(factor > 0.0)) throw std::invalid_argument("rescale_census: factor must be positive");
  StopData out = data;
  for (auto& p : out.precincts) {
    p.census[race] *= factor;
    const double total = std::accumulate(p.census.begin(), p.census.end(), 0.0);
    for (auto& c : p.census) c /= total;
  }
  return out;
}

StopModel::StopModel(StopData data, PriorConfig priors)
    : data_(std::move(data)), priors_(priors), layout_(data_.layout()) {
  normalize_census(data_);
  priors_.validate();
  for (const auto& p : data_.precincts) {
    const double n = static_cast<double>(p.total_stops());
    double c = std::lgamma(n + 1.0);
    for (std::size_t r = 0; r < data_.races.size(); ++r) {
      const double s = static_cast<double>(p.stops[r]);
      c -= std::lgamma(s + 1.0);
      c += log_choose(s, static_cast<double>(p.hits[r]));
      if (p.stops[r] > 0) c += s * std::log(p.census[r]);
    }
    log_constants_.push_back(c);
  }
}

std::vector<std::string> StopModel::parameter_names() const {
  return layout_.parameter_names(data_.races, data_.locations);
}

double StopModel::log_density(std::span<const double> q) const { return evaluate(q, {}); }

double StopModel::log_density_gradient(std::span<const double> q, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  return evaluate(q, grad);
}

// Per location, with L0/L1 the log masses of non-hit/hit stops and
// log Pr(stopped | r) = lse(L0, L1):
//   sum_r [S_r log c_r + (S_r - H_r) L0_r + H_r L1_r] - N log sum_r c_r Pr(stopped | r)
// (the S_r log Pr(stopped | r) terms of the multinomial and of the hit
// binomials cancel).
double StopModel::evaluate(std::span<const double> q, std::span<double> grad) const {
  if (q.size() != layout_.dimension()) throw std::invalid_argument("stop model: wrong parameter dimension");
  const bool g = !grad.empty();
  const std::size_t races = data_.races.size();
  double lp = log_prior(layout_, priors_, q, grad);

  std::vector<detail::CellTerms> terms(races);
  std::vector<double> log_weight(races);
  for (std::size_t i = 0; i < data_.precincts.size(); ++i) {
    const auto& p = data_.precincts[i];
    const double total = static_cast<double>(p.total_stops());
    if (total == 0) continue;
    lp += log_constants_[i];

    double log_norm = kNegInf;
    for (std::size_t r = 0; r < races; ++r) {
      const auto cp = cell_params(layout_, q, r, p.location);
      terms[r] = detail::cell_terms(cp.logit_phi, cp.log_delta, cp.logit_threshold);
      log_weight[r] = p.census[r] > 0.0 ? std::log(p.census[r]) + log_sum_exp(terms[r].above0, terms[r].above1)
                                        : kNegInf;
      log_norm = log_sum_exp(log_norm, log_weight[r]);
    }
    lp -= total * log_norm;
    for (std::size_t r = 0; r < races; ++r) {
      const double hits = static_cast<double>(p.hits[r]);
      const double misses = static_cast<double>(p.stops[r] - p.hits[r]);
      if (misses > 0) lp += misses * terms[r].above0;
      if (hits > 0) lp += hits * terms[r].above1;
      if (!g) continue;

      double c_above0 = misses;
      double c_above1 = hits;
      if (log_weight[r] != kNegInf) {
        // d/dL of -N log_norm through log Pr(stopped | r)
        const double theta = std::exp(log_weight[r] - log_norm);
        const auto stopped = detail::weighted_lse(terms[r].above0, terms[r].above1);
        c_above0 -= total * theta * stopped.w_a;
        c_above1 -= total * theta * stopped.w_b;
      }
      const auto d = detail::combine(c_above0, terms[r].d_above0, c_above1, terms[r].d_above1);
      grad[layout_.phi_race_index(r)] += d.logit_phi;
      grad[layout_.lambda_race_index(r)] += d.log_delta;
      if (p.location > 0) {
        grad[layout_.phi_location_index(p.location)] += d.logit_phi;
        grad[layout_.lambda_location_index(p.location)] += d.log_delta;
      }
      grad[layout_.threshold_index(r, p.location)] += d.logit_threshold;
    }
  }
  return lp;
}

double stop_probability(const ModelLayout& layout, std::span<const double> q, std::size_t r, std::size_t d) {
  return derived_rates(cell_params(layout, q, r, d)).search_rate;
}

std::vector<double> composition(const ModelLayout& layout, std::span<const double> q, std::size_t d,
                                std::span<const double> census) {
  if (census.size() != layout.races()) throw std::invalid_argument("composition: census size mismatch");
  std::vector<double> log_w(layout.races(), kNegInf);
  double log_norm = kNegInf;
  for (std::size_t r = 0; r < layout.races(); ++r) {
    if (census[r] < 0.0) throw std::invalid_argument("composition: negative census share");
    if (census[r] == 0.0) continue;
    const auto cp = cell_params(layout, q, r, d);
    const auto t = detail::cell_terms(cp.logit_phi, cp.log_delta, cp.logit_threshold);
    log_w[r] = std::log(census[r]) + log_sum_exp(t.above0, t.above1);
    log_norm = log_sum_exp(log_norm, log_w[r]);
  }
  if (log_norm == kNegInf) throw std::invalid_argument("composition: all-zero census vector");
  std::vector<double> theta(layout.races());
  for (std::size_t r = 0; r < layout.races(); ++r) theta[r] = std::exp(log_w[r] - log_norm);
  return theta;
}

double stop_log_posterior(const ModelParams& params, const StopData& data, const PriorConfig& priors) {
  const StopModel model(data, priors);
  return model.log_density(params.pack(model.layout()));
}

std::vector<double> stop_log_posterior_grad(const ModelParams& params, const StopData& data,
                                            const PriorConfig& priors) {
  const StopModel model(data, priors);
  std::vector<double> grad(model.dimension());
  model.log_density_gradient(params.pack(model.layout()), grad);
  return grad;
}

}  // namespace threshold
