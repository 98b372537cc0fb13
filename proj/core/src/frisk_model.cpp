#include "threshold/frisk_model.hpp"

#include <algorithm>
#include <stdexcept>

#include "cell_terms.hpp"
#include "threshold/special.hpp"

namespace threshold {

std::vector<std::string> LogDensity::parameter_names() const {
  std::vector<std::string> names(dimension());
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = "q[" + std::to_string(i) + "]";
  return names;
}

void FriskData::validate() const {
  if (races.empty() || locations.empty()) throw std::invalid_argument("frisk data: no races or locations");
  for (const auto& c : cells) {
    if (c.race >= races.size() || c.location >= locations.size()) {
      throw std::invalid_argument("frisk data: cell index out of range");
    }
    if (c.stops < 0 || c.searches < 0 || c.hits < 0 || c.searches > c.stops || c.hits > c.searches) {
      throw std::invalid_argument("frisk data: counts must satisfy 0 <= hits <= searches <= stops");
    }
  }
}

std::vector<double> FriskData::stops_by_cell() const {
  std::vector<double> out(races.size() * locations.size(), 0.0);
  for (const auto& c : cells) out[c.race * locations.size() + c.location] += static_cast<double>(c.stops);
  return out;
}

FriskModel::FriskModel(FriskData data, PriorConfig priors)
    : data_(std::move(data)), priors_(priors), layout_(data_.layout()) {
  data_.validate();
  priors_.validate();
  log_binomial_constants_.reserve(data_.cells.size());
  for (const auto& c : data_.cells) {
    log_binomial_constants_.push_back(log_choose(static_cast<double>(c.stops), static_cast<double>(c.searches)) +
                                      log_choose(static_cast<double>(c.searches), static_cast<double>(c.hits)));
  }
}

std::vector<std::string> FriskModel::parameter_names() const {
  return layout_.parameter_names(data_.races, data_.locations);
}

double FriskModel::log_density(std::span<const double> q) const { return evaluate(q, {}); }

double FriskModel::log_density_gradient(std::span<const double> q, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  return evaluate(q, grad);
}

// The two binomials factor into a three-way categorical over
// {not searched, searched without hit, searched with hit}:
//   (n - s) log Pr(P < t) + (s - k) log((1-phi) Q0) + k log(phi Q1).
double FriskModel::evaluate(std::span<const double> q, std::span<double> grad) const {
  if (q.size() != layout_.dimension()) throw std::invalid_argument("frisk model: wrong parameter dimension");
  const bool g = !grad.empty();
  double lp = log_prior(layout_, priors_, q, grad);
  for (std::size_t i = 0; i < data_.cells.size(); ++i) {
    const auto& c = data_.cells[i];
    if (c.stops == 0) continue;
    const auto cp = cell_params(layout_, q, c.race, c.location);
    const auto t = detail::cell_terms(cp.logit_phi, cp.log_delta, cp.logit_threshold);
    const double not_searched = static_cast<double>(c.stops - c.searches);
    const double misses = static_cast<double>(c.searches - c.hits);
    const double hits = static_cast<double>(c.hits);
    const auto below = detail::weighted_lse(t.below0, t.below1);
    lp += log_binomial_constants_[i];
    if (not_searched > 0) lp += not_searched * below.value;
    if (misses > 0) lp += misses * t.above0;
    if (hits > 0) lp += hits * t.above1;
    if (!g) continue;
    const auto d_below = detail::combine(below.w_a, t.d_below0, below.w_b, t.d_below1);
    const double d_a = not_searched * d_below.logit_phi + misses * t.d_above0.logit_phi + hits * t.d_above1.logit_phi;
    const double d_l = not_searched * d_below.log_delta + misses * t.d_above0.log_delta + hits * t.d_above1.log_delta;
    const double d_u = not_searched * d_below.logit_threshold + misses * t.d_above0.logit_threshold +
                       hits * t.d_above1.logit_threshold;
    grad[layout_.phi_race_index(c.race)] += d_a;
    grad[layout_.lambda_race_index(c.race)] += d_l;
    if (c.location > 0) {
      grad[layout_.phi_location_index(c.location)] += d_a;
      grad[layout_.lambda_location_index(c.location)] += d_l;
    }
    grad[layout_.threshold_index(c.race, c.location)] += d_u;
  }
  return lp;
}

double frisk_log_posterior(const ModelParams& params, const FriskData& data, const PriorConfig& priors) {
  const FriskModel model(data, priors);
  return model.log_density(params.pack(model.layout()));
}

std::vector<double> frisk_log_posterior_grad(const ModelParams& params, const FriskData& data,
                                             const PriorConfig& priors) {
  const FriskModel model(data, priors);
  std::vector<double> grad(model.dimension());
  model.log_density_gradient(params.pack(model.layout()), grad);
  return grad;
}

}  // namespace threshold
