#include "threshold/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "threshold/log.hpp"

namespace threshold {

namespace {

double mean_of(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

double sample_variance(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / (static_cast<double>(x.size()) - 1.0);
}

ChainSet split(const ChainSet& chains) {
  ChainSet out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // odd lengths drop the middle draw
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

void check_shape(const ChainSet& chains) {
  if (chains.size() < 2) throw std::invalid_argument("diagnostics: need at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 4) throw std::invalid_argument("diagnostics: need at least four draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("diagnostics: chains differ in length");
  }
}

double rhat_unsplit(const ChainSet& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(sample_variance(c));
  }
  const double w = mean_of(vars);
  const double b_over_n = sample_variance(means);
  if (w <= 0.0) return b_over_n > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return std::sqrt(((n - 1.0) / n * w + b_over_n) / w);
}

// Normal scores of pooled ranks (ties averaged), in the input's shape.
ChainSet rank_normalize(const ChainSet& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i) pooled.emplace_back(chains[c][i], c * chains[c].size() + i);
  }
  std::sort(pooled.begin(), pooled.end());
  const double s = static_cast<double>(pooled.size());
  std::vector<double> score(pooled.size());
  const boost::math::normal_distribution<double> normal;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    const double z = boost::math::quantile(normal, (rank - 0.375) / (s + 0.25));
    for (std::size_t k = i; k < j; ++k) score[pooled[k].second] = z;
    i = j;
  }
  ChainSet out(chains.size(), std::vector<double>(chains.front().size()));
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i) out[c][i] = score[c * chains[c].size() + i];
  }
  return out;
}

}  // namespace

double split_rhat(const ChainSet& chains) {
  check_shape(chains);
  return rhat_unsplit(split(chains));
}

double rank_normalized_rhat(const ChainSet& chains) {
  check_shape(chains);
  const double bulk = rhat_unsplit(split(rank_normalize(chains)));

  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  const double median = quantile(pooled, 0.5);
  ChainSet folded = chains;
  for (auto& c : folded) {
    for (auto& v : c) v = std::fabs(v - median);
  }
  const double tail = rhat_unsplit(split(rank_normalize(folded)));
  return std::max(bulk, tail);
}

double effective_sample_size(const ChainSet& input) {
  check_shape(input);
  const ChainSet chains = split(input);
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  const double nd = static_cast<double>(n);

  std::vector<double> chain_mean(m), chain_var(m);
  for (std::size_t c = 0; c < m; ++c) {
    chain_mean[c] = mean_of(chains[c]);
    chain_var[c] = sample_variance(chains[c]);
  }
  const double mean_var = mean_of(chain_var);
  const double var_plus = mean_var * (nd - 1.0) / nd + sample_variance(chain_mean);
  const double total = static_cast<double>(m * n);
  if (!(var_plus > 0.0)) return total;

  // Mean over chains of the biased autocovariance at lag t.
  auto mean_acov = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (chains[c][i] - chain_mean[c]) * (chains[c][i + t] - chain_mean[c]);
      acc += s / nd;
    }
    return acc / static_cast<double>(m);
  };
  auto rho = [&](std::size_t t) { return 1.0 - (mean_var - mean_acov(t)) / var_plus; };

  std::vector<double> rho_hat(n + 1, 0.0);
  rho_hat[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = rho(1);
  rho_hat[1] = rho_odd;
  std::size_t t = 1;
  while (t + 5 < n && rho_even + rho_odd > 0.0) {
    rho_even = rho(t + 1);
    rho_odd = rho(t + 2);
    if (rho_even + rho_odd >= 0.0) {
      rho_hat[t + 1] = rho_even;
      rho_hat[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0) rho_hat[max_t + 1] = rho_even;

  // Initial monotone sequence.
  for (t = 1; t + 2 <= max_t; t += 2) {
    const double prev = rho_hat[t - 1] + rho_hat[t];
    if (rho_hat[t + 1] + rho_hat[t + 2] > prev) {
      rho_hat[t + 1] = prev / 2.0;
      rho_hat[t + 2] = prev / 2.0;
    }
  }

  double tau = -1.0 + rho_hat[max_t + 1];
  for (std::size_t k = 0; k <= max_t; ++k) tau += 2.0 * rho_hat[k];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile: probability outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = prob * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double Diagnostics::identity_residual() const {
  if (seconds_per_neff == 0.0) return 0.0;
  const double product = samples_per_neff * steps_per_sample * seconds_per_step;
  return std::fabs(seconds_per_neff - product) / seconds_per_neff;
}

Diagnostics diagnose(const PosteriorDraws& draws) {
  draws.validate();
  if (draws.chains < 2) throw std::invalid_argument("diagnose: R-hat needs at least two chains");
  if (draws.iterations < 4) throw std::invalid_argument("diagnose: too few draws per chain");
  if (draws.iterations < 100) log_warning("diagnose: fewer than 100 draws per chain; diagnostics are unreliable");

  Diagnostics out;
  out.chains = draws.chains;
  out.total_draws = draws.total_draws();
  for (auto s : draws.leapfrog_steps) out.leapfrog_steps += s;
  for (const auto& c : draws.chain_stats) {
    out.sampling_seconds += c.sampling_seconds;
    out.warmup_seconds += c.warmup_seconds;
    out.max_chain_seconds = std::max(out.max_chain_seconds, c.sampling_seconds + c.warmup_seconds);
  }
  out.divergences = draws.divergences();
  out.divergence_rate = static_cast<double>(out.divergences) / static_cast<double>(out.total_draws);

  out.min_ess = std::numeric_limits<double>::infinity();
  double ess_sum = 0.0;
  for (std::size_t k = 0; k < draws.dimension; ++k) {
    const ChainSet chains = draws.parameter_chains(k);
    ParameterDiagnostics p;
    p.name = k < draws.names.size() ? draws.names[k] : "q[" + std::to_string(k) + "]";
    std::vector<double> pooled;
    for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
    p.mean = mean_of(pooled);
    p.sd = std::sqrt(sample_variance(pooled));
    p.rhat = rank_normalized_rhat(chains);
    p.ess = effective_sample_size(chains);
    out.min_ess = std::min(out.min_ess, p.ess);
    out.max_rhat = std::max(out.max_rhat, p.rhat);
    ess_sum += p.ess;
    out.parameters.push_back(std::move(p));
  }
  if (draws.dimension == 0) out.min_ess = 0.0;
  out.mean_ess = draws.dimension > 0 ? ess_sum / static_cast<double>(draws.dimension) : 0.0;

  if (out.min_ess > 0.0) {
    out.seconds_per_neff = out.sampling_seconds / out.min_ess;
    out.samples_per_neff = static_cast<double>(out.total_draws) / out.min_ess;
  }
  out.steps_per_sample = static_cast<double>(out.leapfrog_steps) / static_cast<double>(out.total_draws);
  if (out.leapfrog_steps > 0) out.seconds_per_step = out.sampling_seconds / static_cast<double>(out.leapfrog_steps);
  return out;
}

}  // namespace threshold
