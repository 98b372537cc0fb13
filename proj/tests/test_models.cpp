#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "threshold/distributions.hpp"
#include "threshold/frisk_model.hpp"
#include "threshold/log.hpp"
#include "threshold/special.hpp"
#include "threshold/stop_model.hpp"

using namespace threshold;
using fixture::random_frisk_data;
using fixture::random_point;
using fixture::random_stop_data;

namespace {

double log_normal(double x, double mean, double sd) { return std::log(oracle::normal_density(x, mean, sd)); }

double oracle_log_prior(const ModelLayout& L, const PriorConfig& p, std::span<const double> q) {
  double lp = 0.0;
  for (std::size_t r = 0; r < L.races(); ++r) {
    lp += log_normal(q[L.phi_race_index(r)], 0.0, p.phi_race_scale);
    lp += log_normal(q[L.lambda_race_index(r)], 0.0, p.lambda_race_scale);
    const double mu = q[L.threshold_mean_index(r)];
    lp += log_normal(mu, p.threshold_mean_center, p.threshold_mean_scale);
    for (std::size_t d = 0; d < L.locations(); ++d) lp += log_normal(q[L.threshold_index(r, d)], mu, p.threshold_scale);
  }
  const auto block = [&](std::size_t sigma_index, double scale, auto index) {
    const double s = q[sigma_index], sigma = std::exp(s);
    double v = std::log(2.0) + log_normal(sigma, 0.0, scale) + s;  // half-normal on sigma, Jacobian of sigma = e^s
    for (std::size_t d = 1; d < L.locations(); ++d) v += log_normal(q[(L.*index)(d)], 0.0, sigma);
    return v;
  };
  lp += block(L.sigma_phi_index(), p.location_phi_scale, &ModelLayout::phi_location_index);
  lp += block(L.sigma_lambda_index(), p.location_lambda_scale, &ModelLayout::lambda_location_index);
  return lp;
}

// logit threshold at which disc(phi, delta) has the given ccdf.
double logit_threshold_for_rate(double phi, double delta, double rate) {
  double lo = -30.0, hi = 30.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ccdf(inv_logit(mid), DiscParams(phi, delta)) > rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Layout, DimensionAndNames) {
  const ModelLayout L(3, 30);
  EXPECT_EQ(L.dimension(), 3 + 29 + 3 + 29 + 90 + 3 + 2);
  const std::vector<std::string> races{"a", "b", "c"};
  std::vector<std::string> locs;
  for (int d = 0; d < 30; ++d) locs.push_back("p" + std::to_string(d));
  const auto names = L.parameter_names(races, locs);
  EXPECT_EQ(names.size(), L.dimension());
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
}

TEST(Layout, PackUnpackRoundTrip) {
  const ModelLayout L(2, 4);
  std::mt19937_64 rng(1);
  const auto q = random_point(L.dimension(), rng);
  const auto params = ModelParams::unpack(L, q);
  EXPECT_EQ(params.phi_location[0], 0.0);
  EXPECT_EQ(params.lambda_location[0], 0.0);
  EXPECT_EQ(params.pack(L), q);
}

TEST(Prior, MatchesIndependentDensity) {
  const ModelLayout L(3, 5);
  PriorConfig priors;
  priors.threshold_scale = 1.3;
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    const auto q = random_point(L.dimension(), rng);
    EXPECT_NEAR(log_prior(L, priors, q, {}), oracle_log_prior(L, priors, q), 1e-10);
  }
}

TEST(Prior, RejectsNonPositiveScales) {
  PriorConfig p;
  p.threshold_scale = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(FriskModel, EmptyDataIsPriorOnly) {
  FriskData data{{"a", "b"}, {"x", "y", "z"}, {}};
  const FriskModel model(data, {});
  const auto q = ModelParams::zeros(model.layout()).pack(model.layout());
  EXPECT_NEAR(model.log_density(q), oracle_log_prior(model.layout(), {}, q), 1e-12);
  std::vector<double> grad(q.size()), prior_grad(q.size(), 0.0);
  model.log_density_gradient(q, grad);
  log_prior(model.layout(), {}, q, prior_grad);
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_DOUBLE_EQ(grad[i], prior_grad[i]);
}

TEST(FriskModel, SingleCellBinomialOracle) {
  // Pick delta = 1.5, then phi and t so that s = 0.3 and h = 0.5.
  const double delta = 1.5;
  double lo = -6.0, hi = 0.0, u = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double a = 0.5 * (lo + hi);
    u = logit_threshold_for_rate(inv_logit(a), delta, 0.3);
    (conditional_mean(inv_logit(u), DiscParams(inv_logit(a), delta)) < 0.5 ? lo : hi) = a;
  }
  const double a = 0.5 * (lo + hi);
  const double phi = inv_logit(a), t = inv_logit(u);
  ASSERT_NEAR(oracle::ccdf(t, phi, delta), 0.3, 1e-8);
  ASSERT_NEAR(oracle::conditional_mean(t, phi, delta), 0.5, 1e-8);

  FriskData data{{"a"}, {"x"}, {{0, 0, 100, 30, 15}}};
  const ModelLayout L = data.layout();
  auto params = ModelParams::zeros(L);
  params.phi_race[0] = a;
  params.lambda_race[0] = std::log(delta);
  params.logit_threshold[0] = u;
  const auto q = params.pack(L);
  const double want = oracle::log_binomial_pmf(30, 100, 0.3) + oracle::log_binomial_pmf(15, 30, 0.5) +
                      oracle_log_prior(L, {}, q);
  EXPECT_NEAR(frisk_log_posterior(params, data, {}), want, 1e-7);
}

TEST(FriskModel, ZeroStopCellIsNeutral) {
  std::mt19937_64 rng(3);
  auto data = random_frisk_data(2, 3, rng);
  const FriskModel base(data, {});
  const auto q = random_point(base.dimension(), rng);
  data.cells.push_back({1, 2, 0, 0, 0});
  const FriskModel more(data, {});
  EXPECT_DOUBLE_EQ(base.log_density(q), more.log_density(q));
}

TEST(FriskModel, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const FriskModel model(random_frisk_data(3, 4, rng), {});
    const auto q = random_point(model.dimension(), rng);
    EXPECT_LT(fixture::worst_gradient_error(model, q), 1e-5) << "point " << k;
  }
}

TEST(FriskModel, ThresholdPerturbationIsLocal) {
  std::mt19937_64 rng(5);
  const FriskModel model(random_frisk_data(2, 4, rng), {});
  const auto& L = model.layout();
  const auto q = random_point(model.dimension(), rng);
  auto q2 = q;
  q2[L.threshold_index(1, 2)] += 0.3;
  std::vector<double> g1(q.size()), g2(q.size());
  model.log_density_gradient(q, g1);
  model.log_density_gradient(q2, g2);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t d = 0; d < 4; ++d) {
      if (r == 1 && d == 2) continue;
      EXPECT_EQ(g1[L.threshold_index(r, d)], g2[L.threshold_index(r, d)]);
    }
  }
  EXPECT_NE(g1[L.threshold_index(1, 2)], g2[L.threshold_index(1, 2)]);
}

TEST(FriskModel, RatesMonotoneInThreshold) {
  double prev_s = 1.0, prev_h = 0.0;
  for (double u = -8.0; u <= 4.0; u += 0.1) {
    const auto rates = derived_rates({-1.0, 0.3, u});
    EXPECT_LT(rates.search_rate, prev_s);
    EXPECT_GT(rates.hit_rate, prev_h);
    EXPECT_GT(rates.hit_rate, inv_logit(u));
    prev_s = rates.search_rate;
    prev_h = rates.hit_rate;
  }
}

TEST(FriskModel, RaceRelabelingInvariance) {
  std::mt19937_64 rng(6);
  const auto data = random_frisk_data(3, 4, rng);
  const FriskModel model(data, {});
  const auto& L = model.layout();
  const auto q = random_point(model.dimension(), rng);
  const std::vector<std::size_t> perm{2, 0, 1};  // old race r becomes perm[r]

  FriskData permuted = data;
  permuted.races = {data.races[1], data.races[2], data.races[0]};
  for (auto& c : permuted.cells) c.race = perm[c.race];
  auto p = ModelParams::unpack(L, q), pp = p;
  for (std::size_t r = 0; r < 3; ++r) {
    pp.phi_race[perm[r]] = p.phi_race[r];
    pp.lambda_race[perm[r]] = p.lambda_race[r];
    pp.threshold_mean[perm[r]] = p.threshold_mean[r];
    for (std::size_t d = 0; d < 4; ++d) pp.logit_threshold[perm[r] * 4 + d] = p.logit_threshold[r * 4 + d];
  }
  EXPECT_NEAR(frisk_log_posterior(p, data, {}), frisk_log_posterior(pp, permuted, {}), 1e-9);
}

TEST(FriskModel, RejectsInconsistentCounts) {
  FriskData bad{{"a"}, {"x"}, {{0, 0, 10, 11, 0}}};
  EXPECT_THROW(FriskModel(bad, {}), std::invalid_argument);
  FriskData out_of_range{{"a"}, {"x"}, {{1, 0, 10, 1, 0}}};
  EXPECT_THROW(FriskModel(out_of_range, {}), std::invalid_argument);
}

TEST(FriskModel, FiniteForFiniteParameters) {
  std::mt19937_64 rng(7);
  const FriskModel model(random_frisk_data(2, 3, rng), {});
  for (int k = 0; k < 50; ++k) {
    const auto q = random_point(model.dimension(), rng, 12.0);
    EXPECT_TRUE(std::isfinite(model.log_density(q)));
  }
  auto q = random_point(model.dimension(), rng);
  q[0] = std::nan("");
  EXPECT_TRUE(std::isnan(model.log_density(q)));
}

TEST(StopModel, StopProbability) {
  const ModelLayout L(2, 1);
  auto params = ModelParams::zeros(L);
  params.phi_race = {-1.0, -1.0};
  params.lambda_race = {0.2, 0.2};
  params.logit_threshold = {-40.0, -40.0};
  auto q = params.pack(L);
  EXPECT_NEAR(stop_probability(L, q, 0, 0), 1.0, 1e-12);
  params.logit_threshold = {-2.0, -2.0};
  q = params.pack(L);
  EXPECT_DOUBLE_EQ(stop_probability(L, q, 0, 0), stop_probability(L, q, 1, 0));
  EXPECT_NEAR(stop_probability(L, q, 0, 0), ccdf(inv_logit(-2.0), DiscParams(inv_logit(-1.0), std::exp(0.2))), 1e-14);
}

TEST(StopModel, CompositionArithmetic) {
  const ModelLayout L(2, 1);
  auto params = ModelParams::zeros(L);
  params.phi_race = {-1.5, -1.5};
  params.lambda_race = {0.3, 0.3};
  const double phi = inv_logit(-1.5), delta = std::exp(0.3);
  params.logit_threshold = {logit_threshold_for_rate(phi, delta, 0.2), logit_threshold_for_rate(phi, delta, 0.1)};
  const auto q = params.pack(L);
  const std::vector<double> half{0.5, 0.5};
  const auto theta = composition(L, q, 0, half);
  EXPECT_NEAR(theta[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(theta[1], 1.0 / 3.0, 1e-12);

  params.logit_threshold = {-1.0, -1.0};
  const auto uniform = composition(L, params.pack(L), 0, half);
  EXPECT_NEAR(uniform[0], 0.5, 1e-15);
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_THROW(composition(L, q, 0, zero), std::invalid_argument);
}

TEST(StopModel, CompositionMatchesHandNormalisation) {
  const ModelLayout L(3, 2);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const auto q = random_point(L.dimension(), rng);
    const std::vector<double> c{0.2, 0.5, 0.3};
    const auto theta = composition(L, q, 1, c);
    double norm = 0.0;
    std::vector<double> w(3);
    for (std::size_t r = 0; r < 3; ++r) {
      const auto cp = cell_params(L, q, r, 1);
      w[r] = c[r] * oracle::ccdf(cp.threshold(), cp.phi(), cp.delta());
      norm += w[r];
    }
    for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(theta[r], w[r] / norm, 1e-8);
    EXPECT_NEAR(std::accumulate(theta.begin(), theta.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(StopModel, SymmetricTwoRaceSplitIsBinomial) {
  StopData data{{"a", "b"}, {"x"}, {{0, {60, 40}, {0, 0}, {0.5, 0.5}}}};
  const ModelLayout L = data.layout();
  auto params = ModelParams::zeros(L);
  params.phi_race = {-1.0, -1.0};
  params.lambda_race = {0.4, 0.4};
  params.logit_threshold = {-1.5, -1.5};
  const auto q = params.pack(L);
  const double h = oracle::conditional_mean(inv_logit(-1.5), inv_logit(-1.0), std::exp(0.4));
  const double want = oracle::log_binomial_pmf(60, 100, 0.5) + oracle::log_binomial_pmf(0, 60, h) +
                      oracle::log_binomial_pmf(0, 40, h) + oracle_log_prior(L, {}, q);
  EXPECT_NEAR(stop_log_posterior(params, data, {}), want, 1e-8);
}

TEST(StopModel, MultinomialOracleThreeRaces) {
  std::mt19937_64 rng(9);
  const auto data = random_stop_data(3, 2, rng);
  const StopModel model(data, {});
  const auto& L = model.layout();
  const auto q = random_point(L.dimension(), rng);
  double want = oracle_log_prior(L, {}, q);
  for (const auto& p : model.data().precincts) {
    const auto theta = composition(L, q, p.location, p.census);
    want += oracle::log_multinomial_pmf(p.stops, theta);
    for (std::size_t r = 0; r < 3; ++r) {
      const auto cp = cell_params(L, q, r, p.location);
      want += oracle::log_binomial_pmf(p.hits[r], p.stops[r], oracle::conditional_mean(cp.threshold(), cp.phi(), cp.delta()));
    }
  }
  EXPECT_NEAR(model.log_density(q), want, 1e-6 * std::abs(want));
}

TEST(StopModel, SingleRaceIsHitsOnly) {
  StopData data{{"a"}, {"x", "y"}, {{0, {50}, {10}, {1.0}}, {1, {80}, {5}, {1.0}}}};
  const StopModel model(data, {});
  const auto& L = model.layout();
  std::mt19937_64 rng(10);
  const auto q = random_point(L.dimension(), rng);
  double want = oracle_log_prior(L, {}, q);
  for (const auto& p : data.precincts) {
    const auto cp = cell_params(L, q, 0, p.location);
    want += oracle::log_binomial_pmf(p.hits[0], p.stops[0], oracle::conditional_mean(cp.threshold(), cp.phi(), cp.delta()));
  }
  EXPECT_NEAR(model.log_density(q), want, 1e-8);
}

TEST(StopModel, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    const StopModel model(random_stop_data(3, 4, rng), {});
    const auto q = random_point(model.dimension(), rng);
    EXPECT_LT(fixture::worst_gradient_error(model, q), 1e-5) << "point " << k;
  }
}

TEST(StopModel, SignalShiftChangesLikelihood) {
  std::mt19937_64 rng(12);
  const StopModel model(random_stop_data(2, 3, rng), {});
  const auto& L = model.layout();
  const auto q = random_point(L.dimension(), rng);
  auto shifted = q;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t d = 0; d < 3; ++d) {
      const auto cp = cell_params(L, q, r, d);
      const DiscParams p(cp.phi(), cp.delta());
      shifted[L.threshold_index(r, d)] = logit(g(g_inv(cp.threshold(), p) + 0.5, p));
    }
  }
  EXPECT_GT(std::abs(model.log_density(q) - model.log_density(shifted)), 1e-3);
}

TEST(StopModel, ZeroCensusShareIsFlooredWithWarning) {
  std::vector<std::string> messages;
  const auto previous = set_log_sink([&](const std::string& m) { messages.push_back(m); });
  StopData data{{"a", "b"}, {"x"}, {{0, {5, 3}, {1, 0}, {1.0, 0.0}}}};
  normalize_census(data);
  set_log_sink(previous);
  ASSERT_EQ(messages.size(), 1u);
  EXPECT_NEAR(data.precincts[0].census[1], 1e-4 / (1.0 + 1e-4), 1e-15);
  EXPECT_NEAR(data.precincts[0].census[0] + data.precincts[0].census[1], 1.0, 1e-15);

  StopData none{{"a", "b"}, {"x"}, {{0, {0, 0}, {0, 0}, {0.0, 0.0}}}};
  EXPECT_THROW(normalize_census(none), std::invalid_argument);
}

TEST(StopModel, RescaleCensus) {
  StopData data{{"a", "b"}, {"x"}, {{0, {5, 3}, {1, 0}, {0.4, 0.6}}}};
  const auto same = rescale_census(data, 0, 1.0);
  EXPECT_NEAR(same.precincts[0].census[0], 0.4, 1e-15);
  const auto doubled = rescale_census(data, 0, 2.0);
  EXPECT_NEAR(doubled.precincts[0].census[0], 0.8 / 1.4, 1e-15);
  EXPECT_THROW(rescale_census(data, 2, 1.0), std::invalid_argument);
  EXPECT_THROW(rescale_census(data, 0, 0.0), std::invalid_argument);
}
