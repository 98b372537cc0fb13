#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "threshold/approximation.hpp"
#include "threshold/config.hpp"
#include "threshold/optimize.hpp"
#include "threshold/special.hpp"

using namespace threshold;

TEST(NelderMead, Rosenbrock) {
  const auto f = [](std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const auto r = nelder_mead(f, {-1.2, 1.0}, {.max_evaluations = 5000, .f_tolerance = 1e-14, .x_tolerance = 1e-10});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, ReportsExhaustedBudget) {
  const auto f = [](std::span<const double> x) { return std::pow(x[0] - 3.0, 2) + std::pow(x[1] + 1.0, 2); };
  const auto r = nelder_mead(f, {0.0, 0.0}, {.max_evaluations = 10});
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.evaluations, 12u);
}

TEST(TvDistance, ZeroOnIdentical) {
  for (const Distribution& d : {Distribution{DiscParams(0.3, 1.5)}, Distribution{BetaDist{0.2, 5.0}},
                               Distribution{LogitNormalDist{-2.0, 1.0}}}) {
    EXPECT_NEAR(tv_distance(d, d), 0.0, 1e-10);
  }
}

TEST(TvDistance, UniformVersusExtremeLogitNormal) {
  const Distribution u = BetaDist{0.5, 2.0};
  const Distribution ln = LogitNormalDist{0.0, 10.0};
  // Independent: half the L1 distance of the two logit-space densities.
  const auto diff = [](double z) {
    const double logistic = std::exp(-std::abs(z)) / std::pow(1.0 + std::exp(-std::abs(z)), 2);
    return std::abs(logistic - oracle::normal_density(z, 0.0, 10.0));
  };
  double l1 = 0.0;
  const double cuts[] = {-200.0, -40.0, -10.0, -2.0, 0.0, 2.0, 10.0, 40.0, 200.0};
  for (std::size_t i = 0; i + 1 < std::size(cuts); ++i) l1 += oracle::integrate(diff, cuts[i], cuts[i + 1], 1e-12);
  const double tv = tv_distance(u, ln);
  EXPECT_GT(tv, 0.5);
  EXPECT_NEAR(tv, 0.5 * l1, 1e-6);
}

TEST(TvDistance, MetricAxioms) {
  const Distribution a = DiscParams(0.2, 1.0);
  const Distribution b = BetaDist{0.3, 4.0};
  const Distribution c = LogitNormalDist{-1.0, 2.0};
  const double ab = tv_distance(a, b), ba = tv_distance(b, a);
  EXPECT_NEAR(ab, ba, 1e-10);
  EXPECT_LE(tv_distance(a, c), ab + tv_distance(b, c) + 1e-10);
  EXPECT_GE(ab, 0.0);
  EXPECT_LE(ab, 1.0);
}

TEST(TvDistance, StableUnderRefinement) {
  const Distribution a = BetaDist{0.1, 3.0};
  const Distribution b = DiscParams(0.15, 2.0);
  const double coarse = tv_distance(a, b, {.grid_points = 512});
  const double fine = tv_distance(a, b, {.grid_points = 1024});
  EXPECT_NEAR(coarse, fine, 1e-4);
}

TEST(Moments, MatchDefinitions) {
  EXPECT_NEAR(moments(DiscParams(0.3, 1.5)).mean, 0.3, 1e-8);
  EXPECT_NEAR(moments(BetaDist{0.2, 4.0}).mean, 0.2, 1e-8);
  // Var of beta in mean / count form: phi (1 - phi) / (lambda + 1)
  EXPECT_NEAR(moments(BetaDist{0.2, 4.0}).variance, 0.2 * 0.8 / 5.0, 1e-8);
}

TEST(FitDisc, RecoversTabulatedSelf) {
  const DiscParams truth(0.3, 1.5);
  const auto target = tabulate(truth, 4001);
  const auto r = fit_disc(target);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.tv_distance, 1e-3);
  EXPECT_NEAR(r.fitted.phi(), 0.3, 2e-3);
  EXPECT_NEAR(r.fitted.delta(), 1.5, 1e-2);
}

TEST(FitDisc, LogitNormalWithinClaimAndCalibrated) {
  for (const auto& [mu, sigma] : {std::pair{-4.0, 3.0}, std::pair{-2.0, 1.0}, std::pair{0.0, 0.25}}) {
    const Distribution target = LogitNormalDist{mu, sigma};
    const auto r = fit_disc(target);
    EXPECT_LT(r.tv_distance, 0.1) << mu << ' ' << sigma;
    EXPECT_LT(std::abs(r.fitted.phi() - moments(target).mean), 0.05);
  }
}

TEST(FitDisc, Deterministic) {
  const Distribution target = BetaDist{0.3, 5.0};
  const auto a = fit_disc(target), b = fit_disc(target);
  EXPECT_EQ(a.fitted, b.fitted);
  EXPECT_EQ(a.tv_distance, b.tv_distance);
  EXPECT_EQ(a.optimizer_evals, b.optimizer_evals);
}

TEST(FitDisc, NotConvergedOnTinyBudget) {
  const auto r = fit_disc(BetaDist{0.3, 5.0}, {.max_evaluations_per_start = 5, .tv = {}});
  EXPECT_FALSE(r.converged);
  EXPECT_GE(r.tv_distance, 0.0);
}

TEST(ApproxGrid, ParsesConfigFormat) {
  std::istringstream in("# grid\nlogit_normal.mu = -1, 0\nbeta.lambda = 1,10\n");
  const auto grid = parse_approx_grid(in);
  EXPECT_EQ(grid.logit_normal_mu, (std::vector<double>{-1.0, 0.0}));
  EXPECT_EQ(grid.beta_lambda, (std::vector<double>{1.0, 10.0}));
  EXPECT_EQ(grid.beta_phi, ApproxGrid{}.beta_phi);
  EXPECT_EQ(grid.targets().size(), 2 * grid.logit_normal_sigma.size() + grid.beta_phi.size() * 2);
  std::istringstream bad("beta.phi = 0.1, x\n");
  EXPECT_THROW(parse_approx_grid(bad), DataError);
  std::istringstream unknown("gamma.k = 1\n");
  EXPECT_THROW(parse_approx_grid(unknown), DataError);
}

TEST(ApproxGrid, BundledFileLoads) {
  const auto grid = load_approx_grid(std::string(THRESHOLD_SOURCE_DIR) + "/config/approx_grids.conf");
  EXPECT_EQ(grid.logit_normal_mu.front(), -4.0);
  EXPECT_EQ(grid.logit_normal_sigma.back(), 3.0);
  EXPECT_EQ(grid.beta_lambda.front(), 1.0);
}
