#pragma once

// Discriminant distributions: the law of the Bayes posterior g(X) = Pr(Y=1 | X)
// when the two classes emit normally distributed signals.
//
// The homoskedastic family is fully described by (phi, delta) and is
// represented with mu0 = 0, sigma = 1, so the positive class emits N(delta, 1)
// and g(x) = logistic(delta * x - delta^2 / 2 + logit(phi)). Every quantity
// below is evaluated in signal space and combined in log space.

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

namespace threshold {

/// Homoskedastic discriminant distribution disc(phi, delta).
class DiscParams {
 public:
  /// Throws std::invalid_argument unless 0 < phi < 1 and delta > 0.
  DiscParams(double phi, double delta);

  double phi() const { return phi_; }
  double delta() const { return delta_; }
  double logit_phi() const { return logit_phi_; }

  friend bool operator==(const DiscParams&, const DiscParams&) = default;

 private:
  double phi_;
  double delta_;
  double logit_phi_;
};

/// Five-parameter form disc(phi, mu0, sigma0, mu1, sigma1) with mu1 > mu0.
struct GeneralDiscParams {
  double phi;
  double mu0;
  double sigma0;
  double mu1;
  double sigma1;

  /// Throws std::invalid_argument on an invalid parameter set.
  void validate() const;
  bool homoskedastic() const { return sigma0 == sigma1; }
};

/// Beta in mean / total-count form: shape1 = phi * lambda, shape2 = (1 - phi) * lambda.
struct BetaDist {
  double phi;
  double lambda;
};

/// logit(P) ~ N(mu, sigma).
struct LogitNormalDist {
  double mu;
  double sigma;
};

using RefDist = std::variant<BetaDist, LogitNormalDist>;

// ---- transformation between signal space and probability space ----

double g(double x, const DiscParams& p);
/// Signal-space location of probability t. Throws std::domain_error for t outside (0,1).
double g_inv(double t, const DiscParams& p);
/// Pr(Y = 1 | X = x) for the general five-parameter form.
double posterior_probability(double x, const GeneralDiscParams& p);
/// Reduce a homoskedastic representation to (phi, delta). Throws
/// std::invalid_argument when sigma0 != sigma1.
DiscParams canonicalize(const GeneralDiscParams& p);

// ---- distribution functions of P = g(X) ----
// All of these require 0 < t < 1 and throw std::domain_error otherwise.

/// Pr(P > t)
double ccdf(double t, const DiscParams& p);
double log_ccdf(double t, const DiscParams& p);
/// E[P | P > t]
double conditional_mean(double t, const DiscParams& p);
double pdf(double t, const DiscParams& p);

/// Log density of logit(P), which is the normal mixture
/// (1-phi) N(logit phi - delta^2/2, delta) + phi N(logit phi + delta^2/2, delta).
double log_pdf_logit(double z, const DiscParams& p);

/// Draw n values of g(X) following the generative definition.
std::vector<double> sample(const DiscParams& p, std::size_t n, std::uint64_t seed);

struct LabeledDraw {
  bool positive;
  double signal;
  double probability;
};
LabeledDraw draw_labeled(const DiscParams& p, std::mt19937_64& rng);

// ---- reference families ----

/// Throws std::invalid_argument on invalid parameters.
void validate(const RefDist& d);
double ref_pdf(double t, const RefDist& d);
double ref_cdf(double t, const RefDist& d);
double ref_log_pdf_logit(double z, const RefDist& d);
double ref_mean(const RefDist& d);

}  // namespace threshold
