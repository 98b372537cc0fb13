#pragma once

// Scalar numerics shared by the distributions, the models and the sampler.
// Everything here is a pure function; nothing allocates.

#include <cmath>
#include <limits>
#include <numbers>

namespace threshold {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Scaled complementary error function exp(z^2) * erfc(z).
/// Accurate to a few ulps relative for z >= 0; falls back to the direct
/// product for negative z where no cancellation occurs.
double erfcx(double z);

/// Upper and lower standard-normal tail at one point, in log space, together
/// with the inverse Mills ratios needed for gradients. Computed from a single
/// erfcx evaluation on the smaller tail; the larger tail is log1p(-small).
struct NormalTails {
  double log_upper;     // log Pr(Z > x)
  double log_lower;     // log Pr(Z < x)
  double hazard_upper;  // pdf(x) / Pr(Z > x)
  double hazard_lower;  // pdf(x) / Pr(Z < x)
};
NormalTails normal_tails(double x);

inline double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }
inline double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}
inline double normal_pdf(double x) { return std::exp(normal_log_pdf(x)); }

/// log Pr(Z > x) for a standard normal.
double normal_log_ccdf(double x);
/// Pr(Z > x), relative accuracy maintained deep in the upper tail.
inline double normal_ccdf(double x) {
  if (x < 0.0) return 0.5 * std::erfc(x / std::numbers::sqrt2);
  return 0.5 * erfcx(x / std::numbers::sqrt2) * std::exp(-0.5 * x * x);
}
inline double normal_cdf(double x) { return normal_ccdf(-x); }

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }
inline double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
/// log(inv_logit(x))
inline double log_inv_logit(double x) { return -softplus(-x); }
/// log(1 - inv_logit(x))
inline double log1m_inv_logit(double x) { return -softplus(x); }

/// log of the binomial coefficient C(n, k).
inline double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace threshold
