#include "threshold/special.hpp"

#include <array>

namespace threshold {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;   // 1/sqrt(pi)
constexpr double kSqrt2OverPi = 0.79788456080286535588;  // sqrt(2/pi)
constexpr double kInvSqrt2Pi = 0.39894228040143267794;   // 1/sqrt(2 pi)

// Below this |x| the upper tail erfc(|x|/sqrt2)/2 stays a normal double.
constexpr double kDirectTailLimit = 37.0;

// Beyond this point exp(z*z) would overflow before erfc underflows.
constexpr double kContinuedFractionStart = 26.0;

// Continued fraction erfcx(z) = (1/sqrt(pi)) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
// evaluated bottom-up. At z >= 26 forty levels are far past double precision.
double erfcx_continued_fraction(double z) {
  double tail = z;
  for (int k = 40; k >= 1; --k) tail = z + 0.5 * k / tail;
  return kInvSqrtPi / tail;
}

}  // namespace

double erfcx(double z) {
  if (std::isnan(z)) return z;
  if (z < kContinuedFractionStart) return std::exp(z * z) * std::erfc(z);
  return erfcx_continued_fraction(z);
}

NormalTails normal_tails(double x) {
  const double ax = std::fabs(x);
  double log_small, small, hazard_small, density;
  if (ax < kDirectTailLimit) {
    density = std::exp(-0.5 * x * x) * kInvSqrt2Pi;
    small = 0.5 * std::erfc(ax / std::numbers::sqrt2);
    log_small = std::log(small);
    hazard_small = density / small;
  } else {
    // small tail = 0.5 * erfcx(|x|/sqrt2) * exp(-x^2/2), kept in log form
    const double scaled = erfcx(ax / std::numbers::sqrt2);
    log_small = std::log(0.5 * scaled) - 0.5 * x * x;
    small = std::exp(log_small);
    hazard_small = kSqrt2OverPi / scaled;
    density = std::exp(normal_log_pdf(x));
  }
  const double log_large = std::log1p(-small);
  const double hazard_large = density / (1.0 - small);
  if (x >= 0.0) return {log_small, log_large, hazard_small, hazard_large};
  return {log_large, log_small, hazard_large, hazard_small};
}

double normal_log_ccdf(double x) { return normal_tails(x).log_upper; }

}  // namespace threshold
