#pragma once

// Per-cell log masses of the four (class, side-of-threshold) events with
// their partial derivatives in (logit phi, lambda = log delta, logit t).
// Both threshold models are sums of these terms.

#include <algorithm>
#include <cmath>

#include "threshold/special.hpp"

namespace threshold::detail {

struct Partials {
  double logit_phi = 0.0;
  double log_delta = 0.0;
  double logit_threshold = 0.0;
};

struct CellTerms {
  double above0;  // log((1-phi) Pr(X0 > x))   searched, no hit
  double above1;  // log(phi Pr(X1 > x))       searched, hit
  double below0;  // log((1-phi) Pr(X0 < x))
  double below1;  // log(phi Pr(X1 < x))
  Partials d_above0, d_above1, d_below0, d_below1;
};

// x is the signal-space threshold (logit t - logit phi + delta^2/2) / delta;
// the positive class emits N(delta, 1), so its standardized threshold is x - delta.
inline CellTerms cell_terms(double logit_phi, double log_delta, double logit_threshold) {
  const double delta = std::exp(log_delta);
  const double gap = (logit_threshold - logit_phi) / delta;
  const double x = gap + 0.5 * delta;
  const double y = gap - 0.5 * delta;

  const NormalTails tx = normal_tails(x);
  const NormalTails ty = normal_tails(y);
  const double log_phi = log_inv_logit(logit_phi);
  const double log_1m_phi = log_phi - logit_phi;
  const double phi = inv_logit(logit_phi);

  // d x / d(logit phi) = -1/delta, d x / d(logit t) = 1/delta,
  // d x / d lambda = -gap + delta/2, d y / d lambda = -gap - delta/2.
  const double inv_delta = 1.0 / delta;
  const double dx_dlam = -gap + 0.5 * delta;
  const double dy_dlam = -gap - 0.5 * delta;

  CellTerms c;
  c.above0 = log_1m_phi + tx.log_upper;
  c.above1 = log_phi + ty.log_upper;
  c.below0 = log_1m_phi + tx.log_lower;
  c.below1 = log_phi + ty.log_lower;

  c.d_above0 = {-phi + tx.hazard_upper * inv_delta, -tx.hazard_upper * dx_dlam, -tx.hazard_upper * inv_delta};
  c.d_above1 = {(1.0 - phi) + ty.hazard_upper * inv_delta, -ty.hazard_upper * dy_dlam, -ty.hazard_upper * inv_delta};
  c.d_below0 = {-phi - tx.hazard_lower * inv_delta, tx.hazard_lower * dx_dlam, tx.hazard_lower * inv_delta};
  c.d_below1 = {(1.0 - phi) - ty.hazard_lower * inv_delta, ty.hazard_lower * dy_dlam, ty.hazard_lower * inv_delta};
  return c;
}

// log(exp(a) + exp(b)) with softmax weights for the chain rule.
struct WeightedLse {
  double value;
  double w_a;
  double w_b;
};

inline WeightedLse weighted_lse(double a, double b) {
  if (a == kNegInf && b == kNegInf) return {kNegInf, 0.5, 0.5};
  const double e = std::exp(-std::fabs(a - b));
  const double big = 1.0 / (1.0 + e);
  const double small = e * big;
  const double v = std::max(a, b) + std::log1p(e);
  return a >= b ? WeightedLse{v, big, small} : WeightedLse{v, small, big};
}

inline Partials combine(double wa, const Partials& a, double wb, const Partials& b) {
  return {wa * a.logit_phi + wb * b.logit_phi, wa * a.log_delta + wb * b.log_delta,
          wa * a.logit_threshold + wb * b.logit_threshold};
}

}  // namespace threshold::detail
