#include "threshold/distributions.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "threshold/special.hpp"

namespace threshold {

namespace {

void require_open_unit(double t, const char* what) {
  if (!(t > 0.0 && t < 1.0)) {
    throw std::domain_error(std::string(what) + ": argument must lie in (0, 1), got " + std::to_string(t));
  }
}

// log of the class-conditional masses above the signal threshold x:
// above0 = log((1-phi) Pr(N(0,1) > x)), above1 = log(phi Pr(N(delta,1) > x)).
struct UpperMasses {
  double above0;
  double above1;
};

UpperMasses upper_masses(double t, const DiscParams& p) {
  const double x = g_inv(t, p);
  const double a = p.logit_phi();
  return {log1m_inv_logit(a) + normal_log_ccdf(x), log_inv_logit(a) + normal_log_ccdf(x - p.delta())};
}

}  // namespace

DiscParams::DiscParams(double phi, double delta) : phi_(phi), delta_(delta), logit_phi_(0.0) {
  if (!(phi > 0.0 && phi < 1.0)) throw std::invalid_argument("disc: phi must lie in (0, 1)");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("disc: delta must be positive");
  logit_phi_ = logit(phi);
}

void GeneralDiscParams::validate() const {
  if (!(phi > 0.0 && phi < 1.0)) throw std::invalid_argument("disc: phi must lie in (0, 1)");
  if (!(sigma0 > 0.0) || !(sigma1 > 0.0)) throw std::invalid_argument("disc: sigmas must be positive");
  if (!(mu1 > mu0)) throw std::invalid_argument("disc: requires mu1 > mu0");
}

double g(double x, const DiscParams& p) {
  const double d = p.delta();
  return inv_logit(d * x - 0.5 * d * d + p.logit_phi());
}

double g_inv(double t, const DiscParams& p) {
  require_open_unit(t, "g_inv");
  const double d = p.delta();
  return (logit(t) - p.logit_phi() + 0.5 * d * d) / d;
}

double posterior_probability(double x, const GeneralDiscParams& p) {
  p.validate();
  const double l0 = std::log1p(-p.phi) + normal_log_pdf(x, p.mu0, p.sigma0);
  const double l1 = std::log(p.phi) + normal_log_pdf(x, p.mu1, p.sigma1);
  return inv_logit(l1 - l0);
}

DiscParams canonicalize(const GeneralDiscParams& p) {
  p.validate();
  if (!p.homoskedastic()) {
    throw std::invalid_argument("canonicalize: requires sigma0 == sigma1");
  }
  return DiscParams(p.phi, (p.mu1 - p.mu0) / p.sigma0);
}

double log_ccdf(double t, const DiscParams& p) {
  require_open_unit(t, "ccdf");
  const auto m = upper_masses(t, p);
  return log_sum_exp(m.above0, m.above1);
}

double ccdf(double t, const DiscParams& p) { return std::exp(log_ccdf(t, p)); }

double conditional_mean(double t, const DiscParams& p) {
  require_open_unit(t, "conditional_mean");
  const auto m = upper_masses(t, p);
  // phi Q1 / ((1-phi) Q0 + phi Q1) == logistic(above1 - above0); stays finite
  // when both masses underflow.
  return inv_logit(m.above1 - m.above0);
}

double pdf(double t, const DiscParams& p) {
  require_open_unit(t, "pdf");
  const double x = g_inv(t, p);
  const double a = p.logit_phi();
  const double mix =
      log_sum_exp(log1m_inv_logit(a) + normal_log_pdf(x), log_inv_logit(a) + normal_log_pdf(x - p.delta()));
  return std::exp(mix - std::log(p.delta()) - std::log(t) - std::log1p(-t));
}

double log_pdf_logit(double z, const DiscParams& p) {
  const double d = p.delta();
  const double a = p.logit_phi();
  return log_sum_exp(log1m_inv_logit(a) + normal_log_pdf(z, a - 0.5 * d * d, d),
                     log_inv_logit(a) + normal_log_pdf(z, a + 0.5 * d * d, d));
}

LabeledDraw draw_labeled(const DiscParams& p, std::mt19937_64& rng) {
  std::bernoulli_distribution cls(p.phi());
  std::normal_distribution<double> noise(0.0, 1.0);
  const bool positive = cls(rng);
  const double x = noise(rng) + (positive ? p.delta() : 0.0);
  return {positive, x, g(x, p)};
}

std::vector<double> sample(const DiscParams& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_labeled(p, rng).probability);
  return out;
}

// ---- reference families ----

namespace {

struct BetaShapes {
  double a;
  double b;
};

BetaShapes shapes(const BetaDist& d) { return {d.phi * d.lambda, (1.0 - d.phi) * d.lambda}; }

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

void validate(const RefDist& d) {
  std::visit(overloaded{[](const BetaDist& b) {
                          if (!(b.phi > 0.0 && b.phi < 1.0) || !(b.lambda > 0.0)) {
                            throw std::invalid_argument("beta: requires 0 < phi < 1 and lambda > 0");
                          }
                        },
                        [](const LogitNormalDist& l) {
                          if (!(l.sigma > 0.0) || !std::isfinite(l.mu)) {
                            throw std::invalid_argument("logit-normal: requires sigma > 0");
                          }
                        }},
             d);
}

double ref_pdf(double t, const RefDist& d) {
  validate(d);
  require_open_unit(t, "ref_pdf");
  return std::exp(ref_log_pdf_logit(logit(t), d) - std::log(t) - std::log1p(-t));
}

double ref_cdf(double t, const RefDist& d) {
  validate(d);
  require_open_unit(t, "ref_cdf");
  return std::visit(overloaded{[t](const BetaDist& b) {
                                 const auto s = shapes(b);
                                 return boost::math::ibeta(s.a, s.b, t);
                               },
                               [t](const LogitNormalDist& l) { return normal_cdf((logit(t) - l.mu) / l.sigma); }},
                    d);
}

double ref_log_pdf_logit(double z, const RefDist& d) {
  return std::visit(overloaded{[z](const BetaDist& b) {
                                 // density of logit(T): t^a (1-t)^b / B(a, b)
                                 const auto s = shapes(b);
                                 return s.a * log_inv_logit(z) + s.b * log1m_inv_logit(z) - log_beta_fn(s.a, s.b);
                               },
                               [z](const LogitNormalDist& l) { return normal_log_pdf(z, l.mu, l.sigma); }},
                    d);
}

double ref_mean(const RefDist& d) {
  validate(d);
  return std::visit(overloaded{[](const BetaDist& b) { return b.phi; },
                               [](const LogitNormalDist& l) {
                                 // E[logistic(mu + sigma Z)] by composite Simpson over +-10 sd.
                                 constexpr int n = 2000;
                                 const double h = 20.0 / n;
                                 double acc = 0.0;
                                 for (int i = 0; i <= n; ++i) {
                                   const double z = -10.0 + i * h;
                                   const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
                                   acc += w * inv_logit(l.mu + l.sigma * z) * normal_pdf(z);
                                 }
                                 return acc * h / 3.0;
                               }},
                    d);
}

}  // namespace threshold
