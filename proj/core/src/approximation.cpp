#include "threshold/approximation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "threshold/optimize.hpp"
#include "threshold/special.hpp"

namespace threshold {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kSupportSigmas = 9.0;

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Integrate f over [lo, hi] split into `panels` equal pieces plus any extra
// breakpoints, each piece by adaptive 15-point Gauss-Kronrod.
template <class F>
double panel_integrate(F&& f, double lo, double hi, std::vector<double> breaks, double tol) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i];
    const double b = breaks[i + 1];
    if (!(b > a)) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 8, tol);
  }
  return total;
}

std::vector<double> uniform_breaks(double lo, double hi, std::size_t panels) {
  std::vector<double> out;
  out.reserve(panels + 1);
  for (std::size_t i = 1; i < panels; ++i) out.push_back(lo + (hi - lo) * static_cast<double>(i) / panels);
  return out;
}

}  // namespace

TabulatedDensity::TabulatedDensity(double z_lo, double z_hi, std::vector<double> log_density)
    : z_lo_(z_lo), z_hi_(z_hi), step_(0.0), log_density_(std::move(log_density)) {
  if (!(z_hi > z_lo) || log_density_.size() < 2) {
    throw std::invalid_argument("tabulated density: need an increasing range and at least two points");
  }
  step_ = (z_hi_ - z_lo_) / static_cast<double>(log_density_.size() - 1);
}

double TabulatedDensity::log_pdf_logit(double z) const {
  if (!(z >= z_lo_ && z <= z_hi_)) return kNegInf;
  const double pos = (z - z_lo_) / step_;
  const auto i = std::min(static_cast<std::size_t>(pos), log_density_.size() - 2);
  const double w = pos - static_cast<double>(i);
  const double a = log_density_[i];
  const double b = log_density_[i + 1];
  if (a == kNegInf || b == kNegInf) return kNegInf;
  return (1.0 - w) * a + w * b;
}

Distribution to_distribution(const RefDist& d) {
  validate(d);
  return std::visit([](const auto& v) -> Distribution { return v; }, d);
}

double log_pdf_logit(double z, const Distribution& d) {
  return std::visit(overloaded{[z](const DiscParams& p) { return threshold::log_pdf_logit(z, p); },
                               [z](const BetaDist& b) { return ref_log_pdf_logit(z, RefDist{b}); },
                               [z](const LogitNormalDist& l) { return ref_log_pdf_logit(z, RefDist{l}); },
                               [z](const TabulatedDensity& t) { return t.log_pdf_logit(z); }},
                    d);
}

LogitSupport logit_support(const Distribution& d, double tail_mass) {
  const double log_eps = std::log(tail_mass);
  return std::visit(
      overloaded{[](const DiscParams& p) {
                   const double a = p.logit_phi();
                   const double h = 0.5 * p.delta() * p.delta();
                   return LogitSupport{a - h - kSupportSigmas * p.delta(), a + h + kSupportSigmas * p.delta()};
                 },
                 [](const LogitNormalDist& l) {
                   return LogitSupport{l.mu - kSupportSigmas * l.sigma, l.mu + kSupportSigmas * l.sigma};
                 },
                 [log_eps](const BetaDist& b) {
                   // In logit space the tails decay like exp(a z) and exp(-b z):
                   // Pr(Z < z) ~ exp(a z) / (a B(a, b)) as z -> -inf.
                   const double sa = b.phi * b.lambda;
                   const double sb = (1.0 - b.phi) * b.lambda;
                   const double lb = log_beta_fn(sa, sb);
                   const double margin = std::log(1e-3);
                   double lo = (log_eps + margin + std::log(sa) + lb) / sa;
                   double hi = -(log_eps + margin + std::log(sb) + lb) / sb;
                   // Large shapes concentrate the mass; the asymptotic tail
                   // estimate then overshoots, which only widens the range.
                   lo = std::clamp(lo, -1e4, 0.0);
                   hi = std::clamp(hi, 0.0, 1e4);
                   return LogitSupport{lo, hi};
                 },
                 [](const TabulatedDensity& t) { return LogitSupport{t.z_lo(), t.z_hi()}; }},
      d);
}

TabulatedDensity tabulate(const Distribution& d, std::size_t n) {
  const auto s = logit_support(d);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = log_pdf_logit(s.lo + (s.hi - s.lo) * static_cast<double>(i) / static_cast<double>(n - 1), d);
  }
  return TabulatedDensity(s.lo, s.hi, std::move(values));
}

Moments moments(const Distribution& d) {
  const auto s = logit_support(d);
  const auto breaks = uniform_breaks(s.lo, s.hi, 256);
  const double mass = panel_integrate([&](double z) { return std::exp(log_pdf_logit(z, d)); }, s.lo, s.hi, breaks, 1e-12);
  const double m1 = panel_integrate([&](double z) { return inv_logit(z) * std::exp(log_pdf_logit(z, d)); }, s.lo, s.hi,
                                    breaks, 1e-12);
  const double m2 = panel_integrate(
      [&](double z) {
        const double t = inv_logit(z);
        return t * t * std::exp(log_pdf_logit(z, d));
      },
      s.lo, s.hi, breaks, 1e-12);
  const double mean = m1 / mass;
  return {mean, std::max(m2 / mass - mean * mean, 0.0)};
}

double tv_distance(const Distribution& a, const Distribution& b, const TvOptions& options) {
  const auto sa = logit_support(a);
  const auto sb = logit_support(b);
  // Outside the intersection of the supports min(f, g) carries negligible
  // mass, so TV = 1 - integral of min(f, g) over the intersection.
  const double lo = std::max(sa.lo, sb.lo);
  const double hi = std::min(sa.hi, sb.hi);
  if (!(hi > lo)) return 1.0;

  auto diff = [&](double z) { return log_pdf_logit(z, a) - log_pdf_logit(z, b); };
  auto overlap_density = [&](double z) { return std::exp(std::min(log_pdf_logit(z, a), log_pdf_logit(z, b))); };

  const std::size_t n = std::max<std::size_t>(options.grid_points, 2);
  std::vector<double> breaks = uniform_breaks(lo, hi, n);
  // Split panels at density crossings so every piece is smooth.
  double prev_z = lo;
  double prev_d = diff(lo);
  for (std::size_t i = 1; i <= n; ++i) {
    const double z = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
    const double dz = diff(z);
    if (std::isfinite(prev_d) && std::isfinite(dz) && ((prev_d < 0.0) != (dz < 0.0))) {
      double l = prev_z, r = z, dl = prev_d;
      for (int it = 0; it < 60 && r - l > 1e-13 * (1.0 + std::fabs(l)); ++it) {
        const double m = 0.5 * (l + r);
        const double dm = diff(m);
        if ((dm < 0.0) == (dl < 0.0)) {
          l = m;
          dl = dm;
        } else {
          r = m;
        }
      }
      breaks.push_back(0.5 * (l + r));
    }
    prev_z = z;
    prev_d = dz;
  }
  const double overlap = panel_integrate(overlap_density, lo, hi, std::move(breaks), options.tolerance);
  return std::clamp(1.0 - overlap, 0.0, 1.0);
}

ApproxResult fit_disc(const Distribution& target, const FitOptions& options) {
  const auto m = moments(target);
  const double phi0 = std::clamp(m.mean, 1e-4, 1.0 - 1e-4);

  // Variance of disc(phi0, delta) increases with delta; bisect on log delta.
  double lo = std::log(0.01), hi = std::log(30.0);
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (moments(DiscParams(phi0, std::exp(mid))).variance < m.variance) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double matched_delta = std::exp(0.5 * (lo + hi));

  constexpr double kMaxLogitPhi = 15.0;
  const double min_log_delta = std::log(1e-3);
  const double max_log_delta = std::log(60.0);
  auto objective = [&](std::span<const double> theta) {
    if (std::fabs(theta[0]) > kMaxLogitPhi || theta[1] < min_log_delta || theta[1] > max_log_delta) {
      return 2.0;
    }
    return tv_distance(target, DiscParams(inv_logit(theta[0]), std::exp(theta[1])), options.tv);
  };

  NelderMeadOptions nm;
  nm.max_evaluations = options.max_evaluations_per_start;
  nm.f_tolerance = 1e-9;
  nm.x_tolerance = 1e-6;
  nm.initial_step = 0.3;

  std::optional<NelderMeadResult> best;
  std::size_t evals = 0;
  bool any_converged = false;
  for (double delta0 : {0.5, 1.0, 2.0, 4.0, matched_delta}) {
    auto r = nelder_mead(objective, {logit(phi0), std::log(delta0)}, nm);
    evals += r.evaluations;
    any_converged = any_converged || r.converged;
    if (!best || r.value < best->value) best = std::move(r);
  }
  return {target, DiscParams(inv_logit(best->x[0]), std::exp(best->x[1])), best->value, evals, any_converged};
}

std::vector<RefDist> ApproxGrid::targets() const {
  std::vector<RefDist> out;
  for (double mu : logit_normal_mu) {
    for (double sigma : logit_normal_sigma) out.emplace_back(LogitNormalDist{mu, sigma});
  }
  for (double phi : beta_phi) {
    for (double lambda : beta_lambda) out.emplace_back(BetaDist{phi, lambda});
  }
  return out;
}

std::vector<ApproxResult> approx_sweep(const std::vector<RefDist>& targets, const FitOptions& options,
                                       std::size_t threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(targets.size(), 1));
  std::vector<std::optional<ApproxResult>> slots(targets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < targets.size(); i = next++) slots[i] = fit_disc(to_distribution(targets[i]), options);
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  std::vector<ApproxResult> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::string describe_kind(const Distribution& d) {
  return std::visit(overloaded{[](const DiscParams&) { return std::string("disc"); },
                               [](const BetaDist&) { return std::string("beta"); },
                               [](const LogitNormalDist&) { return std::string("logit_normal"); },
                               [](const TabulatedDensity&) { return std::string("tabulated"); }},
                    d);
}

}  // namespace threshold
