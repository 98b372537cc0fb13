#include "threshold/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "threshold/parallel.hpp"
#include "threshold/special.hpp"

namespace threshold {

namespace {

using Vec = std::vector<double>;
using Clock = std::chrono::steady_clock;

constexpr double kMaxEnergyError = 1000.0;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec sum(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

void add_into(Vec& a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// Generalized no-U-turn criterion on the trajectory momentum sum rho.
bool no_u_turn(const Vec& p_sharp_minus, const Vec& p_sharp_plus, const Vec& rho) {
  return dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0;
}

struct PhasePoint {
  Vec q, p, grad;
  double log_density = 0.0;
};

// Dual averaging of log step size towards a target acceptance statistic.
class StepSizeAdaptation {
 public:
  explicit StepSizeAdaptation(double target) : target_(target) {}

  void restart(double step_size) {
    mu_ = std::log(10.0 * step_size);
    counter_ = 0.0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  double learn(double accept_stat) {
    counter_ += 1.0;
    accept_stat = std::min(accept_stat, 1.0);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step_size() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kKappa = 0.75;
  static constexpr double kT0 = 10.0;
  double target_;
  double mu_ = 0.0;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

// Diagonal metric estimation over an initial fast buffer, doubling slow
// windows and a terminal fast buffer.
class MetricAdaptation {
 public:
  MetricAdaptation(std::size_t num_warmup, std::size_t dim) : num_warmup_(num_warmup), mean_(dim), m2_(dim) {
    if (num_warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > num_warmup) {
      init_buffer_ = static_cast<std::size_t>(0.15 * static_cast<double>(num_warmup));
      term_buffer_ = static_cast<std::size_t>(0.1 * static_cast<double>(num_warmup));
      base_window_ = num_warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  /// Returns true when a window closed and `inverse_metric` was updated.
  bool learn(Vec& inverse_metric, const Vec& q) {
    if (!enabled_) return false;
    if (in_window()) add_sample(q);
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(count_);
      for (std::size_t i = 0; i < inverse_metric.size(); ++i) {
        const double var = m2_[i] / (n - 1.0);
        inverse_metric[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
      }
      count_ = 0;
      std::fill(mean_.begin(), mean_.end(), 0.0);
      std::fill(m2_.begin(), m2_.end(), 0.0);
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ && counter_ != num_warmup_;
  }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != num_warmup_; }

  void compute_next_window() {
    const std::size_t last = num_warmup_ - term_buffer_ - 1;
    if (next_window_ == last) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != last && next_window_ + 2 * window_size_ >= num_warmup_ - term_buffer_) next_window_ = last;
  }

  void add_sample(const Vec& q) {
    ++count_;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double delta = q[i] - mean_[i];
      mean_[i] += delta / static_cast<double>(count_);
      m2_[i] += delta * (q[i] - mean_[i]);
    }
  }

  bool enabled_ = true;
  std::size_t num_warmup_;
  std::size_t init_buffer_ = 75;
  std::size_t term_buffer_ = 50;
  std::size_t base_window_ = 25;
  std::size_t counter_ = 0;
  std::size_t window_size_ = 0;
  std::size_t next_window_ = 0;
  std::size_t count_ = 0;
  Vec mean_, m2_;
};

struct TransitionInfo {
  std::uint32_t leapfrog_steps;
  double accept_stat;
  bool divergent;
};

class Chain {
 public:
  Chain(const LogDensity& target, const SamplerConfig& config, std::size_t index)
      : target_(target),
        config_(config),
        dim_(target.dimension()),
        inverse_metric_(dim_, 1.0) {
    std::seed_seq seq{config.seed & 0xffffffffU, config.seed >> 32U, static_cast<std::uint64_t>(index)};
    rng_.seed(seq);
  }

  void run(PosteriorDraws& out, std::size_t chain, std::span<const double> start) {
    if (start.empty()) {
      initialize();
    } else {
      start_at(start);
    }
    ChainStats& stats = out.chain_stats[chain];

    auto t0 = Clock::now();
    StepSizeAdaptation step_adapt(config_.target_accept);
    MetricAdaptation metric_adapt(config_.warmup_iters, dim_);
    init_step_size();
    step_adapt.restart(step_size_);
    for (std::size_t it = 0; it < config_.warmup_iters; ++it) {
      const auto info = transition();
      stats.warmup_leapfrog_steps += info.leapfrog_steps;
      stats.warmup_divergences += info.divergent ? 1 : 0;
      step_size_ = step_adapt.learn(info.accept_stat);
      if (metric_adapt.learn(inverse_metric_, current_.q)) {
        init_step_size();
        step_adapt.restart(step_size_);
      }
    }
    if (config_.warmup_iters > 0) step_size_ = step_adapt.final_step_size();
    auto t1 = Clock::now();
    stats.warmup_seconds = std::chrono::duration<double>(t1 - t0).count();

    for (std::size_t it = 0; it < config_.sampling_iters; ++it) {
      const auto info = transition();
      const std::size_t row = chain * config_.sampling_iters + it;
      std::copy(current_.q.begin(), current_.q.end(), out.values.begin() + static_cast<std::ptrdiff_t>(row * dim_));
      out.leapfrog_steps[row] = info.leapfrog_steps;
      out.divergent[row] = info.divergent ? 1 : 0;
      out.accept_stat[row] = info.accept_stat;
      stats.sampling_leapfrog_steps += info.leapfrog_steps;
    }
    stats.sampling_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
    stats.step_size = step_size_;
    stats.inverse_metric = inverse_metric_;
  }

 private:
  void initialize() {
    std::uniform_real_distribution<double> init(-config_.init_radius, config_.init_radius);
    current_.q.assign(dim_, 0.0);
    current_.p.assign(dim_, 0.0);
    current_.grad.assign(dim_, 0.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (auto& v : current_.q) v = init(rng_);
      current_.log_density = target_.log_density_gradient(current_.q, current_.grad);
      if (std::isfinite(current_.log_density) &&
          std::all_of(current_.grad.begin(), current_.grad.end(), [](double g) { return std::isfinite(g); })) {
        return;
      }
    }
    throw std::runtime_error("sampler: no finite initial log density after 100 attempts");
  }

  void start_at(std::span<const double> q) {
    current_.q.assign(q.begin(), q.end());
    current_.p.assign(dim_, 0.0);
    current_.grad.assign(dim_, 0.0);
    current_.log_density = target_.log_density_gradient(current_.q, current_.grad);
    if (!std::isfinite(current_.log_density) ||
        !std::all_of(current_.grad.begin(), current_.grad.end(), [](double g) { return std::isfinite(g); })) {
      throw std::runtime_error("sampler: log density is not finite at the given initial point");
    }
  }

  double kinetic(const Vec& p) const {
    double k = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) k += inverse_metric_[i] * p[i] * p[i];
    return 0.5 * k;
  }
  double hamiltonian(const PhasePoint& z) const { return -z.log_density + kinetic(z.p); }
  Vec sharp(const Vec& p) const {
    Vec out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = inverse_metric_[i] * p[i];
    return out;
  }
  void draw_momentum(PhasePoint& z) {
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] = normal_(rng_) / std::sqrt(inverse_metric_[i]);
  }
  void leapfrog(PhasePoint& z, double eps) {
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] += 0.5 * eps * z.grad[i];
    for (std::size_t i = 0; i < dim_; ++i) z.q[i] += eps * inverse_metric_[i] * z.p[i];
    z.log_density = target_.log_density_gradient(z.q, z.grad);
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  }
  double energy(const PhasePoint& z) const {
    const double h = hamiltonian(z);
    return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
  }

  // Doubles or halves the step size until one leapfrog step crosses an
  // acceptance probability of 0.8.
  void init_step_size() {
    const PhasePoint start = current_;
    PhasePoint z = start;
    draw_momentum(z);
    double h0 = energy(z);
    leapfrog(z, step_size_);
    const int direction = (h0 - energy(z)) > std::log(0.8) ? 1 : -1;
    for (;;) {
      z = start;
      draw_momentum(z);
      h0 = energy(z);
      leapfrog(z, step_size_);
      const double delta_h = h0 - energy(z);
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      step_size_ = direction == 1 ? 2.0 * step_size_ : 0.5 * step_size_;
      if (step_size_ > 1e7) throw std::runtime_error("sampler: posterior is improper (step size diverged)");
      if (step_size_ == 0.0) throw std::runtime_error("sampler: step size underflowed to zero");
    }
  }

  TransitionInfo transition() {
    draw_momentum(current_);
    z_ = current_;
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;

    Vec p_fwd_fwd = z_.p, p_sharp_fwd_fwd = sharp(z_.p);
    Vec p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp_fwd_fwd;
    Vec p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp_fwd_fwd;
    Vec p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp_fwd_fwd;
    Vec rho = z_.p;

    double log_sum_weight = 0.0;
    h0_ = energy(z_);
    n_leapfrog_ = 0;
    sum_metro_prob_ = 0.0;
    divergent_ = false;

    for (std::size_t depth = 0; depth < config_.max_tree_depth;) {
      Vec rho_fwd(dim_, 0.0), rho_bck(dim_, 0.0);
      double log_sum_weight_subtree = kNegInf;
      bool valid;
      if (uniform_(rng_) > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, 1.0,
                           log_sum_weight_subtree);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, -1.0,
                           log_sum_weight_subtree);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform_(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = sum(rho_bck, rho_fwd);
      bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, sum(rho_bck, p_fwd_bck));
      persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, sum(rho_fwd, p_bck_fwd));
      if (!persist) break;
    }

    current_ = std::move(z_sample);
    const double accept = n_leapfrog_ > 0 ? sum_metro_prob_ / static_cast<double>(n_leapfrog_) : 0.0;
    return {n_leapfrog_, accept, divergent_};
  }

  bool build_tree(std::size_t depth, PhasePoint& z_propose, Vec& p_sharp_beg, Vec& p_sharp_end, Vec& rho,
                  Vec& p_beg, Vec& p_end, double sign, double& log_sum_weight) {
    if (depth == 0) {
      leapfrog(z_, sign * step_size_);
      ++n_leapfrog_;
      const double h = energy(z_);
      if (h - h0_ > kMaxEnergyError) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0_ - h);
      sum_metro_prob_ += h0_ - h > 0.0 ? 1.0 : std::exp(h0_ - h);
      z_propose = z_;
      p_sharp_beg = sharp(z_.p);
      p_sharp_end = p_sharp_beg;
      add_into(rho, z_.p);
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    Vec p_init_end(dim_), p_sharp_init_end(dim_), rho_init(dim_, 0.0);
    double log_sum_weight_init = kNegInf;
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, sign,
                    log_sum_weight_init)) {
      return false;
    }

    PhasePoint z_propose_final = z_;
    Vec p_final_beg(dim_), p_sharp_final_beg(dim_), rho_final(dim_, 0.0);
    double log_sum_weight_final = kNegInf;
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, sign,
                    log_sum_weight_final)) {
      return false;
    }

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = std::move(z_propose_final);
    } else if (uniform_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = std::move(z_propose_final);
    }

    const Vec rho_subtree = sum(rho_init, rho_final);
    add_into(rho, rho_subtree);
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, sum(rho_init, p_final_beg));
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, sum(rho_final, p_init_end));
    return persist;
  }

  const LogDensity& target_;
  const SamplerConfig& config_;
  std::size_t dim_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  Vec inverse_metric_;
  double step_size_ = 1.0;

  PhasePoint current_;
  PhasePoint z_;
  double h0_ = 0.0;
  std::uint32_t n_leapfrog_ = 0;
  double sum_metro_prob_ = 0.0;
  bool divergent_ = false;
};

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("sampler: need at least one chain");
  if (sampling_iters < 1) throw std::invalid_argument("sampler: need at least one sampling iteration");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("sampler: target_accept in (0,1)");
  if (max_tree_depth < 1) throw std::invalid_argument("sampler: max_tree_depth must be positive");
  if (!(init_radius > 0.0)) throw std::invalid_argument("sampler: init_radius must be positive");
}

std::vector<std::vector<double>> PosteriorDraws::parameter_chains(std::size_t k) const {
  std::vector<std::vector<double>> out(chains, std::vector<double>(iterations));
  for (std::size_t c = 0; c < chains; ++c) {
    for (std::size_t i = 0; i < iterations; ++i) out[c][i] = at(c, i, k);
  }
  return out;
}

std::vector<double> PosteriorDraws::posterior_mean() const {
  std::vector<double> mean(dimension, 0.0);
  const double n = static_cast<double>(total_draws());
  for (std::size_t row = 0; row < total_draws(); ++row) {
    for (std::size_t k = 0; k < dimension; ++k) mean[k] += values[row * dimension + k] / n;
  }
  return mean;
}

std::size_t PosteriorDraws::divergences() const {
  return static_cast<std::size_t>(std::count(divergent.begin(), divergent.end(), std::uint8_t{1}));
}

void PosteriorDraws::validate() const {
  if (values.size() != chains * iterations * dimension) throw std::invalid_argument("draws: value array size mismatch");
  if (!names.empty() && names.size() != dimension) throw std::invalid_argument("draws: name count mismatch");
  if (std::any_of(values.begin(), values.end(), [](double v) { return std::isnan(v); })) {
    throw std::invalid_argument("draws: NaN draw");
  }
}

PosteriorDraws PosteriorDraws::constant(std::vector<std::string> names, std::span<const double> q, std::size_t chains,
                                        std::size_t iterations) {
  PosteriorDraws d;
  d.chains = chains;
  d.iterations = iterations;
  d.dimension = q.size();
  d.names = std::move(names);
  d.values.reserve(chains * iterations * q.size());
  for (std::size_t i = 0; i < chains * iterations; ++i) d.values.insert(d.values.end(), q.begin(), q.end());
  d.leapfrog_steps.assign(chains * iterations, 0);
  d.divergent.assign(chains * iterations, 0);
  d.accept_stat.assign(chains * iterations, 1.0);
  d.chain_stats.resize(chains);
  return d;
}

PosteriorDraws sample(const LogDensity& target, const SamplerConfig& config, WorkerBudget* budget,
                      std::span<const std::vector<double>> initial_points) {
  config.validate();
  if (!initial_points.empty()) {
    if (initial_points.size() != config.chains) {
      throw std::invalid_argument("sampler: need one initial point per chain");
    }
    for (const auto& q : initial_points) {
      if (q.size() != target.dimension()) throw std::invalid_argument("sampler: initial point has wrong dimension");
    }
  }
  if (!budget) budget = &WorkerBudget::global();
  PosteriorDraws out;
  out.chains = config.chains;
  out.iterations = config.sampling_iters;
  out.dimension = target.dimension();
  out.names = target.parameter_names();
  const std::size_t rows = config.chains * config.sampling_iters;
  out.values.assign(rows * out.dimension, 0.0);
  out.leapfrog_steps.assign(rows, 0);
  out.divergent.assign(rows, 0);
  out.accept_stat.assign(rows, 0.0);
  out.chain_stats.resize(config.chains);

  std::vector<std::exception_ptr> errors(config.chains);
  {
    std::vector<std::jthread> threads;
    threads.reserve(config.chains);
    for (std::size_t c = 0; c < config.chains; ++c) {
      threads.emplace_back([&, c] {
        BudgetSlot slot(*budget);
        try {
          Chain chain(target, config, c);
          chain.run(out, c, initial_points.empty() ? std::span<const double>{} : std::span<const double>(initial_points[c]));
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double leapfrog_energy_error(const LogDensity& target, std::span<const double> q, std::span<const double> p,
                             double step_size, std::size_t steps) {
  Vec pos(q.begin(), q.end()), mom(p.begin(), p.end()), grad(q.size());
  double lp = target.log_density_gradient(pos, grad);
  const double h0 = -lp + 0.5 * dot(mom, mom);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < pos.size(); ++i) mom[i] += 0.5 * step_size * grad[i];
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] += step_size * mom[i];
    lp = target.log_density_gradient(pos, grad);
    for (std::size_t i = 0; i < pos.size(); ++i) mom[i] += 0.5 * step_size * grad[i];
  }
  return std::fabs(-lp + 0.5 * dot(mom, mom) - h0);
}

}  // namespace threshold
