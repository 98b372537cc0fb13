#include "threshold/initialize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

namespace threshold {

namespace {

// Negative tempered log density over the free coordinates; the rest stay at `base`.
class TemperedObjective final : public ceres::FirstOrderFunction {
 public:
  TemperedObjective(const LogDensity& model, const ModelLayout& layout, const PriorConfig& priors,
                    std::vector<double> base, std::vector<std::size_t> free, double beta)
      : model_(model), layout_(layout), priors_(priors), base_(std::move(base)), free_(std::move(free)), beta_(beta) {}

  int NumParameters() const override { return static_cast<int>(free_.size()); }

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    std::vector<double> q = base_;
    for (std::size_t i = 0; i < free_.size(); ++i) q[free_[i]] = x[i];
    std::vector<double> grad(q.size()), prior_grad(q.size());
    const double lp = model_.log_density_gradient(q, grad);
    const double prior = log_prior(layout_, priors_, q, prior_grad);
    const double value = prior + beta_ * (lp - prior);
    if (!std::isfinite(value)) return false;
    *cost = -value;
    if (gradient) {
      for (std::size_t i = 0; i < free_.size(); ++i) {
        const std::size_t k = free_[i];
        gradient[i] = -(prior_grad[k] + beta_ * (grad[k] - prior_grad[k]));
        if (!std::isfinite(gradient[i])) return false;
      }
    }
    return true;
  }

 private:
  const LogDensity& model_;
  const ModelLayout& layout_;
  const PriorConfig& priors_;
  std::vector<double> base_;
  std::vector<std::size_t> free_;
  double beta_;
};

bool finite_start(const LogDensity& model, std::span<const double> q) {
  std::vector<double> grad(q.size());
  const double lp = model.log_density_gradient(q, grad);
  return std::isfinite(lp) && std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
}

std::vector<double> anneal(const LogDensity& model, const ModelLayout& layout, const PriorConfig& priors,
                           std::vector<double> q, const InitConfig& config) {
  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (k != layout.sigma_phi_index() && k != layout.sigma_lambda_index()) free.push_back(k);
  }
  std::vector<double> x(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) x[i] = q[free[i]];

  ceres::GradientProblemSolver::Options options;
  options.max_num_iterations = static_cast<int>(config.iterations_per_stage);
  options.logging_type = ceres::SILENT;
  for (double beta : config.schedule) {
    // GradientProblem takes ownership of the objective.
    const ceres::GradientProblem problem(new TemperedObjective(model, layout, priors, q, free, beta));
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, x.data(), &summary);
  }
  for (std::size_t i = 0; i < free.size(); ++i) q[free[i]] = x[i];
  return q;
}

}  // namespace

void InitConfig::validate() const {
  if (starts == 0) throw std::invalid_argument("init: need at least one start per chain");
  if (schedule.empty()) throw std::invalid_argument("init: empty annealing schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0 && schedule[i] <= 1.0) || (i > 0 && schedule[i] < schedule[i - 1])) {
      throw std::invalid_argument("init: schedule must be nondecreasing in (0, 1]");
    }
  }
  if (schedule.back() != 1.0) throw std::invalid_argument("init: schedule must end at 1");
}

std::vector<std::vector<double>> annealed_starts(const LogDensity& model, const ModelLayout& layout,
                                                 const PriorConfig& priors, std::size_t chains, double radius,
                                                 std::uint64_t seed, const InitConfig& config) {
  config.validate();
  if (model.dimension() != layout.dimension()) throw std::invalid_argument("init: model does not match the layout");
  if (!(radius > 0.0)) throw std::invalid_argument("init: radius must be positive");

  std::vector<std::vector<double>> out;
  out.reserve(chains);
  std::uniform_real_distribution<double> uniform(-radius, radius);
  for (std::size_t c = 0; c < chains; ++c) {
    std::seed_seq seq{seed & 0xffffffffU, seed >> 32U, static_cast<std::uint64_t>(c), std::uint64_t{0x1417}};
    std::mt19937_64 rng(seq);
    std::vector<double> best;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0, attempts = 0; s < config.starts && attempts < 100 * config.starts; ++attempts) {
      std::vector<double> q(layout.dimension());
      for (auto& v : q) v = uniform(rng);
      if (!finite_start(model, q)) continue;
      ++s;
      q = anneal(model, layout, priors, std::move(q), config);
      const double lp = model.log_density(q);
      if (std::isfinite(lp) && lp > best_lp) {
        best_lp = lp;
        best = std::move(q);
      }
    }
    if (best.empty()) throw std::runtime_error("init: no finite starting point found");
    out.push_back(std::move(best));
  }
  return out;
}

}  // namespace threshold
