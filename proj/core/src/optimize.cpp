#include "threshold/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace threshold {

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> start, const NelderMeadOptions& options) {
  const std::size_t n = start.size();
  if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");

  std::size_t evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = objective(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> simplex(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += options.initial_step;
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto point_along = [&](double coef, std::vector<double>& out) {
    const auto& worst = simplex[order[n]];
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
  };

  bool converged = false;
  while (evals < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    const double spread = values[order[n]] - values[order[0]];
    double size = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        size = std::max(size, std::fabs(simplex[order[i]][j] - simplex[order[0]][j]));
      }
    }
    if (spread <= options.f_tolerance && size <= options.x_tolerance) {
      converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[order[i]][j] / static_cast<double>(n);
    }

    point_along(-1.0, trial);
    const double fr = eval(trial);
    if (fr < values[order[0]]) {
      point_along(-2.0, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        simplex[order[n]] = trial2;
        values[order[n]] = fe;
      } else {
        simplex[order[n]] = trial;
        values[order[n]] = fr;
      }
      continue;
    }
    if (fr < values[order[n - 1]]) {
      simplex[order[n]] = trial;
      values[order[n]] = fr;
      continue;
    }
    // contraction, outside if the reflection improved on the worst vertex
    const bool outside = fr < values[order[n]];
    point_along(outside ? -0.5 : 0.5, trial2);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : values[order[n]])) {
      simplex[order[n]] = trial2;
      values[order[n]] = fc;
      continue;
    }
    // shrink towards the best vertex
    const auto best = simplex[order[0]];
    for (std::size_t i = 1; i <= n; ++i) {
      auto& v = simplex[order[i]];
      for (std::size_t j = 0; j < n; ++j) v[j] = best[j] + 0.5 * (v[j] - best[j]);
      values[order[i]] = eval(v);
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  return {simplex[best], values[best], evals, converged};
}

}  // namespace threshold
