#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace threshold {

struct NelderMeadOptions {
  std::size_t max_evaluations = 2000;
  double f_tolerance = 1e-10;  // spread of simplex values
  double x_tolerance = 1e-8;   // largest vertex distance from the best vertex
  double initial_step = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Derivative-free minimisation with the standard reflection / expansion /
/// contraction / shrink coefficients (1, 2, 1/2, 1/2).
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> start, const NelderMeadOptions& options = {});

}  // namespace threshold
