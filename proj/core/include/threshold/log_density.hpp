#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace threshold {

/// A differentiable log density on R^n, the sampler's target.
/// Implementations must be safe to evaluate concurrently from several chains.
class LogDensity {
 public:
  virtual ~LogDensity() = default;

  virtual std::size_t dimension() const = 0;
  virtual double log_density(std::span<const double> q) const = 0;
  /// Writes the gradient into grad (overwriting it) and returns the log density.
  virtual double log_density_gradient(std::span<const double> q, std::span<double> grad) const = 0;
  virtual std::vector<std::string> parameter_names() const;
};

}  // namespace threshold
