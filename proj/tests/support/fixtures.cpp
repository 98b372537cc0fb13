#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oracles.hpp"

namespace fixture {

using namespace threshold;

std::vector<double> random_point(std::size_t n, std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> q(n);
  for (auto& v : q) v = u(rng);
  return q;
}

FriskData random_frisk_data(std::size_t R, std::size_t D, std::mt19937_64& rng) {
  FriskData data;
  for (std::size_t r = 0; r < R; ++r) data.races.push_back("r" + std::to_string(r));
  for (std::size_t d = 0; d < D; ++d) data.locations.push_back("d" + std::to_string(d));
  std::uniform_int_distribution<std::int64_t> stops(0, 400);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t d = 0; d < D; ++d) {
      const auto n = stops(rng);
      const auto s = std::uniform_int_distribution<std::int64_t>(0, n)(rng);
      const auto h = std::uniform_int_distribution<std::int64_t>(0, s)(rng);
      data.cells.push_back({r, d, n, s, h});
    }
  }
  return data;
}

StopData random_stop_data(std::size_t R, std::size_t D, std::mt19937_64& rng) {
  StopData data;
  for (std::size_t r = 0; r < R; ++r) data.races.push_back("r" + std::to_string(r));
  for (std::size_t d = 0; d < D; ++d) data.locations.push_back("d" + std::to_string(d));
  std::uniform_int_distribution<std::int64_t> stops(0, 300);
  std::uniform_real_distribution<double> share(0.05, 1.0);
  for (std::size_t d = 0; d < D; ++d) {
    PrecinctStopData p;
    p.location = d;
    for (std::size_t r = 0; r < R; ++r) {
      const auto s = stops(rng);
      p.stops.push_back(s);
      p.hits.push_back(std::uniform_int_distribution<std::int64_t>(0, s)(rng));
      p.census.push_back(share(rng));
    }
    data.precincts.push_back(p);
  }
  return data;
}

double worst_gradient_error(const LogDensity& model, std::span<const double> q) {
  std::vector<double> grad(q.size());
  model.log_density_gradient(q, grad);
  const auto fd = oracle::extrapolated_gradient([&](std::span<const double> x) { return model.log_density(x); }, q);
  double worst = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double scale = std::max(std::abs(grad[i]), std::abs(fd[i]));
    if (scale < 1e-8) continue;
    worst = std::max(worst, std::abs(grad[i] - fd[i]) / scale);
  }
  return worst;
}

}  // namespace fixture
