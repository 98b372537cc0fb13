#include "threshold/inference.hpp"

#include <chrono>
#include <numeric>
#include <stdexcept>

#include "threshold/initialize.hpp"
#include "threshold/log.hpp"
#include "threshold/special.hpp"

namespace threshold {

ThresholdTable extract_thresholds(const PosteriorDraws& draws, const ModelLayout& layout,
                                  std::span<const double> stops_by_cell, std::vector<std::string> races,
                                  std::vector<std::string> locations) {
  if (draws.dimension != layout.dimension()) throw std::invalid_argument("extract_thresholds: dimension mismatch");
  if (draws.total_draws() == 0) throw std::invalid_argument("extract_thresholds: no draws");
  if (!stops_by_cell.empty() && stops_by_cell.size() != layout.cells()) {
    throw std::invalid_argument("extract_thresholds: stop weights must have one entry per cell");
  }
  if (races.size() != layout.races() || locations.size() != layout.locations()) {
    throw std::invalid_argument("extract_thresholds: label count mismatch");
  }
  const std::size_t R = layout.races();
  const std::size_t D = layout.locations();

  std::vector<double> weight(D, 0.0);
  for (std::size_t r = 0; r < R && !stops_by_cell.empty(); ++r) {
    for (std::size_t d = 0; d < D; ++d) weight[d] += stops_by_cell[r * D + d];
  }
  double weight_total = std::accumulate(weight.begin(), weight.end(), 0.0);
  if (!(weight_total > 0.0)) {
    std::fill(weight.begin(), weight.end(), 1.0);
    weight_total = static_cast<double>(D);
  }

  ThresholdTable out;
  out.races = std::move(races);
  out.locations = std::move(locations);
  const std::size_t n = draws.total_draws();
  std::vector<std::vector<double>> race_draws(R, std::vector<double>(n, 0.0));
  std::vector<double> values(n);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t d = 0; d < D; ++d) {
      const std::size_t k = layout.threshold_index(r, d);
      for (std::size_t i = 0; i < n; ++i) {
        values[i] = inv_logit(draws.values[i * draws.dimension + k]);
        race_draws[r][i] += weight[d] / weight_total * values[i];
      }
      CellThreshold c{r, d, std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n),
                      quantile(values, 0.025), quantile(values, 0.975)};
      out.cells.push_back(c);
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    const auto& v = race_draws[r];
    out.race_level.push_back(RaceThreshold{r, std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n),
                                           quantile(v, 0.025), quantile(v, 0.975)});
  }
  return out;
}

namespace {

FitResult fit_model(const LogDensity& model, const ModelLayout& layout, const PriorConfig& priors,
                    const std::vector<double>& stops, const std::vector<std::string>& races,
                    const std::vector<std::string>& locations, const SamplerConfig& sampler, WorkerBudget* budget) {
  const auto start = std::chrono::steady_clock::now();
  sampler.validate();
  const auto starts = annealed_starts(model, layout, priors, sampler.chains, sampler.init_radius, sampler.seed);
  FitResult fit;
  fit.draws = sample(model, sampler, budget, starts);
  fit.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (fit.draws.chains >= 2) {
    fit.diagnostics = diagnose(fit.draws);
  } else {
    log_warning("single-chain fit: convergence diagnostics are not computed");
  }
  if (fit.draws.total_draws() > 0) fit.thresholds = extract_thresholds(fit.draws, layout, stops, races, locations);
  return fit;
}

}  // namespace

FitResult fit_frisk(const FriskData& data, const PriorConfig& priors, const SamplerConfig& sampler,
                    WorkerBudget* budget) {
  const FriskModel model(data, priors);
  return fit_model(model, model.layout(), priors, data.stops_by_cell(), data.races, data.locations, sampler, budget);
}

FitResult fit_stop(const StopData& data, const PriorConfig& priors, const SamplerConfig& sampler,
                   WorkerBudget* budget) {
  const StopModel model(data, priors);
  return fit_model(model, model.layout(), priors, data.stops_by_cell(), data.races, data.locations, sampler, budget);
}

}  // namespace threshold
