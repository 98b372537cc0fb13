#include "threshold/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "threshold/distributions.hpp"
#include "threshold/log.hpp"
#include "threshold/special.hpp"

namespace threshold {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::size_t a, std::size_t b, std::size_t tag) {
  std::seed_seq seq{seed & 0xffffffffU, seed >> 32U, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b),
                    static_cast<std::uint64_t>(tag)};
  return std::mt19937_64(seq);
}

void check_params(const ModelParams& p, const ModelLayout& layout) {
  if (p.phi_race.size() != layout.races() || p.lambda_race.size() != layout.races() ||
      p.threshold_mean.size() != layout.races() || p.phi_location.size() != layout.locations() ||
      p.lambda_location.size() != layout.locations() || p.logit_threshold.size() != layout.cells()) {
    throw std::invalid_argument("synthetic spec: generating parameters do not match the layout");
  }
}

// Runs the per-stop process and hands each stop to emit(r, d, frisked, hit, day).
template <class Emit>
void simulate(const SyntheticSpec& spec, Emit&& emit) {
  spec.validate();
  const auto layout = spec.layout();
  const auto q = spec.params.pack(layout);
  for (std::size_t r = 0; r < layout.races(); ++r) {
    for (std::size_t d = 0; d < layout.locations(); ++d) {
      const auto cp = cell_params(layout, q, r, d);
      const DiscParams risk(cp.phi(), cp.delta());
      auto rng = stream(spec.seed, r, d, 0);
      auto day_rng = stream(spec.seed, r, d, 1);
      std::normal_distribution<double> noise(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::uniform_int_distribution<std::size_t> day(0, spec.placebo_levels - 1);
      const std::int64_t n = spec.stops[r * layout.locations() + d];
      for (std::int64_t i = 0; i < n; ++i) {
        const double p = draw_labeled(risk, rng).probability;
        const double z = noise(rng);
        const double u = unit(rng);
        const double t = inv_logit(cp.logit_threshold + spec.heterogeneity_sigma * z);
        const bool frisked = p >= t;
        emit(r, d, frisked, frisked && u < p, day(day_rng));
      }
    }
  }
}

template <class T>
T cycle(const std::vector<T>& v, std::size_t i) {
  return v[i % v.size()];
}

std::vector<std::string> race_labels(std::size_t n) {
  static const std::vector<std::string> names = {"white", "black", "hispanic"};
  std::vector<std::string> out;
  for (std::size_t r = 0; r < n; ++r) out.push_back(r < names.size() ? names[r] : "race" + std::to_string(r));
  return out;
}

std::vector<std::string> location_labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t d = 0; d < n; ++d) {
    std::string id = std::to_string(d + 1);
    out.push_back("p" + std::string(id.size() < 3 ? 3 - id.size() : 0, '0') + id);
  }
  return out;
}

double weighted_rmse(const std::vector<double>& err, const std::vector<double>& w) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    num += w[i] * err[i] * err[i];
    den += w[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

PPCReport finish(std::vector<PPCCell> cells) {
  std::vector<double> rate_err, rate_w, hit_err, hit_w;
  for (const auto& c : cells) {
    if (c.stops == 0) continue;
    rate_err.push_back(c.observed_rate - c.predicted_rate);
    rate_w.push_back(static_cast<double>(c.stops));
    if (!std::isnan(c.observed_hit_rate)) {
      hit_err.push_back(c.observed_hit_rate - c.predicted_hit_rate);
      hit_w.push_back(static_cast<double>(c.stops));
    }
  }
  PPCReport out;
  out.cells = std::move(cells);
  out.rate_rmse = weighted_rmse(rate_err, rate_w);
  out.hit_rate_rmse = weighted_rmse(hit_err, hit_w);
  return out;
}

// Runs jobs on their own threads; sampler chains inside them draw from the
// worker budget, so the number of threads here does not oversubscribe.
template <class Result>
std::vector<Result> run_all(std::vector<std::function<Result()>> jobs) {
  std::vector<Result> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          results[i] = jobs[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace

void SyntheticSpec::validate() const {
  const auto l = layout();
  check_params(params, l);
  if (stops.size() != l.cells()) throw std::invalid_argument("synthetic spec: need one stop count per cell");
  if (std::any_of(stops.begin(), stops.end(), [](std::int64_t s) { return s < 0; })) {
    throw std::invalid_argument("synthetic spec: negative stop count");
  }
  if (!(heterogeneity_sigma >= 0.0)) throw std::invalid_argument("synthetic spec: sigma must be >= 0");
  if (placebo_levels == 0) throw std::invalid_argument("synthetic spec: placebo_levels must be positive");
}

FriskData generate(const SyntheticSpec& spec) {
  FriskData out;
  out.races = spec.races;
  out.locations = spec.locations;
  const std::size_t D = spec.locations.size();
  out.cells.resize(spec.races.size() * D);
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    out.cells[i].race = i / D;
    out.cells[i].location = i % D;
  }
  simulate(spec, [&](std::size_t r, std::size_t d, bool frisked, bool hit, std::size_t) {
    auto& c = out.cells[r * D + d];
    ++c.stops;
    c.searches += frisked ? 1 : 0;
    c.hits += hit ? 1 : 0;
  });
  return out;
}

std::vector<RawStopRecord> generate_records(const SyntheticSpec& spec) {
  std::vector<RawStopRecord> out;
  out.reserve(static_cast<std::size_t>(std::accumulate(spec.stops.begin(), spec.stops.end(), std::int64_t{0})));
  simulate(spec, [&](std::size_t r, std::size_t d, bool frisked, bool hit, std::size_t day) {
    RawStopRecord rec{spec.races[r], spec.locations[d], frisked, hit, spec.attributes};
    rec.attributes["day"] = std::to_string(day);
    out.push_back(std::move(rec));
  });
  return out;
}

SyntheticSpec frisk_scenario(std::size_t races, std::size_t locations, std::int64_t stops_per_cell,
                             std::uint64_t seed) {
  if (races == 0 || locations == 0) throw std::invalid_argument("frisk_scenario: empty layout");
  const ModelLayout layout(races, locations);
  SyntheticSpec spec;
  spec.races = race_labels(races);
  spec.locations = location_labels(locations);
  spec.seed = seed;
  spec.stops.assign(layout.cells(), stops_per_cell);

  const std::vector<double> phi = {0.12, 0.18, 0.15};
  const std::vector<double> delta = {1.6, 1.3, 1.45};
  const std::vector<double> t = {0.30, 0.15, 0.20};
  const double sigma_phi = 0.2, sigma_lambda = 0.15, threshold_noise = 0.3;

  auto rng = stream(seed, races, locations, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto& p = spec.params = ModelParams::zeros(layout);
  for (std::size_t r = 0; r < races; ++r) {
    p.phi_race[r] = logit(cycle(phi, r));
    p.lambda_race[r] = std::log(cycle(delta, r));
    p.threshold_mean[r] = logit(cycle(t, r));
  }
  for (std::size_t d = 1; d < locations; ++d) {
    p.phi_location[d] = sigma_phi * normal(rng);
    p.lambda_location[d] = sigma_lambda * normal(rng);
  }
  for (std::size_t r = 0; r < races; ++r) {
    for (std::size_t d = 0; d < locations; ++d) {
      p.logit_threshold[r * locations + d] = p.threshold_mean[r] + threshold_noise * normal(rng);
    }
  }
  p.log_sigma_phi = std::log(sigma_phi);
  p.log_sigma_lambda = std::log(sigma_lambda);
  return spec;
}

void StopSyntheticSpec::validate() const {
  const auto l = layout();
  check_params(params, l);
  if (census.size() != l.locations() || stops.size() != l.locations()) {
    throw std::invalid_argument("stop synthetic spec: need census and stops for every location");
  }
  for (const auto& c : census) {
    if (c.size() != l.races()) throw std::invalid_argument("stop synthetic spec: census needs one share per race");
    if (std::any_of(c.begin(), c.end(), [](double v) { return !(v >= 0.0); })) {
      throw std::invalid_argument("stop synthetic spec: negative census share");
    }
  }
  if (std::any_of(stops.begin(), stops.end(), [](std::int64_t s) { return s < 0; })) {
    throw std::invalid_argument("stop synthetic spec: negative stop count");
  }
}

StopData generate_stop(const StopSyntheticSpec& spec) {
  spec.validate();
  const auto layout = spec.layout();
  const auto q = spec.params.pack(layout);
  const std::size_t R = layout.races();
  StopData out;
  out.races = spec.races;
  out.locations = spec.locations;
  for (std::size_t d = 0; d < layout.locations(); ++d) {
    auto rng = stream(spec.seed, d, 0, 3);
    const auto theta = composition(layout, q, d, spec.census[d]);
    PrecinctStopData p;
    p.location = d;
    p.census = spec.census[d];
    p.stops.assign(R, 0);
    p.hits.assign(R, 0);
    std::int64_t remaining = spec.stops[d];
    double mass = 1.0;
    for (std::size_t r = 0; r < R; ++r) {
      if (r + 1 == R) {
        p.stops[r] = remaining;
      } else if (remaining > 0 && theta[r] > 0.0) {
        std::binomial_distribution<std::int64_t> draw(remaining, std::clamp(theta[r] / mass, 0.0, 1.0));
        p.stops[r] = draw(rng);
      }
      remaining -= p.stops[r];
      mass -= theta[r];
      const double h = derived_rates(cell_params(layout, q, r, d)).hit_rate;
      if (p.stops[r] > 0) p.hits[r] = std::binomial_distribution<std::int64_t>(p.stops[r], h)(rng);
    }
    out.precincts.push_back(std::move(p));
  }
  return out;
}

StopSyntheticSpec stop_scenario(std::size_t races, std::size_t locations, std::int64_t stops_per_location,
                                std::uint64_t seed) {
  if (races == 0 || locations == 0) throw std::invalid_argument("stop_scenario: empty layout");
  const ModelLayout layout(races, locations);
  StopSyntheticSpec spec;
  spec.races = race_labels(races);
  spec.locations = location_labels(locations);
  spec.seed = seed;
  spec.stops.assign(locations, stops_per_location);

  const std::vector<double> phi = {0.03, 0.02, 0.025};
  const std::vector<double> delta = {1.6, 1.4, 1.5};
  const std::vector<double> t = {0.06, 0.015, 0.03};
  const double sigma_phi = 0.2, sigma_lambda = 0.15, threshold_noise = 0.2;

  auto rng = stream(seed, races, locations, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> share(2.0, 1.0);
  auto& p = spec.params = ModelParams::zeros(layout);
  for (std::size_t r = 0; r < races; ++r) {
    p.phi_race[r] = logit(cycle(phi, r));
    p.lambda_race[r] = std::log(cycle(delta, r));
    p.threshold_mean[r] = logit(cycle(t, r));
  }
  for (std::size_t d = 1; d < locations; ++d) {
    p.phi_location[d] = sigma_phi * normal(rng);
    p.lambda_location[d] = sigma_lambda * normal(rng);
  }
  for (std::size_t r = 0; r < races; ++r) {
    for (std::size_t d = 0; d < locations; ++d) {
      p.logit_threshold[r * locations + d] = p.threshold_mean[r] + threshold_noise * normal(rng);
    }
  }
  p.log_sigma_phi = std::log(sigma_phi);
  p.log_sigma_lambda = std::log(sigma_lambda);
  for (std::size_t d = 0; d < locations; ++d) {
    std::vector<double> c(races);
    for (auto& v : c) v = share(rng);
    const double total = std::accumulate(c.begin(), c.end(), 0.0);
    for (auto& v : c) v /= total;
    spec.census.push_back(std::move(c));
  }
  return spec;
}

template <class At>
PPCReport average_over_draws(const PosteriorDraws& draws, At&& at) {
  if (draws.total_draws() == 0) throw std::invalid_argument("ppc: no draws");
  auto cells = at(draws.draw(0, 0)).cells;
  for (auto& c : cells) c.predicted_rate = c.predicted_hit_rate = 0.0;
  for (std::size_t ch = 0; ch < draws.chains; ++ch) {
    for (std::size_t i = 0; i < draws.iterations; ++i) {
      const auto one = at(draws.draw(ch, i)).cells;
      for (std::size_t k = 0; k < cells.size(); ++k) {
        cells[k].predicted_rate += one[k].predicted_rate;
        cells[k].predicted_hit_rate += one[k].predicted_hit_rate;
      }
    }
  }
  const double n = static_cast<double>(draws.total_draws());
  for (auto& c : cells) {
    c.predicted_rate /= n;
    c.predicted_hit_rate /= n;
  }
  return finish(std::move(cells));
}

PPCReport ppc(const PosteriorDraws& draws, const FriskData& data) {
  if (draws.dimension != data.layout().dimension()) throw std::invalid_argument("ppc: dimension mismatch");
  data.validate();
  return average_over_draws(draws, [&](std::span<const double> q) { return ppc_at(q, data); });
}

PPCReport ppc_at(std::span<const double> q, const FriskData& data) {
  data.validate();
  const auto layout = data.layout();
  if (q.size() != layout.dimension()) throw std::invalid_argument("ppc: dimension mismatch");
  std::vector<PPCCell> cells;
  for (const auto& c : data.cells) {
    const auto rates = derived_rates(cell_params(layout, q, c.race, c.location));
    PPCCell out{c.race, c.location, c.stops, 0.0, rates.search_rate,
                std::numeric_limits<double>::quiet_NaN(), rates.hit_rate};
    if (c.stops > 0) out.observed_rate = static_cast<double>(c.searches) / static_cast<double>(c.stops);
    if (c.searches > 0) out.observed_hit_rate = static_cast<double>(c.hits) / static_cast<double>(c.searches);
    cells.push_back(out);
  }
  return finish(std::move(cells));
}

PPCReport ppc_stop(const PosteriorDraws& draws, const StopData& data) {
  if (draws.dimension != data.layout().dimension()) throw std::invalid_argument("ppc: dimension mismatch");
  StopData normalized = data;
  normalize_census(normalized);
  return average_over_draws(draws, [&](std::span<const double> q) { return ppc_stop_at(q, normalized); });
}

PPCReport ppc_stop_at(std::span<const double> q, const StopData& data) {
  StopData normalized = data;
  normalize_census(normalized);
  const auto layout = normalized.layout();
  if (q.size() != layout.dimension()) throw std::invalid_argument("ppc: dimension mismatch");
  std::vector<PPCCell> cells;
  for (const auto& p : normalized.precincts) {
    const auto theta = composition(layout, q, p.location, p.census);
    const double total = static_cast<double>(p.total_stops());
    for (std::size_t r = 0; r < layout.races(); ++r) {
      PPCCell out{r, p.location, p.stops[r], 0.0, theta[r], std::numeric_limits<double>::quiet_NaN(),
                  derived_rates(cell_params(layout, q, r, p.location)).hit_rate};
      if (total > 0) out.observed_rate = static_cast<double>(p.stops[r]) / total;
      if (p.stops[r] > 0) out.observed_hit_rate = static_cast<double>(p.hits[r]) / static_cast<double>(p.stops[r]);
      cells.push_back(out);
    }
  }
  return finish(std::move(cells));
}

std::vector<double> default_sigma_grid() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

std::vector<HeterogeneityPoint> heterogeneity_sweep(const SyntheticSpec& base, std::span<const double> sigmas,
                                                    const SweepConfig& config) {
  std::vector<std::function<HeterogeneityPoint()>> jobs;
  for (double sigma : sigmas) {
    jobs.emplace_back([&base, &config, sigma] {
      SyntheticSpec spec = base;
      spec.heterogeneity_sigma = sigma;
      return HeterogeneityPoint{sigma, fit_frisk(generate(spec), config.priors, config.sampler, config.budget)};
    });
  }
  return run_all(std::move(jobs));
}

FitResult placebo(const std::vector<RawStopRecord>& records, const std::string& column, const SweepConfig& config) {
  return fit_frisk(aggregate(records, column), config.priors, config.sampler, config.budget);
}

void placebo(const StopData&, const std::string& column) {
  throw IdentifiabilityError("placebo on the stop model is refused: replacing race with '" + column +
                             "' severs the census base rates that identify the model");
}

std::vector<LevelFit> subset_disaggregate(const std::vector<RawStopRecord>& records, const std::string& column,
                                          const SweepConfig& config, std::vector<std::string> levels) {
  if (levels.empty()) {
    for (const auto& r : records) {
      const auto v = r.field(column);
      if (v && std::find(levels.begin(), levels.end(), *v) == levels.end()) levels.push_back(*v);
    }
  }
  std::vector<std::pair<std::string, std::vector<RawStopRecord>>> subsets;
  for (const auto& level : levels) {
    auto subset = filter_records(records, column, level);
    if (subset.empty()) {
      log_warning("disaggregate: level '" + level + "' of " + column + " has no records; skipped");
      continue;
    }
    subsets.emplace_back(level, std::move(subset));
  }
  std::vector<std::function<LevelFit()>> jobs;
  for (const auto& [level, subset] : subsets) {
    jobs.emplace_back([&, &level = level, &subset = subset] {
      return LevelFit{level, subset.size(), fit_frisk(aggregate(subset), config.priors, config.sampler, config.budget)};
    });
  }
  return run_all(std::move(jobs));
}

std::vector<CensusPoint> census_sweep(const StopData& data, std::size_t race, std::span<const double> factors,
                                      const SweepConfig& config) {
  std::vector<std::function<CensusPoint()>> jobs;
  for (double factor : factors) {
    jobs.emplace_back([&data, &config, race, factor] {
      return CensusPoint{factor, fit_stop(rescale_census(data, race, factor), config.priors, config.sampler,
                                          config.budget)};
    });
  }
  return run_all(std::move(jobs));
}

bool intervals_overlap(const RaceThreshold& a, const RaceThreshold& b) {
  return a.lower <= b.upper && b.lower <= a.upper;
}

bool all_intervals_overlap(const ThresholdTable& table) {
  const auto& levels = table.race_level;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    for (std::size_t j = i + 1; j < levels.size(); ++j) {
      if (!intervals_overlap(levels[i], levels[j])) return false;
    }
  }
  return true;
}

bool thresholds_nonincreasing(std::span<const ThresholdTable* const> tables) {
  for (std::size_t k = 1; k < tables.size(); ++k) {
    const auto& prev = tables[k - 1]->race_level;
    const auto& next = tables[k]->race_level;
    if (prev.size() != next.size()) throw std::invalid_argument("tables have different races");
    for (std::size_t r = 0; r < prev.size(); ++r) {
      if (next[r].mean > prev[r].mean) return false;
    }
  }
  return true;
}

bool gaps_preserved(std::span<const ThresholdTable* const> tables, std::size_t reference) {
  if (tables.empty()) return true;
  const auto sign = [&](const ThresholdTable& t, std::size_t r) {
    const double gap = t.race_level.at(r).mean - t.race_level.at(reference).mean;
    return (gap > 0.0) - (gap < 0.0);
  };
  const auto& first = *tables.front();
  for (const auto* t : tables) {
    for (std::size_t r = 0; r < first.race_level.size(); ++r) {
      if (r != reference && sign(*t, r) != sign(first, r)) return false;
    }
  }
  return true;
}

bool ordering_preserved(std::span<const ThresholdTable* const> tables) {
  if (tables.empty()) return true;
  const std::size_t races = tables.front()->race_level.size();
  for (std::size_t r = 0; r < races; ++r) {
    if (!gaps_preserved(tables, r)) return false;
  }
  return true;
}

}  // namespace threshold
