// threshold: command-line front end for the threshold-test library.
//
// Exit codes: 0 success, 1 configuration or data error, 2 inference-quality
// failure (some R-hat above 1.1 under --strict).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "threshold/approximation.hpp"
#include "threshold/config.hpp"
#include "threshold/distributions.hpp"
#include "threshold/io.hpp"
#include "threshold/parallel.hpp"
#include "threshold/robustness.hpp"
#include "threshold/run.hpp"
#include "threshold/special.hpp"

namespace fs = std::filesystem;
using namespace threshold;

namespace {

constexpr double kStrictRhat = 1.1;

/// --config / --set / --print-config / --strict, shared by every subcommand
/// that fits a model.
struct ConfigOptions {
  std::string path;
  std::vector<std::string> overrides;
  bool print = false;
  bool strict = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", overrides, "override a configuration key (key=value), repeatable");
    cmd->add_flag("--print-config", print, "print the effective configuration and exit");
    cmd->add_flag("--strict", strict, "exit with code 2 if any R-hat exceeds 1.1");
  }

  RunConfig build(const std::string& model) const {
    RunConfig config = path.empty() ? RunConfig{} : load_config(path);
    if (!model.empty()) config.model = model;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw DataError("--set expects key=value, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (strict) config.strict = true;
    return config;
  }
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

fs::path output_dir(const RunConfig& config) {
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError("not a number list: '" + text + "'");
    }
  }
  if (out.empty()) throw DataError("empty number list");
  return out;
}

double max_rhat(const FitResult& fit) { return fit.diagnostics ? fit.diagnostics->max_rhat : 1.0; }

void write_race_rows(std::ostream& out, const std::string& key, const std::string& value, const FitResult& fit,
                     bool header) {
  if (header) write_csv_row(out, {key, "race", "mean", "lower", "upper", "max_rhat"});
  for (const auto& rt : fit.thresholds.race_level) {
    write_csv_row(out, {value, fit.thresholds.races[rt.race], format_double(rt.mean), format_double(rt.lower),
                        format_double(rt.upper), format_double(max_rhat(fit))});
  }
}

nlohmann::ordered_json race_json(const FitResult& fit) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& rt : fit.thresholds.race_level) {
    arr.push_back({{"race", fit.thresholds.races[rt.race]}, {"mean", rt.mean}, {"lower", rt.lower}, {"upper", rt.upper}});
  }
  return arr;
}

SweepConfig sweep_config(const RunConfig& config, WorkerBudget& budget) { return {config.priors, config.sampler, &budget}; }

std::size_t worker_count(const RunConfig& config) {
  return config.workers > 0 ? config.workers : WorkerBudget::global().slots();
}

int quality_exit(const RunConfig& config, double worst_rhat) {
  if (config.strict && worst_rhat > kStrictRhat) {
    std::cerr << "max R-hat " << worst_rhat << " exceeds " << kStrictRhat << '\n';
    return kExitQualityFailure;
  }
  return kExitOk;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

// ---- subcommands ----

int cmd_fit(const ConfigOptions& opts, const std::string& model) {
  const auto config = opts.build(model);
  if (opts.print) {
    std::cout << config.to_text();
    return kExitOk;
  }
  const auto outcome = run(config);
  const auto& fit = outcome.fit;
  std::cout << "fit " << config.model << ": " << fit.draws.chains << " chains x " << fit.draws.iterations
            << " draws in " << format_double(fit.wall_seconds) << " s; max R-hat " << format_double(max_rhat(fit))
            << ", divergences " << fit.draws.divergences() << '\n';
  for (const auto& rt : fit.thresholds.race_level) {
    std::cout << "  " << fit.thresholds.races[rt.race] << ": threshold " << format_double(rt.mean) << " ["
              << format_double(rt.lower) << ", " << format_double(rt.upper) << "]\n";
  }
  std::cout << "ppc rate RMSE " << format_double(outcome.ppc.rate_rmse) << ", hit-rate RMSE "
            << format_double(outcome.ppc.hit_rate_rmse) << '\n';
  for (const auto& path : outcome.written) std::cout << "wrote " << path << '\n';
  return outcome.exit_code;
}

int cmd_ppc(const ConfigOptions& opts, const std::string& draws_path) {
  const auto config = opts.build("");
  if (opts.print) {
    std::cout << config.to_text();
    return kExitOk;
  }
  config.validate();
  const auto draws = read_draws_csv(draws_path);
  PPCReport report;
  std::vector<std::string> races, locations;
  if (config.model == "frisk") {
    const auto data = load_frisk_data(config);
    if (draws.dimension != data.layout().dimension()) throw DataError("draws do not match the data's dimensions");
    report = ppc(draws, data);
    races = data.races;
    locations = data.locations;
  } else {
    const auto data = load_stop_data(config);
    if (draws.dimension != data.layout().dimension()) throw DataError("draws do not match the data's dimensions");
    report = ppc_stop(draws, data);
    races = data.races;
    locations = data.locations;
  }
  const auto dir = output_dir(config);
  {
    auto out = open_out(dir / "ppc.csv");
    write_ppc_csv(out, report, races, locations);
  }
  {
    auto out = open_out(dir / "ppc.json");
    out << ppc_summary_json(report) << '\n';
  }
  std::cout << "rate RMSE " << format_double(report.rate_rmse) << ", hit-rate RMSE "
            << format_double(report.hit_rate_rmse) << '\n';
  return kExitOk;
}

struct ScenarioOptions {
  std::size_t races = 3;
  std::size_t locations = 30;
  std::int64_t stops = 10000;
  std::uint64_t seed = 1;

  void attach(CLI::App* cmd, std::int64_t default_stops) {
    stops = default_stops;
    cmd->add_option("--races", races, "number of races")->capture_default_str()->check(CLI::Range(2, 26));
    cmd->add_option("--locations", locations, "number of locations")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--stops", stops, "stops per cell (frisk) or per location (stop)")->capture_default_str();
    cmd->add_option("--seed", seed, "data seed")->capture_default_str();
  }
};

int cmd_synth(const ScenarioOptions& sc, const std::string& model, const std::string& format, double sigma,
              const std::string& out_path, const std::string& census_path, const std::string& truth_path) {
  if (sc.stops < 0) throw DataError("--stops must be non-negative");
  auto out = open_out(out_path);
  std::vector<std::string> races, locations;
  std::vector<double> truth;
  if (model == "frisk") {
    auto spec = frisk_scenario(sc.races, sc.locations, sc.stops, sc.seed);
    spec.heterogeneity_sigma = sigma;
    if (format == "raw") {
      write_raw_csv(out, generate_records(spec));
    } else {
      write_frisk_csv(out, generate(spec));
    }
    races = spec.races;
    locations = spec.locations;
    truth = spec.params.logit_threshold;
  } else {
    if (census_path.empty()) throw DataError("synth --model stop needs --census");
    if (format == "raw") throw DataError("the stop model has aggregated data only");
    const auto spec = stop_scenario(sc.races, sc.locations, sc.stops, sc.seed);
    const auto data = generate_stop(spec);
    write_stop_csv(out, data);
    auto census = open_out(census_path);
    write_census_csv(census, data);
    races = spec.races;
    locations = spec.locations;
    truth = spec.params.logit_threshold;
  }
  if (!truth_path.empty()) {
    auto t = open_out(truth_path);
    write_csv_row(t, {"race", "precinct", "threshold"});
    for (std::size_t r = 0; r < races.size(); ++r) {
      for (std::size_t d = 0; d < locations.size(); ++d) {
        write_csv_row(t, {races[r], locations[d], format_double(inv_logit(truth[r * locations.size() + d]))});
      }
    }
  }
  return kExitOk;
}

int cmd_approx_sweep(const std::string& grid_path, const std::string& out_path, std::size_t threads) {
  const auto grid = grid_path.empty() ? ApproxGrid{} : load_approx_grid(grid_path);
  const auto results = approx_sweep(grid.targets(), {}, threads);
  std::ofstream file;
  if (!out_path.empty()) file = open_out(out_path);
  std::ostream& out = out_path.empty() ? std::cout : file;
  write_csv_row(out, {"kind", "param1", "param2", "fitted_phi", "fitted_delta", "tv_distance", "evaluations",
                      "converged"});
  for (const auto& r : results) {
    double a = 0.0, b = 0.0;
    if (const auto* beta = std::get_if<BetaDist>(&r.target)) {
      a = beta->phi;
      b = beta->lambda;
    } else if (const auto* ln = std::get_if<LogitNormalDist>(&r.target)) {
      a = ln->mu;
      b = ln->sigma;
    }
    write_csv_row(out, {describe_kind(r.target), format_double(a), format_double(b), format_double(r.fitted.phi()),
                        format_double(r.fitted.delta()), format_double(r.tv_distance),
                        std::to_string(r.optimizer_evals), r.converged ? "true" : "false"});
  }
  return kExitOk;
}

int cmd_dist_table(double phi, double delta, std::size_t points, const std::string& out_path) {
  const DiscParams p(phi, delta);
  std::ofstream file;
  if (!out_path.empty()) file = open_out(out_path);
  std::ostream& out = out_path.empty() ? std::cout : file;
  write_csv_row(out, {"t", "signal", "pdf", "ccdf", "conditional_mean"});
  for (std::size_t i = 1; i <= points; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(points + 1);
    write_csv_row(out, {format_double(t), format_double(g_inv(t, p)), format_double(pdf(t, p)),
                        format_double(ccdf(t, p)), format_double(conditional_mean(t, p))});
  }
  return kExitOk;
}

int cmd_heterogeneity(const ConfigOptions& opts, const ScenarioOptions& sc, const std::string& sigmas_text) {
  const auto config = opts.build("frisk");
  if (opts.print) {
    std::cout << config.to_text();
    return kExitOk;
  }
  const auto sigmas = sigmas_text.empty() ? default_sigma_grid() : parse_list(sigmas_text);
  WorkerBudget budget(worker_count(config));
  const auto base = frisk_scenario(sc.races, sc.locations, sc.stops, sc.seed);
  const auto sweep = heterogeneity_sweep(base, sigmas, sweep_config(config, budget));

  const auto dir = output_dir(config);
  std::vector<const ThresholdTable*> tables;
  double worst = 1.0;
  auto csv = open_out(dir / "heterogeneity.csv");
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    write_race_rows(csv, "sigma", format_double(sweep[i].sigma), sweep[i].fit, i == 0);
    points.push_back({{"sigma", sweep[i].sigma}, {"max_rhat", max_rhat(sweep[i].fit)}, {"races", race_json(sweep[i].fit)}});
    tables.push_back(&sweep[i].fit.thresholds);
    worst = std::max(worst, max_rhat(sweep[i].fit));
  }
  const bool monotone = thresholds_nonincreasing(tables);
  const bool gaps = gaps_preserved(tables, 0);
  write_json(dir / "heterogeneity.json", {{"data_seed", sc.seed},
                                          {"sampler_seed", config.sampler.seed},
                                          {"points", points},
                                          {"nonincreasing", monotone},
                                          {"gap_preserved", gaps}});
  std::cout << "thresholds non-increasing in sigma: " << (monotone ? "yes" : "no")
            << "; gap to " << base.races[0] << " preserved: " << (gaps ? "yes" : "no") << '\n';
  return quality_exit(config, worst);
}

int cmd_placebo(const ConfigOptions& opts, const std::string& column) {
  auto config = opts.build("");
  if (opts.print) {
    std::cout << config.to_text();
    return kExitOk;
  }
  if (config.model == "stop") {
    config.validate();
    placebo(load_stop_data(config), column);
  }
  if (config.input_format != "raw") throw DataError("placebo needs raw per-stop input (input_format = raw)");
  config.validate();
  auto records = read_raw_csv(config.input, config.columns);
  for (const auto& [col, value] : config.filters) records = filter_records(records, col, value);
  WorkerBudget budget(worker_count(config));
  FitResult fit;
  try {
    fit = placebo(records, column, sweep_config(config, budget));
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  const auto dir = output_dir(config);
  {
    auto csv = open_out(dir / "placebo.csv");
    write_race_rows(csv, "column", column, fit, true);
  }
  const bool overlap = all_intervals_overlap(fit.thresholds);
  write_json(dir / "placebo.json", {{"column", column},
                                    {"seed", config.sampler.seed},
                                    {"max_rhat", max_rhat(fit)},
                                    {"levels", race_json(fit)},
                                    {"all_intervals_overlap", overlap}});
  std::cout << "placebo '" << column << "': " << fit.thresholds.races.size() << " levels, intervals "
            << (overlap ? "all overlap" : "do not all overlap") << '\n';
  return quality_exit(config, max_rhat(fit));
}

int cmd_disaggregate(const ConfigOptions& opts, const std::string& column, const std::vector<std::string>& levels) {
  auto config = opts.build("frisk");
  if (opts.print) {
    std::cout << config.to_text();
    return kExitOk;
  }
  if (config.input_format != "raw") throw DataError("disaggregate needs raw per-stop input (input_format = raw)");
  config.validate();
  auto records = read_raw_csv(config.input, config.columns);
  for (const auto& [col, value] : config.filters) records = filter_records(records, col, value);
  WorkerBudget budget(worker_count(config));
  std::vector<LevelFit> fits;
  try {
    fits = subset_disaggregate(records, column, sweep_config(config, budget), levels);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  const auto dir = output_dir(config);
  auto csv = open_out(dir / "disaggregate.csv");
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  double worst = 1.0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    write_race_rows(csv, column, fits[i].level, fits[i].fit, i == 0);
    summary.push_back({{"level", fits[i].level},
                       {"records", fits[i].records},
                       {"max_rhat", max_rhat(fits[i].fit)},
                       {"races", race_json(fits[i].fit)}});
    worst = std::max(worst, max_rhat(fits[i].fit));
  }
  write_json(dir / "disaggregate.json", {{"column", column}, {"seed", config.sampler.seed}, {"levels", summary}});
  std::cout << "fitted " << fits.size() << " levels of '" << column << "'\n";
  return quality_exit(config, worst);
}

int cmd_census_sweep(const ConfigOptions& opts, const std::string& race_label, const std::string& factors_text) {
  const auto config = opts.build("stop");
  if (opts.print) {
    std::cout << config.to_text();
    return kExitOk;
  }
  config.validate();
  const auto data = load_stop_data(config);
  const auto it = std::find(data.races.begin(), data.races.end(), race_label);
  if (it == data.races.end()) throw DataError("census-sweep: race '" + race_label + "' not in the data");
  const auto race = static_cast<std::size_t>(it - data.races.begin());
  const auto factors = parse_list(factors_text);
  WorkerBudget budget(worker_count(config));
  const auto sweep = census_sweep(data, race, factors, sweep_config(config, budget));

  const auto dir = output_dir(config);
  auto csv = open_out(dir / "census_sweep.csv");
  std::vector<const ThresholdTable*> tables;
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  double worst = 1.0, lo = 1.0, hi = 0.0;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    write_race_rows(csv, "factor", format_double(sweep[i].factor), sweep[i].fit, i == 0);
    points.push_back({{"factor", sweep[i].factor}, {"max_rhat", max_rhat(sweep[i].fit)}, {"races", race_json(sweep[i].fit)}});
    tables.push_back(&sweep[i].fit.thresholds);
    worst = std::max(worst, max_rhat(sweep[i].fit));
    const double m = sweep[i].fit.thresholds.race_level[race].mean;
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  const bool ordered = ordering_preserved(tables);
  write_json(dir / "census_sweep.json", {{"race", race_label},
                                         {"seed", config.sampler.seed},
                                         {"points", points},
                                         {"ordering_preserved", ordered},
                                         {"race_threshold_range", {lo, hi}},
                                         {"reference_white_range_real_data", {0.057, 0.061}}});
  std::cout << race_label << " threshold ranges over [" << format_double(lo) << ", " << format_double(hi)
            << "]; race ordering preserved: " << (ordered ? "yes" : "no") << '\n';
  return quality_exit(config, worst);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian threshold tests for discrimination with discriminant distributions"};
  app.require_subcommand(1);

  ConfigOptions fit_frisk_opts, fit_stop_opts, ppc_opts, het_opts, placebo_opts, dis_opts, census_opts;

  auto* fit_frisk = app.add_subcommand("fit-frisk", "fit the frisk-decision model and write reports");
  fit_frisk_opts.attach(fit_frisk);
  auto* fit_stop = app.add_subcommand("fit-stop", "fit the stop-decision model and write reports");
  fit_stop_opts.attach(fit_stop);

  std::string draws_path;
  auto* ppc_cmd = app.add_subcommand("ppc", "posterior predictive check from a saved draws.csv");
  ppc_opts.attach(ppc_cmd);
  ppc_cmd->add_option("--draws", draws_path, "draws.csv written by a fit with write_draws = true")
      ->required()
      ->check(CLI::ExistingFile);

  std::string grid_path, approx_out;
  std::size_t approx_threads = 0;
  auto* approx = app.add_subcommand("approx-sweep", "fit discriminant approximations over a target grid");
  approx->add_option("--grid", grid_path, "grid file (logit_normal.mu, logit_normal.sigma, beta.phi, beta.lambda)")
      ->check(CLI::ExistingFile);
  approx->add_option("-o,--out", approx_out, "output CSV (default stdout)");
  approx->add_option("--threads", approx_threads, "worker threads, 0 = hardware");

  ScenarioOptions synth_sc;
  std::string synth_model = "frisk", synth_format = "aggregated", synth_out, synth_census, synth_truth;
  double synth_sigma = 0.0;
  auto* synth = app.add_subcommand("synth", "write the synthetic reference scenario as CSV");
  synth_sc.attach(synth, 10000);
  synth->add_option("--model", synth_model, "frisk or stop")->check(CLI::IsMember({"frisk", "stop"}))->capture_default_str();
  synth->add_option("--format", synth_format, "aggregated or raw (frisk only)")
      ->check(CLI::IsMember({"aggregated", "raw"}))
      ->capture_default_str();
  synth->add_option("--sigma", synth_sigma, "stop-level threshold noise (frisk only)")->check(CLI::NonNegativeNumber);
  synth->add_option("-o,--out", synth_out, "output CSV")->required();
  synth->add_option("--census", synth_census, "census CSV output (stop model)");
  synth->add_option("--truth", synth_truth, "write generating thresholds to this CSV");

  ScenarioOptions het_sc;
  std::string sigmas_text;
  auto* het = app.add_subcommand("heterogeneity", "refit the frisk scenario under stop-level threshold noise");
  het_opts.attach(het);
  het_sc.attach(het, 10000);
  het->add_option("--sigmas", sigmas_text, "comma-separated noise levels (default 0,0.25,0.5,0.75,1)");

  std::string placebo_column;
  auto* placebo_cmd = app.add_subcommand("placebo", "fit with race replaced by another column");
  placebo_opts.attach(placebo_cmd);
  placebo_cmd->add_option("--column", placebo_column, "column standing in for race")->required();

  std::string dis_column;
  std::vector<std::string> dis_levels;
  auto* dis = app.add_subcommand("disaggregate", "independent fits per level of a column");
  dis_opts.attach(dis);
  dis->add_option("--column", dis_column, "column to split on")->required();
  dis->add_option("--levels", dis_levels, "levels to fit (default all observed)");

  std::string census_race = "white", factors_text = "0.5,1,2";
  auto* census = app.add_subcommand("census-sweep", "refit the stop model with one race's census share rescaled");
  census_opts.attach(census);
  census->add_option("--race", census_race, "race whose share is rescaled")->capture_default_str();
  census->add_option("--factors", factors_text, "comma-separated factors")->capture_default_str();

  double table_phi = 0.3, table_delta = 1.5;
  std::size_t table_points = 99;
  std::string table_out;
  auto* table = app.add_subcommand("dist-table", "tabulate pdf, ccdf and conditional mean of disc(phi, delta)");
  table->add_option("--phi", table_phi)->capture_default_str();
  table->add_option("--delta", table_delta)->capture_default_str();
  table->add_option("--points", table_points, "interior grid points")->capture_default_str()->check(CLI::PositiveNumber);
  table->add_option("-o,--out", table_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitDataError;
  }

  try {
    if (*fit_frisk) return cmd_fit(fit_frisk_opts, "frisk");
    if (*fit_stop) return cmd_fit(fit_stop_opts, "stop");
    if (*ppc_cmd) return cmd_ppc(ppc_opts, draws_path);
    if (*approx) return cmd_approx_sweep(grid_path, approx_out, approx_threads);
    if (*synth) {
      return cmd_synth(synth_sc, synth_model, synth_format, synth_sigma, synth_out, synth_census, synth_truth);
    }
    if (*het) return cmd_heterogeneity(het_opts, het_sc, sigmas_text);
    if (*placebo_cmd) return cmd_placebo(placebo_opts, placebo_column);
    if (*dis) return cmd_disaggregate(dis_opts, dis_column, dis_levels);
    if (*census) return cmd_census_sweep(census_opts, census_race, factors_text);
    if (*table) return cmd_dist_table(table_phi, table_delta, table_points, table_out);
  } catch (const IdentifiabilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitOk;
}
