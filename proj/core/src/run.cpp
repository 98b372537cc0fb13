#include "threshold/run.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "threshold/log.hpp"
#include "threshold/parallel.hpp"

namespace threshold {

namespace fs = std::filesystem;

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

template <class Writer>
std::string write_file(const fs::path& dir, const std::string& name, Writer&& writer) {
  const auto path = dir / name;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  writer(out);
  if (!out) throw DataError("write failed: " + path.string());
  return path.string();
}

}  // namespace

FriskData load_frisk_data(const RunConfig& config) {
  if (config.input_format == "aggregated") {
    if (config.group_column != "race") throw DataError("config: group_column needs raw input");
    return read_frisk_csv(config.input, config.columns);
  }
  auto records = read_raw_csv(config.input, config.columns);
  for (const auto& [column, value] : config.filters) records = filter_records(records, column, value);
  if (records.empty()) throw DataError("no records left after filtering");
  try {
    return aggregate(records, config.group_column);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

StopData load_stop_data(const RunConfig& config) { return read_stop_csv(config.input, config.census, config.columns); }

RunOutcome run(const RunConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  WorkerBudget budget(config.workers > 0 ? config.workers : WorkerBudget::global().slots());

  RunOutcome outcome;
  std::vector<std::string> races, locations;
  if (config.model == "frisk") {
    const auto data = load_frisk_data(config);
    outcome.fit = fit_frisk(data, config.priors, config.sampler, &budget);
    outcome.ppc = ppc(outcome.fit.draws, data);
    races = data.races;
    locations = data.locations;
  } else {
    const auto data = load_stop_data(config);
    outcome.fit = fit_stop(data, config.priors, config.sampler, &budget);
    outcome.ppc = ppc_stop(outcome.fit.draws, data);
    races = data.races;
    locations = data.locations;
  }
  const auto& fit = outcome.fit;
  const double divergence_rate =
      static_cast<double>(fit.draws.divergences()) / static_cast<double>(std::max<std::size_t>(fit.draws.total_draws(), 1));
  outcome.divergence_flag = divergence_rate > 0.01;
  if (outcome.divergence_flag) {
    log_warning("divergent transitions in " + format_double(100.0 * divergence_rate) + "% of post-warmup draws");
  }
  const double max_rhat = fit.diagnostics ? fit.diagnostics->max_rhat : 1.0;
  if (config.strict && max_rhat > 1.1) outcome.exit_code = kExitQualityFailure;

  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());

  auto& w = outcome.written;
  w.push_back(write_file(dir, "thresholds.csv", [&](std::ostream& o) { write_thresholds_csv(o, fit.thresholds); }));
  w.push_back(
      write_file(dir, "race_thresholds.csv", [&](std::ostream& o) { write_race_thresholds_csv(o, fit.thresholds); }));
  if (fit.diagnostics) {
    w.push_back(write_file(dir, "diagnostics.json", [&](std::ostream& o) { o << diagnostics_json(*fit.diagnostics) << '\n'; }));
  }
  w.push_back(write_file(dir, "ppc.csv", [&](std::ostream& o) { write_ppc_csv(o, outcome.ppc, races, locations); }));
  w.push_back(write_file(dir, "ppc.json", [&](std::ostream& o) { o << ppc_summary_json(outcome.ppc) << '\n'; }));
  if (config.write_draws) {
    w.push_back(write_file(dir, "draws.csv", [&](std::ostream& o) { write_draws_csv(o, fit.draws); }));
  }

  nlohmann::ordered_json manifest;
  manifest["model"] = config.model;
  manifest["seed"] = config.sampler.seed;
  manifest["config_hash"] = hex(config.hash());
  manifest["config"] = config.entries();
  manifest["started_utc"] = utc_now();
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest["fit_wall_seconds"] = fit.wall_seconds;
  manifest["divergences"] = fit.draws.divergences();
  manifest["divergence_rate"] = divergence_rate;
  manifest["divergence_flag"] = outcome.divergence_flag;
  manifest["max_rhat"] = max_rhat;
  manifest["exit_code"] = outcome.exit_code;
  manifest["artifacts"] = w;
  w.push_back(write_file(dir, "manifest.json", [&](std::ostream& o) { o << manifest.dump(2) << '\n'; }));
  return outcome;
}

}  // namespace threshold
