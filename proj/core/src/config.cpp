#include "threshold/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

namespace threshold {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw DataError("config: " + key + " expects a number, got '" + value + "'");
  }
  return v;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw DataError("config: " + key + " expects true/false, got '" + value + "'");
}

template <class Fn>
void for_each_entry(std::istream& in, Fn&& fn) {
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(n) + ": expected key = value");
    fn(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
  if (out.empty()) throw DataError("config: " + key + " is empty");
  return out;
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key.rfind("column.", 0) == 0 && key.size() > 7) {
    columns[key.substr(7)] = value;
  } else if (key.rfind("filter.", 0) == 0 && key.size() > 7) {
    filters[key.substr(7)] = value;
  } else if (key == "model") {
    model = value;
  } else if (key == "input") {
    input = value;
  } else if (key == "input_format") {
    input_format = value;
  } else if (key == "census") {
    census = value;
  } else if (key == "output_dir") {
    output_dir = value;
  } else if (key == "group_column") {
    group_column = value;
  } else if (key == "write_draws") {
    write_draws = parse_flag(key, value);
  } else if (key == "strict") {
    strict = parse_flag(key, value);
  } else if (key == "workers") {
    workers = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    sampler.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "chains") {
    sampler.chains = parse_number<std::size_t>(key, value);
  } else if (key == "warmup") {
    sampler.warmup_iters = parse_number<std::size_t>(key, value);
  } else if (key == "samples") {
    sampler.sampling_iters = parse_number<std::size_t>(key, value);
  } else if (key == "target_accept") {
    sampler.target_accept = parse_number<double>(key, value);
  } else if (key == "max_tree_depth") {
    sampler.max_tree_depth = parse_number<std::size_t>(key, value);
  } else if (key == "init_radius") {
    sampler.init_radius = parse_number<double>(key, value);
  } else if (key == "prior.phi_race_scale") {
    priors.phi_race_scale = parse_number<double>(key, value);
  } else if (key == "prior.lambda_race_scale") {
    priors.lambda_race_scale = parse_number<double>(key, value);
  } else if (key == "prior.threshold_mean_center") {
    priors.threshold_mean_center = parse_number<double>(key, value);
  } else if (key == "prior.threshold_mean_scale") {
    priors.threshold_mean_scale = parse_number<double>(key, value);
  } else if (key == "prior.threshold_scale") {
    priors.threshold_scale = parse_number<double>(key, value);
  } else if (key == "prior.location_phi_scale") {
    priors.location_phi_scale = parse_number<double>(key, value);
  } else if (key == "prior.location_lambda_scale") {
    priors.location_lambda_scale = parse_number<double>(key, value);
  } else {
    throw DataError("config: unknown key '" + key + "'");
  }
}

std::map<std::string, std::string> RunConfig::entries() const {
  std::map<std::string, std::string> e = {
      {"model", model},
      {"input", input},
      {"input_format", input_format},
      {"census", census},
      {"output_dir", output_dir},
      {"group_column", group_column},
      {"write_draws", write_draws ? "true" : "false"},
      {"strict", strict ? "true" : "false"},
      {"workers", std::to_string(workers)},
      {"seed", std::to_string(sampler.seed)},
      {"chains", std::to_string(sampler.chains)},
      {"warmup", std::to_string(sampler.warmup_iters)},
      {"samples", std::to_string(sampler.sampling_iters)},
      {"target_accept", format_double(sampler.target_accept)},
      {"max_tree_depth", std::to_string(sampler.max_tree_depth)},
      {"init_radius", format_double(sampler.init_radius)},
      {"prior.phi_race_scale", format_double(priors.phi_race_scale)},
      {"prior.lambda_race_scale", format_double(priors.lambda_race_scale)},
      {"prior.threshold_mean_center", format_double(priors.threshold_mean_center)},
      {"prior.threshold_mean_scale", format_double(priors.threshold_mean_scale)},
      {"prior.threshold_scale", format_double(priors.threshold_scale)},
      {"prior.location_phi_scale", format_double(priors.location_phi_scale)},
      {"prior.location_lambda_scale", format_double(priors.location_lambda_scale)},
  };
  for (const auto& [k, v] : columns) e["column." + k] = v;
  for (const auto& [k, v] : filters) e["filter." + k] = v;
  return e;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries()) out << k << " = " << v << '\n';
  return out.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a(to_text()); }

void RunConfig::validate(bool check_files) const {
  if (model != "frisk" && model != "stop") throw DataError("config: model must be 'frisk' or 'stop'");
  if (input_format != "aggregated" && input_format != "raw") {
    throw DataError("config: input_format must be 'aggregated' or 'raw'");
  }
  if (model == "stop" && input_format == "raw") throw DataError("config: the stop model reads aggregated input only");
  if (input.empty()) throw DataError("config: input is required");
  if (model == "stop" && census.empty()) throw DataError("config: the stop model requires a census file");
  if (!filters.empty() && input_format != "raw") throw DataError("config: filters apply to raw input only");
  try {
    priors.validate();
    sampler.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (check_files) {
    if (!std::filesystem::exists(input)) throw DataError("config: input file not found: " + input);
    if (model == "stop" && !std::filesystem::exists(census)) {
      throw DataError("config: census file not found: " + census);
    }
  }
}

RunConfig parse_config(std::istream& in) {
  RunConfig config;
  for_each_entry(in, [&](const std::string& key, const std::string& value) { config.set(key, value); });
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  return parse_config(in);
}

}  // namespace threshold

namespace threshold {

ApproxGrid parse_approx_grid(std::istream& in) {
  ApproxGrid grid;
  for_each_entry(in, [&](const std::string& key, const std::string& value) {
    if (key == "logit_normal.mu") {
      grid.logit_normal_mu = parse_list(key, value);
    } else if (key == "logit_normal.sigma") {
      grid.logit_normal_sigma = parse_list(key, value);
    } else if (key == "beta.phi") {
      grid.beta_phi = parse_list(key, value);
    } else if (key == "beta.lambda") {
      grid.beta_lambda = parse_list(key, value);
    } else {
      throw DataError("grid: unknown key '" + key + "'");
    }
  });
  return grid;
}

ApproxGrid load_approx_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid " + path);
  return parse_approx_grid(in);
}

}  // namespace threshold
