#pragma once

// Flat "key = value" run configuration. Lines starting with '#' are
// comments. Recognised keys are listed by RunConfig::entries(); column.<name>
// remaps an input column and filter.<column> keeps only raw records whose
// column equals the value.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "threshold/approximation.hpp"
#include "threshold/io.hpp"
#include "threshold/model.hpp"
#include "threshold/sampler.hpp"

namespace threshold {

struct RunConfig {
  std::string model = "frisk";              // frisk | stop
  std::string input;                        // CSV path
  std::string input_format = "aggregated";  // aggregated | raw (frisk model only)
  std::string census;                       // census CSV, stop model only
  std::string output_dir = "threshold-out";
  std::string group_column = "race";
  bool write_draws = false;
  bool strict = false;     // exit code 2 when any R-hat exceeds 1.1
  std::size_t workers = 0;  // 0: hardware concurrency
  PriorConfig priors;
  SamplerConfig sampler;
  ColumnMap columns;
  std::map<std::string, std::string> filters;

  /// Throws DataError on an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  /// Every setting in canonical key order.
  std::map<std::string, std::string> entries() const;
  std::string to_text() const;
  /// FNV-1a 64 of to_text().
  std::uint64_t hash() const;
  /// Throws DataError on invalid values or, with check_files, missing inputs.
  void validate(bool check_files = true) const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

std::uint64_t fnv1a(const std::string& text);

/// Approximation grid in the same key = value format with comma-separated
/// lists under logit_normal.mu, logit_normal.sigma, beta.phi and beta.lambda.
/// Keys not given keep the ApproxGrid defaults.
ApproxGrid parse_approx_grid(std::istream& in);
ApproxGrid load_approx_grid(const std::string& path);

}  // namespace threshold
