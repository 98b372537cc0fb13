#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "threshold/frisk_model.hpp"

namespace threshold {

/// One stop. Optional columns (year, hour, age, gender, suspected_crime, ...)
/// live in `attributes` keyed by their canonical name.
struct RawStopRecord {
  std::string race;
  std::string precinct;
  bool frisked = false;
  bool weapon_found = false;
  std::map<std::string, std::string> attributes;

  /// Value of "race", "precinct" or an attribute; nullopt when absent.
  std::optional<std::string> field(const std::string& column) const;
};

/// Group stops by (group_column, precinct). Labels keep first-appearance
/// order and every (group, precinct) pair gets a cell, so the result is the
/// full grid in r * D + d order.
/// Throws std::invalid_argument on a hit without a frisk, an empty category
/// or a record lacking group_column.
FriskData aggregate(const std::vector<RawStopRecord>& records, const std::string& group_column = "race");

/// Keep records whose `column` equals `value`.
std::vector<RawStopRecord> filter_records(const std::vector<RawStopRecord>& records, const std::string& column,
                                          const std::string& value);

}  // namespace threshold
