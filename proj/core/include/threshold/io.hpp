#pragma once

// CSV ingestion and report writers. CSV files are UTF-8, comma-delimited,
// with a header row; fields may be double-quoted with "" as an escaped quote.

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "threshold/diagnostics.hpp"
#include "threshold/inference.hpp"
#include "threshold/records.hpp"
#include "threshold/robustness.hpp"

namespace threshold {

/// Malformed input or configuration; maps to exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws DataError when missing.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Canonical column name -> name used in the file. Unmapped names are used as is.
using ColumnMap = std::map<std::string, std::string>;

/// Aggregated frisk table: race, precinct, stops, frisks, hits.
FriskData read_frisk_csv(const std::string& path, const ColumnMap& columns = {});
void write_frisk_csv(std::ostream& out, const FriskData& data);

/// Per-stop table: race, precinct, frisked, weapon_found and any further
/// columns, which become record attributes. Booleans accept 1/0, true/false,
/// y/n and yes/no.
std::vector<RawStopRecord> read_raw_csv(const std::string& path, const ColumnMap& columns = {});
void write_raw_csv(std::ostream& out, const std::vector<RawStopRecord>& records);

/// Aggregated stop table (race, precinct, stops, hits) joined with a census
/// table (precinct, race, fraction). Precincts missing from the census are a
/// DataError.
StopData read_stop_csv(const std::string& stops_path, const std::string& census_path, const ColumnMap& columns = {});
void write_stop_csv(std::ostream& out, const StopData& data);
void write_census_csv(std::ostream& out, const StopData& data);

void write_thresholds_csv(std::ostream& out, const ThresholdTable& table);
void write_race_thresholds_csv(std::ostream& out, const ThresholdTable& table);
void write_draws_csv(std::ostream& out, const PosteriorDraws& draws);
/// Inverse of write_draws_csv; per-chain timing statistics are not stored and come back empty.
PosteriorDraws read_draws_csv(const std::string& path);
void write_ppc_csv(std::ostream& out, const PPCReport& report, const std::vector<std::string>& races,
                   const std::vector<std::string>& locations);

/// Table-1 statistics, per-parameter R-hat / n_eff and divergences as JSON text.
std::string diagnostics_json(const Diagnostics& diagnostics, int indent = 2);
std::string ppc_summary_json(const PPCReport& report, int indent = 2);

/// Shortest round-trip representation of a double.
std::string format_double(double v);

}  // namespace threshold
