#include "threshold/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include <json.hpp>

namespace threshold {

namespace {

std::vector<std::string> parse_record(std::istream& in, bool& ok) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  ok = any;
  if (any) fields.push_back(std::move(field));
  return fields;
}

bool blank(const std::vector<std::string>& row) { return row.size() == 1 && row[0].empty(); }

std::string mapped(const ColumnMap& columns, const std::string& name) {
  const auto it = columns.find(name);
  return it == columns.end() ? name : it->second;
}

std::int64_t parse_count(const std::string& s, const std::string& what, std::size_t line) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 0) {
    throw DataError("line " + std::to_string(line) + ": " + what + " is not a non-negative integer: '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& s, const std::string& what, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line) + ": " + what + " is not a number: '" + s + "'");
  }
  return v;
}

bool parse_bool(std::string s, const std::string& what, std::size_t line) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "y" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "n" || s == "no" || s.empty()) return false;
  throw DataError("line " + std::to_string(line) + ": " + what + " is not a boolean: '" + s + "'");
}

std::size_t intern(std::unordered_map<std::string, std::size_t>& index, std::vector<std::string>& labels,
                   const std::string& value) {
  const auto [it, inserted] = index.emplace(value, labels.size());
  if (inserted) labels.push_back(value);
  return it->second;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  bool ok = false;
  t.header = parse_record(in, ok);
  if (!ok) throw DataError("csv: empty input");
  if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
  for (;;) {
    auto row = parse_record(in, ok);
    if (!ok) break;
    if (blank(row)) continue;
    if (row.size() != t.header.size()) {
      throw DataError("csv: row " + std::to_string(t.rows.size() + 2) + " has " + std::to_string(row.size()) +
                      " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  auto in = open(path);
  try {
    return read_csv(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n\r") == std::string::npos) {
      out << f;
    } else {
      out << '"';
      for (char c : f) out << (c == '"' ? "\"\"" : std::string(1, c));
      out << '"';
    }
  }
  out << '\n';
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

FriskData read_frisk_csv(const std::string& path, const ColumnMap& columns) {
  const auto t = read_csv_file(path);
  const auto race = t.column(mapped(columns, "race"));
  const auto precinct = t.column(mapped(columns, "precinct"));
  const auto stops = t.column(mapped(columns, "stops"));
  const auto frisks = t.column(mapped(columns, "frisks"));
  const auto hits = t.column(mapped(columns, "hits"));

  FriskData data;
  std::unordered_map<std::string, std::size_t> race_index, location_index;
  struct Row {
    std::size_t r, d;
    std::int64_t stops, searches, hits;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = i + 2;
    if (row[race].empty() || row[precinct].empty()) throw DataError(path + ": line " + std::to_string(line) + ": empty category");
    rows.push_back({intern(race_index, data.races, row[race]), intern(location_index, data.locations, row[precinct]),
                    parse_count(row[stops], "stops", line), parse_count(row[frisks], "frisks", line),
                    parse_count(row[hits], "hits", line)});
  }
  const std::size_t D = data.locations.size();
  data.cells.resize(data.races.size() * D);
  std::vector<bool> seen(data.cells.size(), false);
  for (std::size_t i = 0; i < data.cells.size(); ++i) {
    data.cells[i].race = i / D;
    data.cells[i].location = i % D;
  }
  for (const auto& row : rows) {
    const std::size_t k = row.r * D + row.d;
    if (seen[k]) throw DataError(path + ": duplicate row for " + data.races[row.r] + "/" + data.locations[row.d]);
    seen[k] = true;
    data.cells[k].stops = row.stops;
    data.cells[k].searches = row.searches;
    data.cells[k].hits = row.hits;
  }
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
  return data;
}

void write_frisk_csv(std::ostream& out, const FriskData& data) {
  write_csv_row(out, {"race", "precinct", "stops", "frisks", "hits"});
  for (const auto& c : data.cells) {
    write_csv_row(out, {data.races[c.race], data.locations[c.location], std::to_string(c.stops),
                        std::to_string(c.searches), std::to_string(c.hits)});
  }
}

std::vector<RawStopRecord> read_raw_csv(const std::string& path, const ColumnMap& columns) {
  const auto t = read_csv_file(path);
  const auto race = t.column(mapped(columns, "race"));
  const auto precinct = t.column(mapped(columns, "precinct"));
  const auto frisked = t.column(mapped(columns, "frisked"));
  const auto weapon = t.column(mapped(columns, "weapon_found"));
  // file column -> canonical attribute name
  std::map<std::string, std::string> reverse;
  for (const auto& [canonical, file] : columns) reverse[file] = canonical;
  std::vector<std::pair<std::size_t, std::string>> extra;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (j == race || j == precinct || j == frisked || j == weapon) continue;
    const auto it = reverse.find(t.header[j]);
    extra.emplace_back(j, it == reverse.end() ? t.header[j] : it->second);
  }
  std::vector<RawStopRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = i + 2;
    RawStopRecord rec;
    rec.race = row[race];
    rec.precinct = row[precinct];
    rec.frisked = parse_bool(row[frisked], "frisked", line);
    rec.weapon_found = parse_bool(row[weapon], "weapon_found", line);
    if (rec.race.empty() || rec.precinct.empty()) throw DataError(path + ": line " + std::to_string(line) + ": empty category");
    if (rec.weapon_found && !rec.frisked) {
      throw DataError(path + ": line " + std::to_string(line) + ": weapon found without a frisk");
    }
    for (const auto& [j, name] : extra) rec.attributes[name] = row[j];
    out.push_back(std::move(rec));
  }
  return out;
}

void write_raw_csv(std::ostream& out, const std::vector<RawStopRecord>& records) {
  std::set<std::string> names;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.attributes) names.insert(k);
  }
  std::vector<std::string> header = {"race", "precinct", "frisked", "weapon_found"};
  header.insert(header.end(), names.begin(), names.end());
  write_csv_row(out, header);
  for (const auto& r : records) {
    std::vector<std::string> row = {r.race, r.precinct, r.frisked ? "1" : "0", r.weapon_found ? "1" : "0"};
    for (const auto& n : names) {
      const auto it = r.attributes.find(n);
      row.push_back(it == r.attributes.end() ? "" : it->second);
    }
    write_csv_row(out, row);
  }
}

StopData read_stop_csv(const std::string& stops_path, const std::string& census_path, const ColumnMap& columns) {
  const auto t = read_csv_file(stops_path);
  const auto race = t.column(mapped(columns, "race"));
  const auto precinct = t.column(mapped(columns, "precinct"));
  const auto stops = t.column(mapped(columns, "stops"));
  const auto hits = t.column(mapped(columns, "hits"));
  const auto c = read_csv_file(census_path);
  const auto c_precinct = c.column(mapped(columns, "precinct"));
  const auto c_race = c.column(mapped(columns, "race"));
  const auto c_fraction = c.column(mapped(columns, "fraction"));

  StopData data;
  std::unordered_map<std::string, std::size_t> race_index, location_index;
  struct Row {
    std::size_t r, d;
    std::int64_t stops, hits;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = i + 2;
    rows.push_back({intern(race_index, data.races, row[race]), intern(location_index, data.locations, row[precinct]),
                    parse_count(row[stops], "stops", line), parse_count(row[hits], "hits", line)});
  }
  const std::size_t R = data.races.size();
  data.precincts.resize(data.locations.size());
  for (std::size_t d = 0; d < data.locations.size(); ++d) {
    auto& p = data.precincts[d];
    p.location = d;
    p.stops.assign(R, 0);
    p.hits.assign(R, 0);
    p.census.assign(R, 0.0);
  }
  for (const auto& row : rows) {
    data.precincts[row.d].stops[row.r] += row.stops;
    data.precincts[row.d].hits[row.r] += row.hits;
  }
  std::vector<bool> has_census(data.locations.size(), false);
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    const auto& row = c.rows[i];
    const auto d = location_index.find(row[c_precinct]);
    const auto r = race_index.find(row[c_race]);
    if (d == location_index.end() || r == race_index.end()) continue;  // no stops there; irrelevant
    data.precincts[d->second].census[r->second] = parse_real(row[c_fraction], "fraction", i + 2);
    has_census[d->second] = true;
  }
  for (std::size_t d = 0; d < data.locations.size(); ++d) {
    if (!has_census[d]) throw DataError(census_path + ": no census rows for precinct " + data.locations[d]);
  }
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(stops_path + ": " + e.what());
  }
  return data;
}

void write_stop_csv(std::ostream& out, const StopData& data) {
  write_csv_row(out, {"race", "precinct", "stops", "hits"});
  for (const auto& p : data.precincts) {
    for (std::size_t r = 0; r < data.races.size(); ++r) {
      write_csv_row(out, {data.races[r], data.locations[p.location], std::to_string(p.stops[r]),
                          std::to_string(p.hits[r])});
    }
  }
}

void write_census_csv(std::ostream& out, const StopData& data) {
  write_csv_row(out, {"precinct", "race", "fraction"});
  for (const auto& p : data.precincts) {
    for (std::size_t r = 0; r < data.races.size(); ++r) {
      write_csv_row(out, {data.locations[p.location], data.races[r], format_double(p.census[r])});
    }
  }
}

void write_thresholds_csv(std::ostream& out, const ThresholdTable& table) {
  write_csv_row(out, {"race", "precinct", "threshold_mean", "threshold_lower", "threshold_upper"});
  for (const auto& c : table.cells) {
    write_csv_row(out, {table.races[c.race], table.locations[c.location], format_double(c.mean),
                        format_double(c.lower), format_double(c.upper)});
  }
}

void write_race_thresholds_csv(std::ostream& out, const ThresholdTable& table) {
  write_csv_row(out, {"race", "threshold_mean", "threshold_lower", "threshold_upper"});
  for (const auto& r : table.race_level) {
    write_csv_row(out, {table.races[r.race], format_double(r.mean), format_double(r.lower), format_double(r.upper)});
  }
}

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws) {
  std::vector<std::string> header = {"chain", "iteration", "leapfrog_steps", "divergent", "accept_stat"};
  for (std::size_t k = 0; k < draws.dimension; ++k) {
    header.push_back(k < draws.names.size() ? draws.names[k] : "q" + std::to_string(k));
  }
  write_csv_row(out, header);
  for (std::size_t c = 0; c < draws.chains; ++c) {
    for (std::size_t i = 0; i < draws.iterations; ++i) {
      const std::size_t row = c * draws.iterations + i;
      std::vector<std::string> fields = {std::to_string(c), std::to_string(i),
                                         std::to_string(draws.leapfrog_steps[row]),
                                         std::to_string(draws.divergent[row]), format_double(draws.accept_stat[row])};
      for (double v : draws.draw(c, i)) fields.push_back(format_double(v));
      write_csv_row(out, fields);
    }
  }
}

PosteriorDraws read_draws_csv(const std::string& path) {
  const auto t = read_csv_file(path);
  constexpr std::size_t kMeta = 5;
  if (t.header.size() <= kMeta || t.header[0] != "chain" || t.header[1] != "iteration") {
    throw DataError(path + ": not a draws file");
  }
  PosteriorDraws draws;
  draws.dimension = t.header.size() - kMeta;
  draws.names.assign(t.header.begin() + kMeta, t.header.end());
  std::size_t line = 2;
  std::vector<std::size_t> per_chain;
  for (const auto& row : t.rows) {
    const auto c = static_cast<std::size_t>(parse_count(row[0], "chain", line));
    const auto i = static_cast<std::size_t>(parse_count(row[1], "iteration", line));
    if (c == per_chain.size()) per_chain.push_back(0);
    if (c + 1 != per_chain.size() || i != per_chain[c]) throw DataError(path + ": draws must be chain-major and contiguous");
    ++per_chain[c];
    draws.leapfrog_steps.push_back(static_cast<std::uint32_t>(parse_count(row[2], "leapfrog_steps", line)));
    draws.divergent.push_back(parse_bool(row[3], "divergent", line) ? 1 : 0);
    draws.accept_stat.push_back(parse_real(row[4], "accept_stat", line));
    for (std::size_t k = kMeta; k < row.size(); ++k) draws.values.push_back(parse_real(row[k], t.header[k], line));
    ++line;
  }
  if (per_chain.empty()) throw DataError(path + ": no draws");
  if (std::adjacent_find(per_chain.begin(), per_chain.end(), std::not_equal_to<>()) != per_chain.end()) {
    throw DataError(path + ": chains have different lengths");
  }
  draws.chains = per_chain.size();
  draws.iterations = per_chain[0];
  draws.chain_stats.resize(draws.chains);
  return draws;
}

void write_ppc_csv(std::ostream& out, const PPCReport& report, const std::vector<std::string>& races,
                   const std::vector<std::string>& locations) {
  write_csv_row(out, {"race", "precinct", "stops", "observed_rate", "predicted_rate", "observed_hit_rate",
                      "predicted_hit_rate"});
  for (const auto& c : report.cells) {
    write_csv_row(out, {races[c.race], locations[c.location], std::to_string(c.stops), format_double(c.observed_rate),
                        format_double(c.predicted_rate),
                        std::isnan(c.observed_hit_rate) ? "" : format_double(c.observed_hit_rate),
                        format_double(c.predicted_hit_rate)});
  }
}

std::string diagnostics_json(const Diagnostics& d, int indent) {
  nlohmann::ordered_json j;
  j["chains"] = d.chains;
  j["total_draws"] = d.total_draws;
  j["leapfrog_steps"] = d.leapfrog_steps;
  j["sampling_seconds"] = d.sampling_seconds;
  j["warmup_seconds"] = d.warmup_seconds;
  j["max_chain_seconds"] = d.max_chain_seconds;
  j["divergences"] = d.divergences;
  j["divergence_rate"] = d.divergence_rate;
  j["min_ess"] = d.min_ess;
  j["mean_ess"] = d.mean_ess;
  j["max_rhat"] = d.max_rhat;
  j["cost"] = {{"seconds_per_neff", d.seconds_per_neff},
               {"samples_per_neff", d.samples_per_neff},
               {"steps_per_sample", d.steps_per_sample},
               {"seconds_per_step", d.seconds_per_step},
               {"identity_residual", d.identity_residual()}};
  auto& params = j["parameters"] = nlohmann::ordered_json::array();
  for (const auto& p : d.parameters) {
    params.push_back({{"name", p.name}, {"mean", p.mean}, {"sd", p.sd}, {"rhat", p.rhat}, {"ess", p.ess}});
  }
  return j.dump(indent);
}

std::string ppc_summary_json(const PPCReport& report, int indent) {
  nlohmann::ordered_json j;
  j["rate_rmse"] = report.rate_rmse;
  j["hit_rate_rmse"] = report.hit_rate_rmse;
  j["reference_rate_rmse"] = PPCReport::kReferenceRateRmse;
  j["reference_hit_rate_rmse"] = PPCReport::kReferenceHitRateRmse;
  j["cells"] = report.cells.size();
  return j.dump(indent);
}

}  // namespace threshold
