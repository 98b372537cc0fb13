#include "threshold/records.hpp"

#include <stdexcept>
#include <unordered_map>

namespace threshold {

std::optional<std::string> RawStopRecord::field(const std::string& column) const {
  if (column == "race") return race;
  if (column == "precinct") return precinct;
  const auto it = attributes.find(column);
  if (it == attributes.end()) return std::nullopt;
  return it->second;
}

namespace {

std::size_t intern(std::unordered_map<std::string, std::size_t>& index, std::vector<std::string>& labels,
                   const std::string& value) {
  const auto [it, inserted] = index.emplace(value, labels.size());
  if (inserted) labels.push_back(value);
  return it->second;
}

}  // namespace

FriskData aggregate(const std::vector<RawStopRecord>& records, const std::string& group_column) {
  FriskData out;
  std::unordered_map<std::string, std::size_t> group_index, location_index;
  struct Key {
    std::size_t group, location;
  };
  std::vector<Key> keys;
  keys.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.weapon_found && !rec.frisked) {
      throw std::invalid_argument("aggregate: record " + std::to_string(i) + " has a weapon found without a frisk");
    }
    const auto group = rec.field(group_column);
    if (!group) throw std::invalid_argument("aggregate: record " + std::to_string(i) + " lacks column " + group_column);
    if (group->empty() || rec.precinct.empty()) {
      throw std::invalid_argument("aggregate: record " + std::to_string(i) + " has an empty category");
    }
    keys.push_back({intern(group_index, out.races, *group), intern(location_index, out.locations, rec.precinct)});
  }

  const std::size_t D = out.locations.size();
  out.cells.resize(out.races.size() * D);
  for (std::size_t r = 0; r < out.races.size(); ++r) {
    for (std::size_t d = 0; d < D; ++d) {
      out.cells[r * D + d].race = r;
      out.cells[r * D + d].location = d;
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& c = out.cells[keys[i].group * D + keys[i].location];
    ++c.stops;
    c.searches += records[i].frisked ? 1 : 0;
    c.hits += records[i].weapon_found ? 1 : 0;
  }
  return out;
}

std::vector<RawStopRecord> filter_records(const std::vector<RawStopRecord>& records, const std::string& column,
                                          const std::string& value) {
  std::vector<RawStopRecord> out;
  for (const auto& r : records) {
    const auto v = r.field(column);
    if (v && *v == value) out.push_back(r);
  }
  return out;
}

}  // namespace threshold
