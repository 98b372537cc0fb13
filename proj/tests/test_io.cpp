#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "threshold/config.hpp"
#include "threshold/io.hpp"
#include "threshold/records.hpp"
#include "threshold/run.hpp"

using namespace threshold;
namespace fs = std::filesystem;

namespace {

const std::string kData = THRESHOLD_TEST_DATA;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("threshold-io-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& contents = "") const {
    const auto p = (path_ / name).string();
    if (!contents.empty()) std::ofstream(p, std::ios::binary) << contents;
    return p;
  }
  std::string path() const { return path_.string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RawStopRecord record(std::string race, std::string precinct, bool frisked, bool hit) {
  return {std::move(race), std::move(precinct), frisked, hit, {}};
}

RunConfig quick_run(const std::string& out) {
  std::istringstream in("input = " + kData + "/frisk_small.csv\noutput_dir = " + out +
                        "\nchains = 2\nwarmup = 500\nsamples = 500\nseed = 4\n");
  return parse_config(in);
}

}  // namespace

TEST(Csv, QuotesCrlfAndBom) {
  std::istringstream in("\xEF\xBB\xBFname,note\r\n\"a, b\",\"say \"\"hi\"\"\"\r\nc,\"two\nlines\"\r\n");
  const auto t = read_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"name", "note"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "a, b");
  EXPECT_EQ(t.rows[0][1], "say \"hi\"");
  EXPECT_EQ(t.rows[1][1], "two\nlines");
  EXPECT_EQ(t.column("note"), 1u);
  EXPECT_THROW(t.column("missing"), DataError);
}

TEST(Csv, RejectsMalformed) {
  std::istringstream unterminated("a,b\n\"x,y\n");
  EXPECT_THROW(read_csv(unterminated), DataError);
  std::istringstream ragged("a,b\n1,2,3\n");
  EXPECT_THROW(read_csv(ragged), DataError);
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), DataError);
}

TEST(Csv, WriterQuotesWhenNeeded) {
  std::ostringstream out;
  write_csv_row(out, {"plain", "a,b", "q\"t"});
  EXPECT_EQ(out.str(), "plain,\"a,b\",\"q\"\"t\"\n");
}

TEST(FriskCsv, RoundTrip) {
  const auto data = read_frisk_csv(kData + "/frisk_small.csv");
  EXPECT_EQ(data.races.size(), 3u);
  EXPECT_EQ(data.locations.size(), 4u);
  TempDir dir;
  std::ostringstream out;
  write_frisk_csv(out, data);
  EXPECT_EQ(read_frisk_csv(dir.file("f.csv", out.str())), data);
}

TEST(FriskCsv, ColumnMapAndErrors) {
  TempDir dir;
  const auto renamed = dir.file("r.csv", "group,pct,n,searched,found\na,p1,10,4,2\nb,p1,5,1,0\n");
  const auto data = read_frisk_csv(
      renamed, {{"race", "group"}, {"precinct", "pct"}, {"stops", "n"}, {"frisks", "searched"}, {"hits", "found"}});
  EXPECT_EQ(data.cells.size(), 2u);
  EXPECT_EQ(data.cells[0].searches, 4);
  EXPECT_THROW(read_frisk_csv(renamed), DataError);
  EXPECT_THROW(read_frisk_csv(dir.file("bad.csv", "race,precinct,stops,frisks,hits\na,p1,10,11,2\n")), DataError);
  EXPECT_THROW(read_frisk_csv(dir.file("neg.csv", "race,precinct,stops,frisks,hits\na,p1,-1,0,0\n")), DataError);
  EXPECT_THROW(read_frisk_csv(dir.file("dup.csv", "race,precinct,stops,frisks,hits\na,p1,1,0,0\na,p1,1,0,0\n")),
               DataError);
  EXPECT_THROW(read_frisk_csv(dir.path() + "/absent.csv"), DataError);
}

TEST(RawCsv, RoundTripAndBooleans) {
  const auto records = read_raw_csv(kData + "/raw_small.csv");
  EXPECT_EQ(records.size(), 2u * 3u * 150u);
  EXPECT_TRUE(records[0].field("day").has_value());
  std::ostringstream out;
  write_raw_csv(out, records);
  TempDir dir;
  const auto back = read_raw_csv(dir.file("raw.csv", out.str()));
  ASSERT_EQ(back.size(), records.size());
  EXPECT_EQ(aggregate(back), aggregate(records));
  EXPECT_EQ(back[7].attributes, records[7].attributes);

  const auto yn = read_raw_csv(dir.file("yn.csv", "race,precinct,frisked,weapon_found\na,p,yes,no\nb,p,true,true\n"));
  EXPECT_TRUE(yn[0].frisked);
  EXPECT_FALSE(yn[0].weapon_found);
  EXPECT_TRUE(yn[1].weapon_found);
  EXPECT_THROW(read_raw_csv(dir.file("hit.csv", "race,precinct,frisked,weapon_found\na,p,0,1\n")), DataError);
  EXPECT_THROW(read_raw_csv(dir.file("bool.csv", "race,precinct,frisked,weapon_found\na,p,maybe,0\n")), DataError);
}

TEST(StopCsv, RoundTripWithCensus) {
  const auto data = read_stop_csv(kData + "/stop_small.csv", kData + "/census_small.csv");
  EXPECT_EQ(data.races.size(), 2u);
  ASSERT_EQ(data.precincts.size(), 3u);
  EXPECT_NO_THROW(data.validate());
  std::ostringstream stops, census;
  write_stop_csv(stops, data);
  write_census_csv(census, data);
  TempDir dir;
  const auto back = read_stop_csv(dir.file("s.csv", stops.str()), dir.file("c.csv", census.str()));
  for (std::size_t d = 0; d < 3; ++d) {
    EXPECT_EQ(back.precincts[d].stops, data.precincts[d].stops);
    EXPECT_EQ(back.precincts[d].hits, data.precincts[d].hits);
    for (std::size_t r = 0; r < 2; ++r) EXPECT_DOUBLE_EQ(back.precincts[d].census[r], data.precincts[d].census[r]);
  }
  const auto partial = dir.file("partial.csv", "precinct,race,fraction\np001,white,0.5\np001,black,0.5\n");
  EXPECT_THROW(read_stop_csv(kData + "/stop_small.csv", partial), DataError);
}

TEST(Aggregate, CountsPerCell) {
  const std::vector<RawStopRecord> records = {record("a", "p1", true, true), record("a", "p1", false, false),
                                              record("b", "p2", true, false)};
  const auto data = aggregate(records);
  EXPECT_EQ(data.races, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(data.locations, (std::vector<std::string>{"p1", "p2"}));
  ASSERT_EQ(data.cells.size(), 4u);
  EXPECT_EQ(data.cells[0], (CellCounts{0, 0, 2, 1, 1}));
  EXPECT_EQ(data.cells[1], (CellCounts{0, 1, 0, 0, 0}));
  EXPECT_EQ(data.cells[3], (CellCounts{1, 1, 1, 1, 0}));
  EXPECT_THROW(aggregate({record("a", "p1", false, true)}), std::invalid_argument);
  EXPECT_THROW(aggregate(records, "day"), std::invalid_argument);
}

TEST(Aggregate, MillionRecordsSum) {
  std::vector<RawStopRecord> records;
  records.reserve(1'000'000);
  for (int i = 0; i < 1'000'000; ++i) {
    records.push_back(record(i % 3 == 0 ? "a" : "b", "p" + std::to_string(i % 5), i % 4 == 0, i % 8 == 0));
  }
  const auto data = aggregate(records);
  std::int64_t stops = 0, searches = 0, hits = 0;
  for (const auto& c : data.cells) {
    stops += c.stops;
    searches += c.searches;
    hits += c.hits;
  }
  EXPECT_EQ(stops, 1'000'000);
  EXPECT_EQ(searches, 250'000);
  EXPECT_EQ(hits, 125'000);
}

TEST(FilterRecords, KeepsMatching) {
  auto a = record("a", "p1", true, false);
  a.attributes["year"] = "2011";
  auto b = record("b", "p1", false, false);
  b.attributes["year"] = "2012";
  const auto kept = filter_records({a, b}, "year", "2012");
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].race, "b");
  EXPECT_EQ(filter_records({a, b}, "race", "a").size(), 1u);
}

TEST(DrawsCsv, RoundTrip) {
  PosteriorDraws d = PosteriorDraws::constant({"x", "y[1]"}, std::vector<double>{0.1, -2.5}, 2, 3);
  d.values[1] = 1.0 / 3.0;
  d.values[10] = -1e-300;
  d.leapfrog_steps.assign(6, 7);
  d.divergent.assign(6, 0);
  d.divergent[4] = 1;
  d.accept_stat.assign(6, 0.9);
  std::ostringstream out;
  write_draws_csv(out, d);
  TempDir dir;
  const auto back = read_draws_csv(dir.file("draws.csv", out.str()));
  EXPECT_EQ(back.chains, 2u);
  EXPECT_EQ(back.iterations, 3u);
  EXPECT_EQ(back.names, d.names);
  EXPECT_EQ(back.values, d.values);
  EXPECT_EQ(back.divergent, d.divergent);
  EXPECT_THROW(read_draws_csv(dir.file("bad.csv", "a,b\n1,2\n")), DataError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  const double third = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_double(third)), third);
}

TEST(Config, ParseSetAndHash) {
  std::istringstream in("# comment\nmodel = stop\ncensus = c.csv\nchains = 3\nprior.threshold_scale = 0.5\n"
                        "column.race = group\nfilter.year = 2012\n");
  auto c = parse_config(in);
  EXPECT_EQ(c.model, "stop");
  EXPECT_EQ(c.sampler.chains, 3u);
  EXPECT_EQ(c.priors.threshold_scale, 0.5);
  EXPECT_EQ(c.columns.at("race"), "group");
  EXPECT_EQ(c.filters.at("year"), "2012");
  const auto h = c.hash();
  EXPECT_EQ(h, fnv1a(c.to_text()));
  c.set("seed", "99");
  EXPECT_NE(c.hash(), h);
  EXPECT_EQ(c.entries().at("seed"), "99");
  EXPECT_THROW(c.set("no_such_key", "1"), DataError);
  EXPECT_THROW(c.set("chains", "three"), DataError);
  std::istringstream reparsed(c.to_text());
  EXPECT_EQ(parse_config(reparsed).hash(), c.hash());
}

TEST(Config, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, ValidateRequiresInputs) {
  RunConfig c;
  c.model = "stop";
  c.input = kData + "/stop_small.csv";
  EXPECT_THROW(c.validate(), DataError);
  c.census = kData + "/census_small.csv";
  EXPECT_NO_THROW(c.validate());
  c.model = "both";
  EXPECT_THROW(c.validate(false), DataError);
  RunConfig f;
  f.input = kData + "/absent.csv";
  EXPECT_THROW(f.validate(), DataError);
  EXPECT_NO_THROW(f.validate(false));
}

TEST(Run, EndToEndOnFixture) {
  TempDir dir;
  const auto config = quick_run(dir.path() + "/a");
  const auto outcome = run(config);
  EXPECT_EQ(outcome.exit_code, kExitOk);
  for (const char* name : {"thresholds.csv", "race_thresholds.csv", "diagnostics.json", "ppc.csv", "ppc.json",
                           "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() + "/a/" + name)) << name;
  }
  EXPECT_FALSE(fs::exists(dir.path() + "/a/draws.csv"));
  ASSERT_TRUE(outcome.fit.diagnostics.has_value());
  EXPECT_LT(outcome.fit.diagnostics->max_rhat, 1.1);
  EXPECT_LT(outcome.ppc.rate_rmse, 0.02);
  EXPECT_LT(outcome.ppc.hit_rate_rmse, 0.05);

  run(quick_run(dir.path() + "/b"));
  EXPECT_EQ(slurp(dir.path() + "/a/thresholds.csv"), slurp(dir.path() + "/b/thresholds.csv"));
}

TEST(Run, RawInputWithFilterAndDraws) {
  TempDir dir;
  std::istringstream in("input = " + kData + "/raw_small.csv\ninput_format = raw\nfilter.day = 3\noutput_dir = " +
                        dir.path() + "\nchains = 2\nwarmup = 100\nsamples = 100\nwrite_draws = true\n");
  const auto config = parse_config(in);
  const auto data = load_frisk_data(config);
  std::int64_t stops = 0;
  for (const auto& c : data.cells) stops += c.stops;
  EXPECT_GT(stops, 0);
  EXPECT_LT(stops, 900);
  const auto outcome = run(config);
  const auto draws = read_draws_csv(dir.path() + "/draws.csv");
  EXPECT_EQ(draws.values, outcome.fit.draws.values);
}

TEST(Run, MissingInputIsDataError) {
  RunConfig c;
  c.input = kData + "/absent.csv";
  EXPECT_THROW(run(c), DataError);
}
