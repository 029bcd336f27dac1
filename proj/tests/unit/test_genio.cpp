#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "aggrisk/dataset_io.hpp"
#include "aggrisk/errors.hpp"
#include "aggrisk/generator.hpp"
#include "aggrisk/tables.hpp"
#include "helpers.hpp"

using namespace aggrisk;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    out[entry.path().filename().string()] = testutil::slurp(entry.path().string());
  }
  return out;
}

}  // namespace

TEST_CASE("generated YET row count is trials times events") {
  const Dataset ds = generate_dataset(testutil::small_config(42, 10, 5, 2, 2, 20));
  REQUIRE(ds.yet.size() == 50);
  REQUIRE(ds.num_trials() == 10);
  for (const TrialRows& trial : ds.trials) {
    REQUIRE(trial.rows.size() == 5);
    std::uint32_t expected_time = 1;
    for (std::uint32_t row : trial.rows) {
      REQUIRE(ds.yet[row].time_index == expected_time++);
    }
  }
}

TEST_CASE("generation is deterministic per seed, file for file") {
  testutil::TempDir a("gen_a");
  testutil::TempDir b("gen_b");
  const GeneratorConfig cfg = testutil::small_config(42);
  write_dataset(generate_dataset(cfg), a.str());
  write_dataset(generate_dataset(cfg), b.str());
  REQUIRE(dir_contents(a.path()) == dir_contents(b.path()));

  GeneratorConfig other = cfg;
  other.seed = 43;
  testutil::TempDir c("gen_c");
  write_dataset(generate_dataset(other), c.str());
  REQUIRE(dir_contents(a.path()) != dir_contents(c.path()));
}

TEST_CASE("generated values respect the table invariants") {
  const Dataset ds = generate_dataset(testutil::small_config(7, 20, 8, 5, 3, 40));
  REQUIRE(validate_portfolio(ds.layers, ds.elt_pool).empty());

  std::set<EventId> catalogue_ids;
  for (const auto& rec : ds.catalogue) catalogue_ids.insert(rec.event_id);

  for (const YetRecord& r : ds.yet) {
    REQUIRE(r.z_pe >= 0.0);
    REQUIRE(r.z_pe < 1.0);
    REQUIRE(catalogue_ids.contains(r.event_id));
  }
  for (const auto& [elt, entries] : ds.eelts) {
    for (const EeltEntry& e : entries) {
      REQUIRE(e.z_e >= 0.0);
      REQUIRE(e.z_e < 1.0);
      REQUIRE(e.mean_loss <= e.max_loss);
      REQUIRE(e.mean_loss >= 0.0);
      REQUIRE(catalogue_ids.contains(e.event_id));
    }
  }
  for (const LayerRecord& l : ds.layers) {
    REQUIRE(l.elt_ids.size() == 3);
    REQUIRE(l.terms.share > 0.0);
    REQUIRE(l.terms.share <= 1.0);
  }
}

TEST_CASE("write, load, write round-trips byte-identically") {
  testutil::TempDir first("rt_a");
  testutil::TempDir second("rt_b");
  write_dataset(generate_dataset(testutil::small_config(123)), first.str());
  const Dataset loaded = load_dataset(first.str());
  write_dataset(loaded, second.str());
  REQUIRE(dir_contents(first.path()) == dir_contents(second.path()));
}

TEST_CASE("loading reports malformed rows with file and line") {
  testutil::TempDir dir("bad_z");
  write_dataset(generate_dataset(testutil::small_config(1, 2, 2, 1, 1, 5)), dir.str());

  {
    std::ofstream yet(dir.file("yet.csv"), std::ios::binary);
    yet << "trial_id,event_id,time_index,z_pe\n1,1,1,0.5\n1,2,2,1.5\n";
  }
  try {
    load_dataset(dir.str());
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(e.kind() == DataError::Kind::MalformedRow);
    CHECK(e.file() == "yet.csv");
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("z_pe") != std::string::npos);
  }
}

TEST_CASE("loading rejects a mean above the max loss") {
  testutil::TempDir dir("bad_mean");
  write_dataset(generate_dataset(testutil::small_config(1, 2, 2, 1, 1, 5)), dir.str());
  {
    std::ofstream eelt(dir.file("eelt_1.csv"), std::ios::binary);
    eelt << "event_id,z_e,mean_loss,sigma_i,sigma_c,max_loss\n1,0.5,200,10,10,100\n";
  }
  try {
    load_dataset(dir.str());
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(e.kind() == DataError::Kind::InvariantViolation);
    CHECK(e.file() == "eelt_1.csv");
    CHECK(e.line() == 2);
  }
}

TEST_CASE("loading rejects non-increasing time indexes") {
  testutil::TempDir dir("bad_time");
  write_dataset(generate_dataset(testutil::small_config(1, 2, 2, 1, 1, 5)), dir.str());
  {
    std::ofstream yet(dir.file("yet.csv"), std::ios::binary);
    yet << "trial_id,event_id,time_index,z_pe\n1,1,2,0.5\n1,2,2,0.25\n";
  }
  try {
    load_dataset(dir.str());
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(e.kind() == DataError::Kind::InvariantViolation);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("loading reports a missing table file") {
  testutil::TempDir dir("missing");
  write_dataset(generate_dataset(testutil::small_config(1, 2, 2, 1, 1, 5)), dir.str());
  fs::remove(dir.file("events.csv"));
  try {
    load_dataset(dir.str());
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(e.kind() == DataError::Kind::MissingFile);
    CHECK(e.file() == "events.csv");
  }
}

TEST_CASE("loading reports a dangling layer reference with its line") {
  testutil::TempDir dir("dangling");
  write_dataset(generate_dataset(testutil::small_config(1, 2, 2, 2, 1, 5)), dir.str());
  // Point layer 2 (line 3 of layers.csv) at an ELT that does not exist.
  std::string layers = testutil::slurp(dir.file("layers.csv"));
  const std::size_t pos = layers.rfind("\n2,");
  REQUIRE(pos != std::string::npos);
  const std::size_t elt_field = layers.find(",2,", pos + 1);
  REQUIRE(elt_field != std::string::npos);
  layers.replace(elt_field, 3, ",999,");
  {
    std::ofstream out(dir.file("layers.csv"), std::ios::binary);
    out << layers;
  }
  try {
    load_dataset(dir.str());
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(e.kind() == DataError::Kind::InvariantViolation);
    CHECK(e.file() == "layers.csv");
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("999") != std::string::npos);
  }
}

TEST_CASE("STEP table with one event fills every trial with it") {
  StepSpec spec;
  spec.weighted_events = {{17, 1.0}};
  spec.num_trials = 100;
  const auto yet = build_step_yet(spec, 9);
  REQUIRE(yet.size() == 100);
  for (std::size_t i = 0; i < yet.size(); ++i) {
    REQUIRE(yet[i].trial_id == i + 1);
    REQUIRE(yet[i].event_id == 17);
    REQUIRE(yet[i].time_index == 1);
    REQUIRE(yet[i].z_pe >= 0.0);
    REQUIRE(yet[i].z_pe < 1.0);
  }
}

TEST_CASE("STEP frequencies converge to the normalized weights") {
  // Binomial oracle: |freq - p| <= 3 * sqrt(p(1-p)/n).
  const std::uint32_t n = 100'000;

  SECTION("equal weights") {
    StepSpec spec;
    spec.weighted_events = {{1, 1.0}, {2, 1.0}};
    spec.num_trials = n;
    const auto yet = build_step_yet(spec, 4242);
    std::size_t first = 0;
    for (const YetRecord& r : yet) first += r.event_id == 1;
    const double freq = static_cast<double>(first) / n;
    const double sigma = std::sqrt(0.25 / n);
    REQUIRE(std::fabs(freq - 0.5) <= 3.0 * sigma);
  }

  SECTION("weights one to three") {
    StepSpec spec;
    spec.weighted_events = {{1, 1.0}, {2, 3.0}};
    spec.num_trials = n;
    const auto yet = build_step_yet(spec, 777);
    std::size_t first = 0;
    for (const YetRecord& r : yet) first += r.event_id == 1;
    const double freq = static_cast<double>(first) / n;
    const double sigma = std::sqrt(0.25 * 0.75 / n);
    REQUIRE(std::fabs(freq - 0.25) <= 3.0 * sigma);
  }
}

TEST_CASE("STEP rejects an empty or invalid weight list") {
  REQUIRE_THROWS_AS(build_step_yet({{}, 10}, 1), ConfigError);
  StepSpec bad;
  bad.weighted_events = {{1, -2.0}};
  bad.num_trials = 5;
  REQUIRE_THROWS_AS(build_step_yet(bad, 1), ConfigError);
}

TEST_CASE("generator configs are validated") {
  GeneratorConfig cfg = testutil::small_config(1);
  cfg.num_trials = 0;
  REQUIRE_THROWS_AS(generate_dataset(cfg), ConfigError);

  cfg = testutil::small_config(1);
  cfg.regions.clear();
  REQUIRE_THROWS_AS(generate_dataset(cfg), ConfigError);

  cfg = testutil::small_config(1);
  cfg.perils = {"HU,EQ"};
  REQUIRE_THROWS_AS(generate_dataset(cfg), ConfigError);
}
