#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "smp/harness.hpp"

using namespace smp;
using namespace smp::harness;

namespace {

io::json day_config() {
  return io::json::parse(R"({
    "slot_hours": 1.0,
    "seed": 11,
    "trace": {"synthetic": {"kind": "markov",
      "levels": [0.5, 1.0, 2.0, 3.0],
      "transitions": [[[0.6,0.3,0.1,0.0],[0.3,0.4,0.2,0.1],[0.1,0.3,0.4,0.2],[0.0,0.2,0.3,0.5]]],
      "length": 48}},
    "tariff": {"periods": [
      {"start_slot": 0, "end_slot": 16, "price": 0.5},
      {"start_slot": 16, "end_slot": 32, "price": 1.5},
      {"start_slot": 32, "end_slot": 48, "price": 1.0}]},
    "battery": {"b_max_kwh": 4.0, "p_charge_kw": 2.0, "p_discharge_kw": 2.0,
                "b_initial_kwh": 2.0},
    "policy": {"name": "offline_constant", "alpha": 0.5},
    "metrics": ["mi_plugin"],
    "sweep": {"axis": "alpha", "values": [0.0, 0.5, 1.0]}
  })");
}

std::string to_csv(const std::vector<io::Record>& records) {
  std::ostringstream os;
  io::write_records_csv(os, records);
  return os.str();
}

double cell(const io::Record& r, const std::string& key) {
  const auto* v = r.find(key);
  REQUIRE(v != nullptr);
  return std::get<double>(*v);
}

}  // namespace

TEST_CASE("run: alpha sweep produces one record per point with falling variance") {
  auto cfg = parse_experiment_config(day_config(), "test");
  auto out = run(cfg);
  REQUIRE(out.records.size() == 3);
  CHECK(!out.any_infeasible);
  double prev = 1e300;
  for (const auto& r : out.records) {
    const double v = cell(r, "v_t");
    CHECK(v <= prev + 1e-6);
    prev = v;
    CHECK(std::get<long long>(*r.find("violations")) == 0);
    CHECK(r.find("mi_plugin_bits") != nullptr);
  }
}

TEST_CASE("run: empty metric list gives simulation-only records") {
  auto j = day_config();
  j.erase("metrics");
  j.erase("sweep");
  auto cfg = parse_experiment_config(j, "test");
  auto out = run(cfg);
  REQUIRE(out.records.size() == 1);
  CHECK(out.records[0].find("v_t") != nullptr);
  CHECK(out.records[0].find("c_t") != nullptr);
  CHECK(out.records[0].find("mi_plugin_bits") == nullptr);
}

TEST_CASE("run: identical configs produce byte-identical output") {
  auto cfg = parse_experiment_config(day_config(), "test");
  const std::string a = to_csv(run(cfg).records);
  const std::string b = to_csv(run(cfg).records);
  CHECK(a == b);
  CHECK(!a.empty());

  std::ostringstream ja, jb;
  io::write_records_json(ja, run(cfg).records);
  io::write_records_json(jb, run(cfg).records);
  CHECK(ja.str() == jb.str());
}

TEST_CASE("run: a different seed changes stochastic runs") {
  auto j = day_config();
  j["policy"] = {{"name", "stepping"}, {"beta", 0.5}, {"variant", "random"}};
  j.erase("sweep");
  auto cfg = parse_experiment_config(j, "test");
  auto a = to_csv(run(cfg).records);
  cfg.seed = 999;
  auto b = to_csv(run(cfg).records);
  CHECK(a != b);
}

TEST_CASE("run: every policy name wires up and passes re-validation") {
  for (const std::string name :
       {"passthrough", "best_effort", "stepping", "myopic", "offline_constant",
        "offline_piecewise", "receding"}) {
    auto j = day_config();
    j.erase("sweep");
    j["policy"] = {{"name", name}, {"alpha", 0.5}, {"beta", 0.5},
                   {"variant", "hold"},  {"h_f", 4},     {"h_p", 4}};
    auto cfg = parse_experiment_config(j, "test");
    auto out = run(cfg);
    REQUIRE(out.records.size() == 1);
    INFO(name);
    CHECK(std::get<long long>(*out.records[0].find("violations")) == 0);
  }
}

TEST_CASE("run: attacks append their scores") {
  auto j = day_config();
  j.erase("sweep");
  j["policy"] = {{"name", "stepping"}, {"beta", 0.5}, {"variant", "hold"}};
  j["attacks"] = io::json::array({{{"name", "edge"}, {"threshold", 0.5}},
                                  {{"name", "peak"}, {"beta", 0.5}}});
  auto cfg = parse_experiment_config(j, "test");
  auto out = run(cfg);
  REQUIRE(out.records.size() == 1);
  CHECK(out.records[0].find("attack_edge_events") != nullptr);
  CHECK(out.records[0].find("attack_peak_recall") != nullptr);
}

TEST_CASE("config: missing fields are reported with their path") {
  auto j = day_config();
  j["policy"].erase("name");
  try {
    parse_experiment_config(j, "cfg.json");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg.json.policy") != std::string::npos);
    CHECK(std::string(e.what()).find("name") != std::string::npos);
  }
}

TEST_CASE("config: unsorted sweep grids are rejected") {
  auto j = day_config();
  j["sweep"]["values"] = {0.5, 0.0, 1.0};
  CHECK_THROWS_AS(parse_experiment_config(j, "cfg.json"), ConfigError);
}

TEST_CASE("trace csv: parse errors carry line and field") {
  std::istringstream bad("slot,load_kw\n0,1.0\n1,oops\n");
  try {
    io::read_trace_csv(bad, 1.0, "trace.csv");
    CHECK(false);
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("load_kw") != std::string::npos);
  }
}

TEST_CASE("trace csv round-trips including appliances") {
  LoadTrace t;
  t.slot_hours = 0.5;
  t.load_kw = {1.0, 2.0, 3.125};
  t.res_kw = {0.5, 0.0, 0.25};
  t.appliance_names = {"heat", "rest"};
  t.appliance_kw = {{0.5, 1.5, 3.0}, {0.5, 0.5, 0.125}};
  std::ostringstream os;
  io::write_trace_csv(os, t);
  std::istringstream is(os.str());
  auto back = io::read_trace_csv(is, 0.5, "roundtrip");
  CHECK(back.load_kw == t.load_kw);
  CHECK(back.res_kw == t.res_kw);
  CHECK(back.appliance_kw == t.appliance_kw);
  CHECK(back.appliance_names == t.appliance_names);
}

TEST_CASE("records: empty set writes a header-only file") {
  std::ostringstream os;
  io::write_records_csv(os, {}, {"a", "b"});
  CHECK(os.str() == "a,b\n");
}

TEST_CASE("records: csv and json of the same run parse to equal values") {
  auto cfg = parse_experiment_config(day_config(), "test");
  auto out = run(cfg);
  const auto arr = io::records_to_json(out.records);
  const auto back = io::records_from_json(arr, "mem");
  REQUIRE(back.size() == out.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].cells.size() == out.records[i].cells.size());
    for (std::size_t c = 0; c < back[i].cells.size(); ++c) {
      CHECK(back[i].cells[c].first == out.records[i].cells[c].first);
      CHECK(io::format_cell(back[i].cells[c].second) ==
            io::format_cell(out.records[i].cells[c].second));
    }
  }
  const std::string csv = to_csv(out.records);
  std::istringstream lines(csv);
  std::string header, line0;
  std::getline(lines, header);
  std::getline(lines, line0);
  const auto cells = io::split_csv_line(line0);
  const auto cols = io::record_columns(out.records);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (const auto* v = out.records[0].find(cols[c]))
      CHECK(cells[c] == io::format_cell(*v));
  }
}

TEST_CASE("pe sweep: coupled draws give monotone leakage columns") {
  PeSweepConfig pc;
  pc.length = 20000;
  pc.p_e_grid = {0.0, 0.5, 1.0};
  pc.b_max_grid = {0, 2};
  pc.seed = 5;
  auto out = sweep_pe(pc);
  REQUIRE(out.records.size() == 6);
  for (int g = 0; g < 2; ++g) {
    double prev = 1e300;
    for (int k = 0; k < 3; ++k) {
      const double leak = cell(out.records[g * 3 + k], "leakage_bits");
      CHECK(leak <= prev + 5e-3);
      prev = leak;
    }
  }
  CHECK(cell(out.records[2], "leakage_bits") == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("ba runner emits the requested budget grid") {
  auto block = io::json::parse(R"({
    "pmf": {"values": [0.0, 1.0], "probs": [0.5, 0.5]},
    "p_peak": 1.0,
    "budgets": [0.0, 0.25, 0.5],
    "oracle": true
  })");
  auto out = run_ba(block, "test.ba");
  REQUIRE(out.records.size() == 3);
  CHECK(cell(out.records[0], "leakage_bits") == doctest::Approx(1.0));
  CHECK(cell(out.records[2], "leakage_bits") == doctest::Approx(0.0).epsilon(1e-6));
  for (const auto& r : out.records)
    CHECK(std::fabs(cell(r, "leakage_bits") - cell(r, "oracle_bits")) < 1e-3);
}

TEST_CASE("aggregation runner: masked totals stay near the group demand") {
  LoadTrace t;
  t.load_kw = {1.0, 2.0};
  auto block = io::json::parse(
      R"({"meters": 4, "lambda": 0.5, "mask_range_kw": 1.0, "seed": 3})");
  auto out = run_aggregation(block, t, "test.agg");
  REQUIRE(out.records.size() == 2);
  for (int slot = 0; slot < 2; ++slot) {
    const auto& r = out.records[slot];
    CHECK(std::get<long long>(*r.find("slot")) == slot);
    const double total = cell(r, "total_kw");
    CHECK(std::fabs(total - 4.0 * t.load_kw[slot]) < 8.0);
  }
}

TEST_CASE("config: the stochastic policy demands a channel block") {
  auto j = day_config();
  j["policy"] = {{"name", "channel"}};
  j.erase("sweep");
  auto cfg = parse_experiment_config(j, "test");
  CHECK_THROWS_AS(run(cfg), ConfigError);
}
