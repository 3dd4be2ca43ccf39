#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "dtm/dtm.h"

namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "format_version": 1,
  "network": {"grid": {"rows": 3, "cols": 3, "block_m": 200, "lanes": 1}},
  "vehicles": 40,
  "departure_window": 50,
  "seed": 5,
  "runs": 2,
  "strategy": "vam"
})";

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dtm_capi_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("version string") { CHECK(std::strlen(dtm_version()) > 0); }

TEST_CASE("null arguments are rejected") {
  CHECK(dtm_network_grid(3, 3, 100, nullptr) == DTM_ERR_ARGUMENT);
  CHECK(dtm_scenario_parse(nullptr, nullptr) == DTM_ERR_ARGUMENT);
  CHECK(dtm_simulate(nullptr, nullptr, nullptr) == DTM_ERR_ARGUMENT);
  CHECK(std::strlen(dtm_last_error()) > 0);
  dtm_network_free(nullptr);
  dtm_scenario_free(nullptr);
  dtm_report_free(nullptr);
}

TEST_CASE("grid network round-trips through a file") {
  dtm_network* net = nullptr;
  REQUIRE(dtm_network_grid(3, 4, 150, &net) == DTM_OK);
  size_t n = 0, e = 0;
  REQUIRE(dtm_network_size(net, &n, &e) == DTM_OK);
  CHECK(n == 12);
  CHECK(e == 34);
  const auto dir = scratch("net");
  fs::create_directories(dir);
  const std::string path = (dir / "grid.json").string();
  REQUIRE(dtm_network_save(net, path.c_str()) == DTM_OK);
  dtm_network* back = nullptr;
  REQUIRE(dtm_network_load(path.c_str(), &back) == DTM_OK);
  size_t n2 = 0, e2 = 0;
  REQUIRE(dtm_network_size(back, &n2, &e2) == DTM_OK);
  CHECK(n2 == n);
  CHECK(e2 == e);
  dtm_network_free(back);
  dtm_network_free(net);
}

TEST_CASE("invalid grids and configs give config errors") {
  dtm_network* net = nullptr;
  CHECK(dtm_network_grid(1, 5, 100, &net) == DTM_ERR_CONFIG);
  CHECK(net == nullptr);
  CHECK(dtm_network_load("/nonexistent/net.json", &net) == DTM_ERR_CONFIG);
  dtm_scenario* s = nullptr;
  CHECK(dtm_scenario_parse("{not json", &s) == DTM_ERR_CONFIG);
  CHECK(dtm_scenario_parse(R"({"format_version": 1, "vehicles": -3})", &s) == DTM_ERR_CONFIG);
  CHECK(s == nullptr);
}

TEST_CASE("overrides are validated") {
  dtm_scenario* s = nullptr;
  REQUIRE(dtm_scenario_parse(kSmall, &s) == DTM_OK);
  CHECK(dtm_scenario_set(s, "seed", "11") == DTM_OK);
  CHECK(dtm_scenario_set(s, "strategy", "centralized") == DTM_OK);
  CHECK(dtm_scenario_set(s, "strategy", "teleport") == DTM_ERR_CONFIG);
  CHECK(dtm_scenario_set(s, "lane_reversal.enabled", "false") == DTM_OK);
  CHECK(dtm_scenario_set(s, "lane_reversal.enabled", "maybe") == DTM_ERR_CONFIG);
  CHECK(dtm_scenario_set(s, "P_R", "1.5") == DTM_ERR_CONFIG);
  CHECK(dtm_scenario_set(s, "no_such_key", "1") == DTM_ERR_CONFIG);
  CHECK(dtm_scenario_set(s, nullptr, "1") == DTM_ERR_ARGUMENT);
  dtm_scenario_free(s);
}

TEST_CASE("simulate writes identical runs.csv twice") {
  dtm_scenario* s = nullptr;
  REQUIRE(dtm_scenario_parse(kSmall, &s) == DTM_OK);
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  dtm_report* r = nullptr;
  REQUIRE(dtm_simulate(s, a.string().c_str(), &r) == DTM_OK);
  CHECK(dtm_report_rows(r) == 2);
  CHECK(dtm_report_truncated(r) == 0);
  CHECK(std::strlen(dtm_report_text(r)) > 0);
  dtm_report_free(r);
  REQUIRE(dtm_simulate(s, b.string().c_str(), nullptr) == DTM_OK);
  const std::string first = slurp(a / "runs.csv");
  CHECK(first.rfind("run_index,strategy,", 0) == 0);
  CHECK(first == slurp(b / "runs.csv"));
  dtm_scenario_free(s);
}

TEST_CASE("compare and sweep") {
  dtm_scenario* s = nullptr;
  REQUIRE(dtm_scenario_parse(kSmall, &s) == DTM_OK);
  dtm_report* r = nullptr;
  REQUIRE(dtm_compare(s, "vam,centralized,alert,none", scratch("cmp").string().c_str(), &r) == DTM_OK);
  CHECK(dtm_report_rows(r) == 4);
  dtm_report_free(r);
  CHECK(dtm_compare(s, "vam,bogus", scratch("cmp_bad").string().c_str(), nullptr) == DTM_ERR_CONFIG);
  REQUIRE(dtm_sweep(s, "P_R", "0,0.5,1", scratch("sweep").string().c_str(), &r) == DTM_OK);
  CHECK(dtm_report_rows(r) == 3);
  dtm_report_free(r);
  CHECK(dtm_sweep(s, "P_R", "0,abc", scratch("sweep_bad").string().c_str(), nullptr) == DTM_ERR_CONFIG);
  dtm_scenario_free(s);
}

TEST_CASE("tick limit reports gridlock but still writes results") {
  dtm_scenario* s = nullptr;
  REQUIRE(dtm_scenario_parse(kSmall, &s) == DTM_OK);
  REQUIRE(dtm_scenario_set(s, "max_ticks", "10") == DTM_OK);
  const auto dir = scratch("gridlock");
  dtm_report* r = nullptr;
  CHECK(dtm_simulate(s, dir.string().c_str(), &r) == DTM_GRIDLOCK);
  REQUIRE(r != nullptr);
  CHECK(dtm_report_truncated(r) == 1);
  CHECK(fs::exists(dir / "runs.csv"));
  dtm_report_free(r);
  dtm_scenario_free(s);
}
