// Command-line front end. Talks to the simulator only through the C API.
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dtm/dtm.h"

namespace {

int fail(dtm_status s) {
  std::fprintf(stderr, "error: %s\n", dtm_last_error());
  return s == DTM_ERR_ARGUMENT ? 1 : static_cast<int>(s);
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  bool edges = false;
  bool decisions = false;
  bool control = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Scenario file (JSON)")->required();
  cmd->add_option("--set", c.overrides, "Override a setting, KEY=VALUE (repeatable)");
  cmd->add_flag("--edges", c.edges, "Write edges.csv (per-tick edge occupancy)");
  cmd->add_flag("--decisions", c.decisions, "Write decisions.csv for the first run");
  cmd->add_flag("--control", c.control, "Write control.csv for the first run");
}

/// Loads the scenario and applies command-line overrides.
dtm_status open_scenario(const Common& c, dtm_scenario** out) {
  dtm_status s = dtm_scenario_load(c.config.c_str(), out);
  if (s != DTM_OK) return s;
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects KEY=VALUE, got '%s'\n", o.c_str());
      return DTM_ERR_CONFIG;
    }
    kv.emplace_back(o.substr(0, eq), o.substr(eq + 1));
  }
  if (c.edges) kv.emplace_back("outputs.edges", "true");
  if (c.decisions) kv.emplace_back("outputs.decisions", "true");
  if (c.control) kv.emplace_back("outputs.control", "true");
  for (const auto& [k, v] : kv)
    if ((s = dtm_scenario_set(*out, k.c_str(), v.c_str())) != DTM_OK) return s;
  return DTM_OK;
}

int finish(dtm_status s, dtm_report* report) {
  if (report) std::fputs(dtm_report_text(report), stdout);
  dtm_report_free(report);
  if (s == DTM_GRIDLOCK) {
    std::fprintf(stderr, "warning: %s\n", "some runs hit the tick limit (gridlock); results were written");
    return 3;
  }
  return s == DTM_OK ? 0 : fail(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic mesoscopic traffic simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dtm_version()));

  Common sim_opts;
  std::string sim_out = "out";
  long long seed = -1;
  long long runs = -1;
  auto* sim = app.add_subcommand("simulate", "Run replications of one scenario");
  add_common(sim, sim_opts);
  sim->add_option("--seed", seed, "Base seed (replication r uses seed + r)")->check(CLI::NonNegativeNumber);
  sim->add_option("--runs", runs, "Number of replications")->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "Output directory");

  Common cmp_opts;
  std::string cmp_out = "out";
  std::string strategies;
  auto* cmp = app.add_subcommand("compare", "Run the same population under several strategies");
  add_common(cmp, cmp_opts);
  cmp->add_option("--strategies", strategies, "Comma-separated: vam,centralized,alert,none")->required();
  cmp->add_option("--out", cmp_out, "Output directory");

  Common sw_opts;
  std::string sw_out = "out";
  std::string param, values;
  auto* sw = app.add_subcommand("sweep", "Vary one parameter");
  add_common(sw, sw_opts);
  sw->add_option("--param", param, "P_R, epsilon, D_R, I_T, N, k, vehicles, T_dep or dlr_ratio")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--out", sw_out, "Output directory");

  std::string grid, net_out;
  double block_m = 1500.0;
  auto* gen = app.add_subcommand("gen-network", "Write a grid network file");
  gen->add_option("--grid", grid, "ROWSxCOLS, e.g. 10x10")->required();
  gen->add_option("--block-m", block_m, "Block length in meters")->check(CLI::PositiveNumber);
  gen->add_option("--out", net_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  dtm_report* report = nullptr;
  dtm_scenario* scenario = nullptr;
  int code = 0;
  if (*sim) {
    dtm_status s = open_scenario(sim_opts, &scenario);
    if (s == DTM_OK && seed >= 0) s = dtm_scenario_set(scenario, "seed", std::to_string(seed).c_str());
    if (s == DTM_OK && runs > 0) s = dtm_scenario_set(scenario, "runs", std::to_string(runs).c_str());
    if (s == DTM_OK) s = dtm_simulate(scenario, sim_out.c_str(), &report);
    code = finish(s, report);
  } else if (*cmp) {
    dtm_status s = open_scenario(cmp_opts, &scenario);
    if (s == DTM_OK) s = dtm_compare(scenario, strategies.c_str(), cmp_out.c_str(), &report);
    code = finish(s, report);
  } else if (*sw) {
    dtm_status s = open_scenario(sw_opts, &scenario);
    if (s == DTM_OK) s = dtm_sweep(scenario, param.c_str(), values.c_str(), sw_out.c_str(), &report);
    code = finish(s, report);
  } else if (*gen) {
    unsigned rows = 0, cols = 0;
    char tail = 0;
    if (std::sscanf(grid.c_str(), "%ux%u%c", &rows, &cols, &tail) != 2) {
      std::fprintf(stderr, "error: --grid expects ROWSxCOLS, got '%s'\n", grid.c_str());
      return 1;
    }
    dtm_network* net = nullptr;
    dtm_status s = dtm_network_grid(rows, cols, block_m, &net);
    if (s == DTM_OK) s = dtm_network_save(net, net_out.c_str());
    if (s == DTM_OK) {
      size_t n = 0, e = 0;
      dtm_network_size(net, &n, &e);
      std::printf("wrote %zu intersections, %zu edges to %s\n", n, e, net_out.c_str());
    }
    dtm_network_free(net);
    code = s == DTM_OK ? 0 : fail(s);
  }
  dtm_scenario_free(scenario);
  return code;
}
