#include "dtm/dtm.h"

#include <charconv>
#include <locale>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dtm/error.hpp"
#include "dtm/harness.hpp"
#include "dtm/network.hpp"
#include "dtm/scenario.hpp"

struct dtm_network {
  dtm::RoadNetwork net;
};

struct dtm_scenario {
  dtm::ScenarioConfig config;
};

struct dtm_report {
  std::string text;
  std::size_t rows = 0;
  bool truncated = false;
};

namespace {

thread_local std::string g_error;

template <class F>
dtm_status guard(F&& f) {
  try {
    g_error.clear();
    return f();
  } catch (const dtm::ConfigError& e) {
    g_error = e.what();
    return DTM_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return DTM_ERR_RUNTIME;
  } catch (const std::exception& e) {
    g_error = e.what();
    return DTM_ERR_RUNTIME;
  } catch (...) {
    g_error = "unknown error";
    return DTM_ERR_RUNTIME;
  }
}

dtm_status bad_argument(const char* what) {
  g_error = what;
  return DTM_ERR_ARGUMENT;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw dtm::ConfigError("empty item in list '" + text + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw dtm::ConfigError("empty list");
  return out;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw dtm::ConfigError("not a number: '" + s + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw dtm::ConfigError("not a non-negative integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw dtm::ConfigError("not a boolean: '" + s + "'");
}

std::string fixed(double x, int precision = 1) {
  std::ostringstream o;
  o.imbue(std::locale::classic());
  o.setf(std::ios::fixed);
  o.precision(precision);
  o << x;
  return o.str();
}

std::string describe(const dtm::RunReport& r) {
  std::ostringstream o;
  o << dtm::to_string(r.strategy) << ": " << r.runs.size() - r.truncated << "/" << r.runs.size()
    << " runs completed, completion " << fixed(r.completion_time.mean) << " +/- " << fixed(r.completion_time.stddev)
    << " ticks, mean travel " << fixed(r.mean_travel_time.mean) << " ticks, switches " << fixed(r.switches.mean)
    << "\n";
  return o.str();
}

void deliver(dtm_report** out, dtm_report rep) {
  if (out) *out = new dtm_report(std::move(rep));
}

}  // namespace

extern "C" {

const char* dtm_version(void) { return "1.0.0"; }

const char* dtm_last_error(void) { return g_error.c_str(); }

dtm_status dtm_network_grid(uint32_t rows, uint32_t cols, double block_m, dtm_network** out) {
  if (!out) return bad_argument("out is null");
  return guard([&] {
    dtm::GridSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.block_length_m = block_m;
    *out = new dtm_network{dtm::generate_grid(spec)};
    return DTM_OK;
  });
}

dtm_status dtm_network_load(const char* path, dtm_network** out) {
  if (!path || !out) return bad_argument("null argument");
  return guard([&] {
    *out = new dtm_network{dtm::load_network_file(path)};
    return DTM_OK;
  });
}

dtm_status dtm_network_save(const dtm_network* net, const char* path) {
  if (!net || !path) return bad_argument("null argument");
  return guard([&] {
    dtm::save_network_file(net->net, path);
    return DTM_OK;
  });
}

dtm_status dtm_network_size(const dtm_network* net, size_t* intersections, size_t* edges) {
  if (!net) return bad_argument("network is null");
  if (intersections) *intersections = net->net.intersection_count();
  if (edges) *edges = net->net.edge_count();
  g_error.clear();
  return DTM_OK;
}

void dtm_network_free(dtm_network* net) { delete net; }

dtm_status dtm_scenario_load(const char* path, dtm_scenario** out) {
  if (!path || !out) return bad_argument("null argument");
  return guard([&] {
    *out = new dtm_scenario{dtm::load_scenario_file(path)};
    return DTM_OK;
  });
}

dtm_status dtm_scenario_parse(const char* json_text, dtm_scenario** out) {
  if (!json_text || !out) return bad_argument("null argument");
  return guard([&] {
    *out = new dtm_scenario{dtm::parse_scenario(json_text)};
    return DTM_OK;
  });
}

dtm_status dtm_scenario_set(dtm_scenario* scenario, const char* key, const char* value) {
  if (!scenario || !key || !value) return bad_argument("null argument");
  return guard([&] {
    dtm::ScenarioConfig c = scenario->config;
    const std::string k(key), v(value);
    if (k == "seed")
      c.seed = parse_unsigned(v);
    else if (k == "runs")
      c.runs = static_cast<std::uint32_t>(parse_unsigned(v));
    else if (k == "strategy")
      c.strategy = dtm::parse_strategy(v);
    else if (k == "max_ticks")
      c.max_ticks = static_cast<dtm::Tick>(parse_unsigned(v));
    else if (k == "outputs.edges")
      c.outputs.edges = parse_bool(v);
    else if (k == "outputs.decisions")
      c.outputs.decisions = parse_bool(v);
    else if (k == "outputs.control")
      c.world.record_control = c.outputs.control = parse_bool(v);
    else if (k == "lane_reversal.enabled")
      c.world.lane_reversal = parse_bool(v);
    else if (k == "dlg.enabled")
      c.world.dlg_screening = parse_bool(v);
    else
      dtm::set_parameter(c, k, parse_number(v));
    c.validate();
    scenario->config = std::move(c);
    return DTM_OK;
  });
}

void dtm_scenario_free(dtm_scenario* scenario) { delete scenario; }

dtm_status dtm_simulate(const dtm_scenario* scenario, const char* out_dir, dtm_report** out) {
  if (!scenario || !out_dir) return bad_argument("null argument");
  return guard([&] {
    const auto r = dtm::run_to_directory(scenario->config, out_dir);
    deliver(out, {describe(r), r.runs.size(), r.any_truncated()});
    return r.any_truncated() ? DTM_GRIDLOCK : DTM_OK;
  });
}

dtm_status dtm_compare(const dtm_scenario* scenario, const char* strategies, const char* out_dir, dtm_report** out) {
  if (!scenario || !strategies || !out_dir) return bad_argument("null argument");
  return guard([&] {
    std::vector<dtm::ScenarioConfig> configs;
    for (const auto& name : split(strategies)) {
      dtm::ScenarioConfig c = scenario->config;
      c.strategy = dtm::parse_strategy(name);
      configs.push_back(std::move(c));
    }
    const auto cmp = dtm::compare(configs, out_dir);
    dtm_report rep;
    for (const auto& row : cmp.rows) {
      rep.text += describe(row.report);
      rep.text += "  delta vs " + std::string(dtm::to_string(cmp.reference)) + ": completion " +
                  fixed(row.completion_delta_pct, 2) + "%, travel " + fixed(row.travel_delta_pct, 2) + "%\n";
      rep.truncated = rep.truncated || row.report.any_truncated();
    }
    rep.rows = cmp.rows.size();
    const bool truncated = rep.truncated;
    deliver(out, std::move(rep));
    return truncated ? DTM_GRIDLOCK : DTM_OK;
  });
}

dtm_status dtm_sweep(const dtm_scenario* scenario, const char* param, const char* values, const char* out_dir,
                     dtm_report** out) {
  if (!scenario || !param || !values || !out_dir) return bad_argument("null argument");
  return guard([&] {
    std::vector<double> xs;
    for (const auto& s : split(values)) xs.push_back(parse_number(s));
    const auto points = dtm::sweep(scenario->config, param, xs, out_dir);
    dtm_report rep;
    for (const auto& p : points) {
      rep.text += std::string(param) + "=" + fixed(p.value, 3) + "  " + describe(p.report);
      rep.truncated = rep.truncated || p.report.any_truncated();
    }
    rep.rows = points.size();
    const bool truncated = rep.truncated;
    deliver(out, std::move(rep));
    return truncated ? DTM_GRIDLOCK : DTM_OK;
  });
}

const char* dtm_report_text(const dtm_report* report) { return report ? report->text.c_str() : ""; }

size_t dtm_report_rows(const dtm_report* report) { return report ? report->rows : 0; }

int dtm_report_truncated(const dtm_report* report) { return report && report->truncated ? 1 : 0; }

void dtm_report_free(dtm_report* report) { delete report; }

}  // extern "C"
