#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dtm/scenario.hpp"
#include "dtm/strategy.hpp"

namespace dtm {

struct RunMetrics {
  std::uint32_t run_index = 0;
  std::uint64_t seed = 0;
  StrategyKind strategy = StrategyKind::none;
  Tick completion_time = 0;  ///< tick the last vehicle arrived (tick limit when truncated)
  double mean_travel_time = 0.0;    ///< ticks, arrival minus scheduled departure
  double median_travel_time = 0.0;
  double mean_distance_m = 0.0;
  std::uint64_t switches = 0;
  bool truncated = false;
  std::size_t arrived = 0;
  std::uint32_t peak_occupancy = 0;  ///< max over edges
  std::vector<std::uint32_t> edge_peaks;
  std::uint64_t population_digest = 0;
  std::vector<bool> injections_fired;
  Tick max_departure = 0;  ///< latest actual departure among arrived vehicles
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

struct RunReport {
  StrategyKind strategy = StrategyKind::none;
  std::vector<RunMetrics> runs;
  Summary completion_time;
  Summary mean_travel_time;
  Summary median_travel_time;
  Summary switches;
  std::size_t truncated = 0;

  bool any_truncated() const { return truncated > 0; }
};

/// Per-tick observer, mainly for tests.
using TickHook = std::function<void(const World&, Tick, std::span<const Event>)>;

/// Artefacts of a single replication beyond its metrics.
struct RunTrace {
  std::vector<DecisionRecord> decisions;
  std::vector<ControlRecord> control;
  std::string edges_csv;  ///< rows without header; empty unless requested
};

/// One replication with seed `seed`. Throws StateError if a conservation
/// check fails.
RunMetrics run_once(const ScenarioConfig& config, std::shared_ptr<const RoadNetwork> network, RouteCache& routes,
                    std::uint32_t run_index, std::uint64_t seed, RunTrace* trace = nullptr,
                    const TickHook& hook = {});

/// All replications (seeds seed, seed+1, ...) plus aggregates over completed runs.
RunReport run(const ScenarioConfig& config, const TickHook& hook = {});

/// Same as run() and writes runs.csv, summary.json and any requested traces.
RunReport run_to_directory(const ScenarioConfig& config, const std::filesystem::path& out);

struct ComparisonRow {
  RunReport report;
  double completion_delta_pct = 0.0;  ///< relative to the reference strategy
  double travel_delta_pct = 0.0;
};

struct Comparison {
  StrategyKind reference = StrategyKind::none;
  std::vector<ComparisonRow> rows;
};

/// Runs configs that differ only in strategy. Throws ConfigError otherwise and
/// StateError if populations differ. Deltas are relative to `none` when
/// present, else to the first config.
Comparison compare(const std::vector<ScenarioConfig>& configs, const std::filesystem::path& out = {});

struct SweepPoint {
  double value = 0.0;
  RunReport report;
};

/// Names accepted by sweep().
std::vector<std::string> sweep_parameters();
/// Sets one named parameter; throws ConfigError for unknown names or bad values.
void set_parameter(ScenarioConfig& config, const std::string& name, double value);

std::vector<SweepPoint> sweep(const ScenarioConfig& config, const std::string& param,
                              const std::vector<double>& values, const std::filesystem::path& out = {});

std::string runs_csv(const RunReport& report);
std::string summary_json(const RunReport& report);
std::string compare_csv(const Comparison& cmp);
std::string sweep_csv(const std::string& param, const std::vector<SweepPoint>& points);
std::string decisions_csv(std::span<const DecisionRecord> rows);
std::string control_csv(std::span<const ControlRecord> rows);

Summary summarize(std::span<const double> values);
double median(std::vector<double> values);

}  // namespace dtm
