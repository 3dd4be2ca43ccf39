#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtm/baselines.hpp"
#include "dtm/comms.hpp"
#include "dtm/network.hpp"
#include "dtm/routing.hpp"
#include "dtm/traffic.hpp"
#include "dtm/vam.hpp"

namespace dtm {

inline constexpr int kScenarioFormatVersion = 1;

enum class StrategyKind : std::uint8_t { vam, centralized, alert, none };

std::string_view to_string(StrategyKind s);
StrategyKind parse_strategy(std::string_view text);

/// Stops a vehicle when it enters `edge` at or after `not_before`.
struct InjectionSpec {
  std::optional<VehicleId> vehicle;  ///< nullopt selects the first vehicle to qualify
  EdgeId edge;
  Tick not_before = 0;
  Tick duration = 30;
};

/// Weighted O-D pair; when a scenario lists any, trips are drawn from them
/// instead of uniformly over all intersections.
struct OdWeight {
  NodeId origin;
  NodeId destination;
  double weight = 1.0;
};

struct OutputOptions {
  bool edges = false;
  bool decisions = false;
  bool control = false;
};

struct ScenarioConfig {
  std::optional<GridSpec> grid;      ///< exactly one of grid / network_file
  std::filesystem::path network_file;
  std::uint32_t vehicle_count = 1000;
  Tick departure_window = 1000;  ///< T_dep
  StrategyKind strategy = StrategyKind::vam;
  CommsParams comms;
  RoutingParams routing;
  ZoneParams zones;
  WorldOptions world;
  std::vector<InjectionSpec> injections;
  std::vector<OdWeight> demand;
  std::uint64_t seed = 42;
  std::optional<Tick> max_ticks;
  std::uint32_t runs = 1;
  OutputOptions outputs;
  bool check_conservation = true;

  /// Gridlock guard: explicit max_ticks, else 20 x T_dep (at least 1000).
  Tick tick_limit() const;
  /// Checks everything that does not need the network.
  void validate() const;
};

/// Parses a scenario document. Relative network paths resolve against
/// `base_dir`. Throws ConfigError on malformed or invalid input.
ScenarioConfig parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario_file(const std::filesystem::path& path);
/// Canonical JSON form; parse_scenario(serialize_scenario(c)) == c.
std::string serialize_scenario(const ScenarioConfig& config);

/// Builds or loads the scenario's network and checks every edge and node the
/// config references against it.
std::shared_ptr<const RoadNetwork> scenario_network(const ScenarioConfig& config);

/// Vehicles for one replication: seed-derived O-D pairs (distinct and
/// mutually reachable, up to 100 draws each), departures uniform over
/// [0, T_dep], free-flow R_C and k optional routes.
std::vector<Vehicle> build_population(const ScenarioConfig& config, RouteCache& routes, std::uint64_t seed);

/// Stable digest of the O-D pairs and departure times of a population.
std::uint64_t population_digest(std::span<const Vehicle> vehicles);

/// Initialized world for one replication.
World build_scenario(const ScenarioConfig& config, std::shared_ptr<const RoadNetwork> network, RouteCache& routes,
                     std::uint64_t seed);

}  // namespace dtm
