#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dtm/network.hpp"
#include "dtm/routing.hpp"
#include "dtm/traffic.hpp"

namespace dtm {

/// Exact global load: number of in-network vehicles whose next `horizon`
/// route edges (occupied edge included) contain each edge.
std::vector<std::uint32_t> next_edge_loads(const World& world, std::uint32_t horizon);

/// Congested cost per edge: volume-delay travel time at `loads` plus the
/// expected wait at the downstream signal, using the world's live lanes and
/// signal plans.
std::vector<double> congested_costs(const World& world, std::span<const std::uint32_t> loads);

/// Intersection a vehicle can next choose a route from: the end of its
/// occupied edge, or its origin before departure.
NodeId decision_node(const World& world, const Vehicle& vehicle);

/// Minimum-cost route from the vehicle's decision node under `costs`
/// (normally congested_costs over exact global loads). Never turns back to
/// the intersection the vehicle is coming from unless no other way exists.
/// Throws RoutingError if the destination is unreachable.
Route centralized_route(const World& world, const Vehicle& vehicle, EdgeCosts costs);
/// Same, on a precomputed tree toward the vehicle's destination.
Route centralized_route(const World& world, const Vehicle& vehicle, const DistanceTree& tree);

struct ZoneParams {
  double speed_threshold = 0.3;    ///< fraction of free-flow speed
  Tick persist_ticks = 10;         ///< consecutive slow ticks before activation
  double radius_m = 800.0;
  std::uint32_t lookahead_edges = 2;  ///< alert distance in edges ahead of the occupied one
  double penalty = 10.0;              ///< cost factor on zone edges when rerouting
  double min_occupancy = 0.0;         ///< also require count >= this fraction of jam storage

  void validate() const;
};

struct CongestionZone {
  EdgeId center;
  double radius_m = 0.0;
  Tick active_since = 0;
  std::vector<EdgeId> edges;  ///< edges whose midpoint lies within the radius, ascending
};

/// Tracks edge slowdowns and keeps the set of active zones. A zone forms once
/// its center edge stays occupied and slow for persist_ticks consecutive ticks
/// and dissolves after as many consecutive ticks without the condition.
class ZoneMonitor {
 public:
  ZoneMonitor(const RoadNetwork& net, ZoneParams params);

  void observe(const World& world, Tick tick);
  std::span<const CongestionZone> active() const { return active_; }
  const ZoneParams& params() const { return params_; }
  /// Changes whenever the active set does.
  std::uint64_t version() const { return version_; }

 private:
  const RoadNetwork* net_;
  ZoneParams params_;
  std::vector<Tick> slow_;
  std::vector<Tick> clear_;
  std::vector<char> is_center_;
  std::vector<CongestionZone> active_;
  std::uint64_t version_ = 0;
};

/// True if any zone covers one of the `ahead` edges.
bool zone_ahead(std::span<const CongestionZone> zones, std::span<const EdgeId> ahead);

/// New continuation from the vehicle's decision node if an active zone sits
/// within the alert distance on its remaining route, routed on free-flow
/// costs with zone edges penalized. nullopt means stay.
std::optional<Route> alert_reroute(const World& world, const Vehicle& vehicle, std::span<const CongestionZone> zones,
                                   const ZoneParams& params);
/// Same, with `tree` built on zone_costs toward the vehicle's destination.
std::optional<Route> alert_reroute(const World& world, const Vehicle& vehicle, std::span<const CongestionZone> zones,
                                   const ZoneParams& params, const DistanceTree& tree);

/// Free-flow costs with every zone edge multiplied by the penalty.
std::vector<double> zone_costs(const RoadNetwork& net, std::span<const CongestionZone> zones, const ZoneParams& params);

/// The do-nothing baseline: always stay.
constexpr std::optional<Route> no_action(const Vehicle&) { return std::nullopt; }

}  // namespace dtm
