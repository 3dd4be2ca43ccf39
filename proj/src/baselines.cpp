#include "dtm/baselines.hpp"

#include <algorithm>
#include <string>

#include "dtm/error.hpp"

namespace dtm {

std::vector<std::uint32_t> next_edge_loads(const World& world, std::uint32_t horizon) {
  std::vector<std::uint32_t> loads(world.net().edge_count(), 0);
  for (const Vehicle& v : world.vehicles) {
    if (!v.in_network()) continue;
    const auto& edges = v.current_route.edges;
    const std::size_t end = std::min(edges.size(), v.route_pos + horizon);
    for (std::size_t i = v.route_pos; i < end; ++i) ++loads[edges[i].index()];
  }
  return loads;
}

std::vector<double> congested_costs(const World& world, std::span<const std::uint32_t> loads) {
  const RoadNetwork& net = world.net();
  std::vector<double> cost(net.edge_count());
  for (const Edge& e : net.edges()) {
    const std::uint32_t lanes = world.lanes(e.id);
    const double load = loads[e.id.index()];
    double c = edge_travel_time(e, load, world.options.cost, lanes);
    if (const SignalPlan* plan = world.plan_at(e.to)) c += signal_wait_estimate(*plan, e.id, load, world.options.cost, lanes);
    cost[e.id.index()] = c;
  }
  return cost;
}

NodeId decision_node(const World& world, const Vehicle& v) {
  if (v.state == VehicleState::pending) return v.origin;
  if (!v.in_network()) throw StateError("vehicle " + std::to_string(v.id.value) + " has arrived");
  return world.net().edge(v.current_edge()).to;
}

Route centralized_route(const World& world, const Vehicle& v, EdgeCosts costs) {
  const DistanceTree tree(world.net(), v.destination, std::vector<double>(costs.begin(), costs.end()));
  return centralized_route(world, v, tree);
}

Route centralized_route(const World& world, const Vehicle& v, const DistanceTree& tree) {
  const RoadNetwork& net = world.net();
  if (tree.destination() != v.destination) throw RoutingError("distance tree is for a different destination");
  const NodeId from = decision_node(world, v);
  std::optional<NodeId> avoid;
  if (v.in_network()) avoid = net.edge(v.current_edge()).from;
  auto r = tree.route_from(from, avoid);
  if (!r) r = tree.route_from(from);
  if (!r)
    throw RoutingError("intersection " + std::to_string(v.destination.value) + " is unreachable from " +
                       std::to_string(from.value));
  return *r;
}

void ZoneParams::validate() const {
  if (!(speed_threshold > 0.0 && speed_threshold <= 1.0)) throw ConfigError("zone speed threshold must be in (0, 1]");
  if (persist_ticks < 1) throw ConfigError("zone persistence must be at least 1 tick");
  if (!(radius_m > 0.0)) throw ConfigError("zone radius must be positive");
  if (!(penalty >= 1.0)) throw ConfigError("zone penalty must be >= 1");
  if (!(min_occupancy >= 0.0 && min_occupancy <= 1.0)) throw ConfigError("zone min occupancy must be in [0, 1]");
}

ZoneMonitor::ZoneMonitor(const RoadNetwork& net, ZoneParams params)
    : net_(&net),
      params_(params),
      slow_(net.edge_count(), 0),
      clear_(net.edge_count(), 0),
      is_center_(net.edge_count(), 0) {
  params_.validate();
}

void ZoneMonitor::observe(const World& world, Tick tick) {
  bool changed = false;
  for (const Edge& e : net_->edges()) {
    const std::size_t i = e.id.index();
    const EdgeState& st = world.edges[i];
    const bool slow = st.count() > 0 && st.mean_speed_fraction < params_.speed_threshold &&
                      st.count() >= params_.min_occupancy * e.capacity();
    slow_[i] = slow ? slow_[i] + 1 : 0;
    clear_[i] = slow ? 0 : clear_[i] + 1;
    if (!is_center_[i] && slow_[i] >= params_.persist_ticks) {
      CongestionZone z{e.id, params_.radius_m, tick, {}};
      const Point c = net_->midpoint(e.id);
      for (const Edge& other : net_->edges())
        if (distance(net_->midpoint(other.id), c) <= params_.radius_m) z.edges.push_back(other.id);
      active_.push_back(std::move(z));
      is_center_[i] = 1;
      changed = true;
    } else if (is_center_[i] && clear_[i] >= params_.persist_ticks) {
      std::erase_if(active_, [&](const CongestionZone& z) { return z.center == e.id; });
      is_center_[i] = 0;
      changed = true;
    }
  }
  if (changed) ++version_;
  if (changed)
    std::sort(active_.begin(), active_.end(),
              [](const CongestionZone& a, const CongestionZone& b) { return a.center < b.center; });
}

std::vector<double> zone_costs(const RoadNetwork& net, std::span<const CongestionZone> zones, const ZoneParams& params) {
  std::vector<double> cost = net.free_flow_costs();
  for (const CongestionZone& z : zones)
    for (EdgeId e : z.edges) cost[e.index()] = net.edge(e).free_flow_time() * params.penalty;
  return cost;
}

bool zone_ahead(std::span<const CongestionZone> zones, std::span<const EdgeId> ahead) {
  for (const CongestionZone& z : zones)
    for (EdgeId e : ahead)
      if (std::binary_search(z.edges.begin(), z.edges.end(), e)) return true;
  return false;
}

std::optional<Route> alert_reroute(const World& world, const Vehicle& v, std::span<const CongestionZone> zones,
                                   const ZoneParams& params) {
  if (zones.empty() || !v.in_network() || v.on_last_edge()) return std::nullopt;
  auto ahead = v.remaining_after_current();
  if (ahead.size() > params.lookahead_edges) ahead = ahead.first(params.lookahead_edges);
  if (!zone_ahead(zones, ahead)) return std::nullopt;

  const DistanceTree tree(world.net(), v.destination, zone_costs(world.net(), zones, params));
  return alert_reroute(world, v, zones, params, tree);
}

std::optional<Route> alert_reroute(const World& world, const Vehicle& v, std::span<const CongestionZone> zones,
                                   const ZoneParams& params, const DistanceTree& tree) {
  if (zones.empty() || !v.in_network() || v.on_last_edge()) return std::nullopt;
  auto ahead = v.remaining_after_current();
  if (ahead.size() > params.lookahead_edges) ahead = ahead.first(params.lookahead_edges);
  if (!zone_ahead(zones, ahead)) return std::nullopt;
  Route r = centralized_route(world, v, tree);
  if (r.edges.size() == v.remaining_after_current().size() &&
      std::equal(r.edges.begin(), r.edges.end(), v.remaining_after_current().begin()))
    return std::nullopt;
  return r;
}

}  // namespace dtm
