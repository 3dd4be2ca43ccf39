#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtm/control.hpp"
#include "dtm/network.hpp"

namespace dtm {

/// Volume-delay law parameters: t = t0 * (1 + alpha * (v / c)^beta).
struct CostModelParams {
  double alpha = 0.15;
  double beta = 4.0;
  double saturation_flow = 0.5;  ///< vehicles per green-second per lane

  void validate() const;
};

/// Congested traversal time (s) of `edge` carrying `volume` vehicles.
double edge_travel_time(const Edge& edge, double volume, const CostModelParams& params);
/// Same with a lane count that differs from the static description.
double edge_travel_time(const Edge& edge, double volume, const CostModelParams& params, std::uint32_t lanes);

/// Expected wait (s) at the downstream signal of `approach`: half the red
/// time plus the time to discharge `queue` vehicles at saturation flow.
/// Throws StateError if the approach is in no phase of `plan`.
double signal_wait_estimate(const SignalPlan& plan, EdgeId approach, double queue, const CostModelParams& params,
                            std::uint32_t lanes);

enum class VehicleState : std::uint8_t { pending, moving, queued, stopped, arrived };

std::string_view to_string(VehicleState s);

struct Vehicle {
  VehicleId id;
  NodeId origin;
  NodeId destination;
  Tick departure_time = 0;

  Route current_route;          ///< R_C; current_route.edges[route_pos] is the occupied edge
  std::size_t route_pos = 0;
  std::shared_ptr<const std::vector<Route>> optional_routes;  ///< R_O, each starting at optional_from; may be null
  NodeId optional_from;

  VehicleState state = VehicleState::pending;
  double progress = 0.0;
  Tick stopped_until = 0;
  std::optional<Tick> arrived_at;
  std::uint64_t compliance_stream = 0;  ///< substream seed for compliance draws
  std::uint64_t draws = 0;              ///< compliance draws consumed so far

  std::optional<Tick> departed_at;
  std::uint32_t lane = 0;
  double speed = 0.0;       ///< m/s during the last tick
  double distance_m = 0.0;  ///< completed edge lengths
  std::uint32_t switches = 0;
  Tick moved_tick = -1;

  bool in_network() const {
    return state == VehicleState::moving || state == VehicleState::queued || state == VehicleState::stopped;
  }
  EdgeId current_edge() const { return current_route.edges[route_pos]; }
  bool on_last_edge() const { return route_pos + 1 == current_route.edges.size(); }
  /// Edges after the occupied one.
  std::span<const EdgeId> remaining_after_current() const {
    return std::span<const EdgeId>(current_route.edges).subspan(route_pos + 1);
  }
  /// Remaining R_C from the end of the occupied edge, as a route.
  Route remaining_route(const RoadNetwork& net) const;
};

struct EdgeState {
  std::vector<VehicleId> occupants;  ///< every vehicle positioned on the edge
  std::deque<VehicleId> queue;       ///< FIFO at the downstream intersection
  std::vector<std::uint32_t> lane_counts;
  std::optional<std::uint32_t> closed_lane;  ///< lane being cleared for reversal
  double credit = 0.0;
  std::uint32_t entered_window = 0;  ///< admissions since the last lane-reversal check
  std::uint32_t blocked_window = 0;  ///< refused admissions since the last check
  std::uint32_t entered_cycle = 0;   ///< admissions since the downstream signal's last cycle
  std::uint32_t peak = 0;
  double mean_speed_fraction = 1.0;  ///< mean speed / free-flow speed over occupants (1 when empty)

  std::uint32_t count() const { return static_cast<std::uint32_t>(occupants.size()); }
  std::uint32_t lanes() const { return static_cast<std::uint32_t>(lane_counts.size()); }
};

struct SignalState {
  SignalPlan plan;
  std::int64_t cycle_start_ms = 0;

  bool is_green(EdgeId approach, std::int64_t t_ms) const;
};

enum class SignalMode : std::uint8_t { fixed, adaptive };

struct ControlRecord {
  Tick tick;
  std::string controller;
  std::string kind;
  std::string action;
  std::string inputs;
};

struct WorldOptions {
  CostModelParams cost;
  double seconds_per_tick = 1.0;
  SignalTiming timing;
  SignalMode signal_mode = SignalMode::adaptive;
  bool lane_reversal = false;
  DlrParams dlr;
  bool dlg_screening = false;
  DlgThresholds dlg;
  bool record_control = false;
};

/// Complete mutable simulation state. Single writer.
struct World {
  std::shared_ptr<const RoadNetwork> network;
  WorldOptions options;
  std::int64_t tick_ms = 1000;

  std::vector<Vehicle> vehicles;  ///< index == id
  std::vector<EdgeState> edges;   ///< index == edge id
  std::vector<std::optional<SignalState>> signals;  ///< per intersection
  std::vector<DualEdgePair> pairs;

  std::vector<VehicleId> departure_order;  ///< by (departure_time, id)
  std::size_t next_departure = 0;
  std::vector<VehicleId> waiting;           ///< due but not yet admitted
  std::vector<VehicleId> stopped;

  Tick last_tick = -1;
  std::size_t departed = 0;
  std::size_t arrived = 0;
  std::vector<ControlRecord> control_log;

  const RoadNetwork& net() const { return *network; }
  double seconds_per_tick() const { return static_cast<double>(tick_ms) / 1000.0; }
  bool finished() const { return arrived == vehicles.size(); }
  std::uint32_t lanes(EdgeId e) const { return edges[e.index()].lanes(); }
  /// Downstream signal plan of an edge, or nullptr if unsignalized.
  const SignalPlan* plan_at(NodeId n) const { return signals[n.index()] ? &signals[n.index()]->plan : nullptr; }
};

/// Fresh world over `network` with no vehicles.
World make_world(std::shared_ptr<const RoadNetwork> network, const WorldOptions& options);

/// Registers vehicles (ids must equal their index) and orders departures.
void add_vehicles(World& world, std::vector<Vehicle> vehicles);

struct Census {
  std::size_t pending = 0;
  std::size_t in_flight = 0;  ///< moving or queued
  std::size_t stopped = 0;
  std::size_t arrived = 0;
};
Census census(const World& world);

enum class EventKind : std::uint8_t { depart, enter_edge, join_queue, arrive, stop, release, reroute, lane_reversal };

std::string_view to_string(EventKind k);

struct Event {
  Tick tick;
  EventKind kind;
  VehicleId vehicle;
  EdgeId edge;
};

/// Advances the world by one tick. `tick` must be the previous tick + 1.
std::vector<Event> step(World& world, Tick tick);

/// True if a vehicle could be admitted onto `edge` now.
bool can_admit(const World& world, EdgeId edge);

/// Replaces the remainder of the vehicle's route after its current edge with
/// `continuation`, which must start at the end of the current edge and reach
/// the destination.
void switch_route(World& world, Vehicle& vehicle, const Route& continuation);

/// Stops an in-network vehicle in place until `until` (inclusive).
void stop_vehicle(World& world, Vehicle& vehicle, Tick until);

}  // namespace dtm
