#include "dtm/traffic.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#include "dtm/error.hpp"

namespace dtm {

void CostModelParams::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("cost model alpha must be positive");
  if (!(beta >= 1.0)) throw ConfigError("cost model beta must be at least 1");
  if (!(saturation_flow > 0.0)) throw ConfigError("saturation flow must be positive");
}

double edge_travel_time(const Edge& edge, double volume, const CostModelParams& params, std::uint32_t lanes) {
  const double t0 = edge.free_flow_time();
  if (volume <= 0.0) return t0;
  const double capacity = static_cast<double>(lanes) * edge.per_lane_capacity;
  return t0 * (1.0 + params.alpha * std::pow(volume / capacity, params.beta));
}

double edge_travel_time(const Edge& edge, double volume, const CostModelParams& params) {
  return edge_travel_time(edge, volume, params, edge.lanes);
}

double signal_wait_estimate(const SignalPlan& plan, EdgeId approach, double queue, const CostModelParams& params,
                            std::uint32_t lanes) {
  const double share = plan.green_share(approach);
  const double cycle_s = static_cast<double>(plan.cycle.count()) / 1000.0;
  const double red_wait = (1.0 - share) * cycle_s / 2.0;
  return red_wait + std::max(0.0, queue) / (params.saturation_flow * lanes);
}

std::string_view to_string(VehicleState s) {
  switch (s) {
    case VehicleState::pending: return "pending";
    case VehicleState::moving: return "moving";
    case VehicleState::queued: return "queued";
    case VehicleState::stopped: return "stopped";
    case VehicleState::arrived: return "arrived";
  }
  return "?";
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::depart: return "depart";
    case EventKind::enter_edge: return "enter_edge";
    case EventKind::join_queue: return "join_queue";
    case EventKind::arrive: return "arrive";
    case EventKind::stop: return "stop";
    case EventKind::release: return "release";
    case EventKind::reroute: return "reroute";
    case EventKind::lane_reversal: return "lane_reversal";
  }
  return "?";
}

Route Vehicle::remaining_route(const RoadNetwork& net) const {
  const Edge& e = net.edge(current_edge());
  const auto rest = remaining_after_current();
  return Route{e.to, destination, {rest.begin(), rest.end()}};
}

bool SignalState::is_green(EdgeId approach, std::int64_t t_ms) const {
  const auto phase = plan.phase_of(approach);
  if (!phase) return false;
  const std::int64_t n = static_cast<std::int64_t>(plan.phases.size());
  const std::int64_t lost_each = plan.lost_time.count() / n;
  std::int64_t offset = (t_ms - cycle_start_ms) % plan.cycle.count();
  if (offset < 0) offset += plan.cycle.count();
  std::int64_t start = 0;
  for (std::size_t i = 0; i < plan.phases.size(); ++i) {
    const std::int64_t g = plan.phases[i].green.count();
    if (i == *phase) return offset >= start && offset < start + g;
    start += g + lost_each;
  }
  return false;
}

World make_world(std::shared_ptr<const RoadNetwork> network, const WorldOptions& options) {
  options.cost.validate();
  if (!(options.seconds_per_tick > 0.0)) throw ConfigError("seconds_per_tick must be positive");
  World w;
  w.network = std::move(network);
  w.options = options;
  w.tick_ms = std::llround(options.seconds_per_tick * 1000.0);
  if (w.tick_ms <= 0) throw ConfigError("seconds_per_tick must be at least 1 ms");
  const RoadNetwork& net = *w.network;
  w.edges.resize(net.edge_count());
  for (const Edge& e : net.edges()) w.edges[e.id.index()].lane_counts.assign(e.lanes, 0);
  w.signals.resize(net.intersection_count());
  for (const auto& n : net.intersections()) {
    if (n.signalized && !net.incoming(n.id).empty()) w.signals[n.id.index()] = SignalState{initial_plan(net, n.id, options.timing), 0};
  }
  if (options.lane_reversal) {
    for (const Edge& e : net.edges())
      if (e.dual && e.id < *e.dual) w.pairs.push_back(DualEdgePair::from_edges(e, net.edge(*e.dual)));
  }
  return w;
}

void add_vehicles(World& world, std::vector<Vehicle> vehicles) {
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (vehicles[i].id.index() != i) throw StateError("vehicle ids must equal their index");
    if (vehicles[i].current_route.empty()) throw StateError("vehicle " + std::to_string(i) + " has an empty route");
  }
  world.vehicles = std::move(vehicles);
  world.departure_order.clear();
  for (const auto& v : world.vehicles) world.departure_order.push_back(v.id);
  std::stable_sort(world.departure_order.begin(), world.departure_order.end(), [&](VehicleId a, VehicleId b) {
    return world.vehicles[a.index()].departure_time < world.vehicles[b.index()].departure_time;
  });
  world.next_departure = 0;
}

Census census(const World& world) {
  Census c;
  for (const auto& v : world.vehicles) {
    switch (v.state) {
      case VehicleState::pending: ++c.pending; break;
      case VehicleState::moving:
      case VehicleState::queued: ++c.in_flight; break;
      case VehicleState::stopped: ++c.stopped; break;
      case VehicleState::arrived: ++c.arrived; break;
    }
  }
  return c;
}

namespace {

std::optional<std::uint32_t> open_lane(const World& world, EdgeId e) {
  const EdgeState& st = world.edges[e.index()];
  const std::uint32_t cap = world.net().edge(e).per_lane_capacity;
  std::optional<std::uint32_t> best;
  for (std::uint32_t l = 0; l < st.lanes(); ++l) {
    if (st.closed_lane == l || st.lane_counts[l] >= cap) continue;
    if (!best || st.lane_counts[l] < st.lane_counts[*best]) best = l;
  }
  return best;
}

class Stepper {
 public:
  Stepper(World& w, Tick tick) : w_(w), net_(w.net()), tick_(tick) {}

  std::vector<Event> run() {
    roll_signals();
    release_stopped();
    departures();
    movement();
    discharge();
    lane_reversal();
    statistics();
    w_.last_tick = tick_;
    return std::move(events_);
  }

 private:
  World& w_;
  const RoadNetwork& net_;
  Tick tick_;
  std::vector<Event> events_;

  void emit(EventKind k, const Vehicle& v, EdgeId e) { events_.push_back({tick_, k, v.id, e}); }

  void admit(Vehicle& v, EdgeId e, std::uint32_t lane) {
    EdgeState& st = w_.edges[e.index()];
    st.occupants.push_back(v.id);
    ++st.lane_counts[lane];
    ++st.entered_window;
    ++st.entered_cycle;
    st.peak = std::max(st.peak, st.count());
    v.lane = lane;
    v.progress = 0.0;
    v.moved_tick = tick_;
    emit(EventKind::enter_edge, v, e);
  }

  void leave(Vehicle& v) {
    const EdgeId e = v.current_edge();
    EdgeState& st = w_.edges[e.index()];
    auto it = std::find(st.occupants.begin(), st.occupants.end(), v.id);
    assert(it != st.occupants.end());
    *it = st.occupants.back();
    st.occupants.pop_back();
    --st.lane_counts[v.lane];
    v.distance_m += net_.edge(e).length_m;
  }

  void arrive(Vehicle& v) {
    leave(v);
    v.state = VehicleState::arrived;
    v.arrived_at = tick_ + 1;
    v.speed = 0.0;
    ++w_.arrived;
    emit(EventKind::arrive, v, v.current_edge());
  }

  /// Moves a vehicle at the end of its edge onto the next one. False if blocked.
  bool advance(Vehicle& v) {
    const EdgeId next = v.current_route.edges[v.route_pos + 1];
    const auto lane = open_lane(w_, next);
    if (!lane) {
      ++w_.edges[next.index()].blocked_window;
      return false;
    }
    leave(v);
    ++v.route_pos;
    v.state = VehicleState::moving;
    admit(v, next, *lane);
    return true;
  }

  void roll_signals() {
    const std::int64_t t_ms = tick_ * w_.tick_ms;
    for (auto& slot : w_.signals) {
      if (!slot) continue;
      SignalState& s = *slot;
      while (t_ms >= s.cycle_start_ms + s.plan.cycle.count()) {
        s.cycle_start_ms += s.plan.cycle.count();
        if (w_.options.dlg_screening) screen(s);
        for (const auto& p : s.plan.phases)
          for (EdgeId a : p.approaches) w_.edges[a.index()].entered_cycle = 0;
        if (w_.options.signal_mode == SignalMode::adaptive) retime(s);
      }
    }
  }

  void retime(SignalState& s) {
    std::map<EdgeId, std::uint32_t> counts;
    for (const auto& p : s.plan.phases)
      for (EdgeId a : p.approaches) counts[a] = w_.edges[a.index()].count();
    s.plan = atlc_update(s.plan, counts);
    if (w_.options.record_control) {
      std::ostringstream in, act;
      for (auto& [e, c] : counts) in << (in.tellp() > 0 ? " " : "") << e.value << ':' << c;
      for (auto& p : s.plan.phases) act << (act.tellp() > 0 ? " " : "") << p.green.count();
      w_.control_log.push_back({tick_, "atlc-" + std::to_string(s.plan.intersection.value), "atlc", act.str(), in.str()});
    }
  }

  void screen(const SignalState& s) {
    std::map<EdgeId, double> volumes;
    std::vector<LaneGroup> groups;
    for (const auto& p : s.plan.phases) {
      for (EdgeId a : p.approaches) {
        const auto lanes = w_.lanes(a);
        volumes[a] = w_.edges[a.index()].entered_cycle;
        groups.push_back({a, lanes, w_.options.cost.saturation_flow * lanes * (p.green.count() / 1000.0)});
      }
    }
    const DlgReport r = dlg_screen(s.plan.intersection, volumes, groups, w_.options.dlg);
    if (w_.options.record_control)
      w_.control_log.push_back({tick_, "dlg-" + std::to_string(s.plan.intersection.value), "dlg",
                                r.flagged ? "flag" : "none", r.reason});
  }

  void release_stopped() {
    auto& list = w_.stopped;
    for (auto it = list.begin(); it != list.end();) {
      Vehicle& v = w_.vehicles[it->index()];
      if (v.state == VehicleState::stopped && tick_ > v.stopped_until) {
        v.state = VehicleState::moving;
        emit(EventKind::release, v, v.current_edge());
        it = list.erase(it);
      } else {
        ++it;
      }
    }
  }

  void departures() {
    while (w_.next_departure < w_.departure_order.size()) {
      const VehicleId id = w_.departure_order[w_.next_departure];
      if (w_.vehicles[id.index()].departure_time > tick_) break;
      w_.waiting.push_back(id);
      ++w_.next_departure;
    }
    std::vector<VehicleId> still;
    for (VehicleId id : w_.waiting) {
      Vehicle& v = w_.vehicles[id.index()];
      const EdgeId first = v.current_route.edges[v.route_pos];
      if (auto lane = open_lane(w_, first)) {
        v.state = VehicleState::moving;
        v.departed_at = tick_;
        ++w_.departed;
        emit(EventKind::depart, v, first);
        admit(v, first, *lane);
        v.moved_tick = -1;  // moves during this tick
      } else {
        ++w_.edges[first.index()].blocked_window;
        still.push_back(id);
      }
    }
    w_.waiting = std::move(still);
  }

  void movement() {
    const double spt = w_.seconds_per_tick();
    std::vector<double> factor(net_.edge_count());
    for (const Edge& e : net_.edges()) {
      const auto& st = w_.edges[e.id.index()];
      factor[e.id.index()] = e.free_flow_time() / edge_travel_time(e, st.count(), w_.options.cost, st.lanes());
    }
    std::vector<double> block(net_.edge_count(), std::numeric_limits<double>::infinity());
    for (VehicleId id : w_.stopped) {
      const Vehicle& v = w_.vehicles[id.index()];
      auto& b = block[v.current_edge().index()];
      b = std::min(b, v.progress);
    }

    struct Arrival {
      double at;
      VehicleId id;
    };
    std::vector<Arrival> arrivals;

    for (Vehicle& v : w_.vehicles) {
      if (v.state != VehicleState::moving || v.moved_tick == tick_) continue;
      v.moved_tick = tick_;
      double budget = 1.0;
      double travelled = 0.0;
      for (;;) {
        const EdgeId eid = v.current_edge();
        const Edge& e = net_.edge(eid);
        const double step = e.free_flow_speed * factor[eid.index()] * spt * budget / e.length_m;
        const double cap = v.progress <= block[eid.index()] ? block[eid.index()] : 1.0;
        if (v.progress + step < 1.0 || cap < 1.0) {
          const double np = std::min(v.progress + step, std::max(v.progress, cap));
          travelled += (np - v.progress) * e.length_m;
          v.progress = np;
          break;
        }
        const double used = (1.0 - v.progress) / step * budget;
        travelled += (1.0 - v.progress) * e.length_m;
        v.progress = 1.0;
        budget -= used;
        const NodeId node = e.to;
        if (w_.signals[node.index()]) {
          v.state = VehicleState::queued;
          arrivals.push_back({1.0 - budget, v.id});
          break;
        }
        if (v.on_last_edge()) {
          arrive(v);
          break;
        }
        if (!advance(v)) {
          v.state = VehicleState::queued;
          w_.edges[eid.index()].queue.push_back(v.id);
          emit(EventKind::join_queue, v, eid);
          break;
        }
        if (budget <= 0.0) break;
      }
      v.speed = travelled / spt;
    }
    std::sort(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
      return a.at != b.at ? a.at < b.at : a.id < b.id;
    });
    for (const auto& a : arrivals) {
      Vehicle& v = w_.vehicles[a.id.index()];
      w_.edges[v.current_edge().index()].queue.push_back(v.id);
      emit(EventKind::join_queue, v, v.current_edge());
    }
  }

  void discharge() {
    const std::int64_t t_ms = tick_ * w_.tick_ms;
    const double spt = w_.seconds_per_tick();
    for (const auto& node : net_.intersections()) {
      const auto& signal = w_.signals[node.id.index()];
      for (EdgeId a : net_.incoming(node.id)) {
        EdgeState& st = w_.edges[a.index()];
        if (st.queue.empty()) {
          st.credit = 0.0;
          continue;
        }
        double rate = std::numeric_limits<double>::infinity();
        if (signal) {
          if (!signal->is_green(a, t_ms)) {
            st.credit = 0.0;
            continue;
          }
          rate = w_.options.cost.saturation_flow * st.lanes() * spt;
          st.credit += rate;
        } else {
          st.credit = rate;
        }
        while (!st.queue.empty() && st.credit >= 1.0) {
          Vehicle& v = w_.vehicles[st.queue.front().index()];
          if (v.on_last_edge()) {
            st.queue.pop_front();
            arrive(v);
          } else if (advance(v)) {
            st.queue.pop_front();
          } else {
            break;
          }
          st.credit -= 1.0;
        }
        st.credit = std::min(st.credit, std::max(1.0, signal ? rate : 1.0));
      }
    }
  }

  void lane_reversal() {
    if (w_.pairs.empty()) return;
    const DlrParams& params = w_.options.dlr;
    for (std::size_t i = 0; i < w_.pairs.size(); ++i) {
      DualEdgePair& p = w_.pairs[i];
      if (p.stable()) continue;
      const PairSide donor = p.clearing->donor;
      EdgeState& d = w_.edges[p.edge(donor).index()];
      const std::uint32_t occupancy = d.lane_counts[p.clearing->lane];
      if (dlr_commit(p, occupancy, tick_, params) == DlrCommit::committed) {
        EdgeState& r = w_.edges[p.edge(donor == PairSide::a ? PairSide::b : PairSide::a).index()];
        d.lane_counts.pop_back();
        d.closed_lane.reset();
        r.lane_counts.push_back(0);
        events_.push_back({tick_, EventKind::lane_reversal, VehicleId(0), p.edge(donor)});
        log_pair(i, "commit", 0, 0);
      }
    }
    if ((tick_ + 1) % params.window != 0) return;
    for (std::size_t i = 0; i < w_.pairs.size(); ++i) {
      DualEdgePair& p = w_.pairs[i];
      EdgeState& a = w_.edges[p.edge_a.index()];
      EdgeState& b = w_.edges[p.edge_b.index()];
      const double demand_a = a.entered_window + a.blocked_window;
      const double demand_b = b.entered_window + b.blocked_window;
      a.entered_window = a.blocked_window = 0;
      b.entered_window = b.blocked_window = 0;
      const DlrAction action = dlr_check(p, demand_a, demand_b, tick_, params);
      if (action == DlrAction::none) continue;
      dlr_begin(p, action, tick_);
      w_.edges[p.edge(p.clearing->donor).index()].closed_lane = p.clearing->lane;
      log_pair(i, action == DlrAction::reverse_toward_a ? "begin-toward-a" : "begin-toward-b", demand_a, demand_b);
    }
  }

  void log_pair(std::size_t i, const std::string& action, double da, double db) {
    if (!w_.options.record_control) return;
    const auto& p = w_.pairs[i];
    std::ostringstream in;
    in << "demand " << da << '/' << db << " lanes " << p.lanes_a << '/' << p.lanes_b;
    w_.control_log.push_back(
        {tick_, "dlr-" + std::to_string(p.edge_a.value) + "-" + std::to_string(p.edge_b.value), "dlr", action, in.str()});
  }

  void statistics() {
    std::vector<double> speed_sum(net_.edge_count(), 0.0);
    for (const Vehicle& v : w_.vehicles) {
      if (!v.in_network()) continue;
      if (v.state == VehicleState::moving) speed_sum[v.current_edge().index()] += v.speed;
    }
    for (const Edge& e : net_.edges()) {
      EdgeState& st = w_.edges[e.id.index()];
      st.mean_speed_fraction =
          st.occupants.empty() ? 1.0 : speed_sum[e.id.index()] / (st.count() * e.free_flow_speed);
    }
  }
};

}  // namespace

bool can_admit(const World& world, EdgeId edge) { return open_lane(world, edge).has_value(); }

std::vector<Event> step(World& world, Tick tick) {
  if (tick != world.last_tick + 1)
    throw StateError("step expects tick " + std::to_string(world.last_tick + 1) + ", got " + std::to_string(tick));
  return Stepper(world, tick).run();
}

void switch_route(World& world, Vehicle& vehicle, const Route& continuation) {
  const RoadNetwork& net = world.net();
  if (!vehicle.in_network()) throw StateError("only vehicles on the road can switch routes");
  const Edge& cur = net.edge(vehicle.current_edge());
  if (continuation.origin != cur.to || continuation.destination != vehicle.destination || !net.is_valid(continuation))
    throw StateError("continuation does not start at the end of the current edge");
  Route next{cur.from, vehicle.destination, {cur.id}};
  next.edges.insert(next.edges.end(), continuation.edges.begin(), continuation.edges.end());
  vehicle.current_route = std::move(next);
  vehicle.route_pos = 0;
  ++vehicle.switches;
}

void stop_vehicle(World& world, Vehicle& vehicle, Tick until) {
  if (vehicle.state == VehicleState::queued) {
    auto& q = world.edges[vehicle.current_edge().index()].queue;
    q.erase(std::find(q.begin(), q.end(), vehicle.id));
  } else if (vehicle.state != VehicleState::moving) {
    throw StateError("vehicle " + std::to_string(vehicle.id.value) + " is not on the road");
  }
  vehicle.state = VehicleState::stopped;
  vehicle.stopped_until = until;
  vehicle.speed = 0.0;
  world.stopped.push_back(vehicle.id);
}

}  // namespace dtm
