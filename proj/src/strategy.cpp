#include "dtm/strategy.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "dtm/error.hpp"

namespace dtm {

namespace {

bool epoch(Tick tick, Tick interval) { return tick % interval == 0; }

/// Vehicles that can still pick a different continuation.
bool can_reroute(const Vehicle& v) { return v.in_network() && !v.on_last_edge(); }

std::vector<const SignalPlan*> signal_plans(const World& w) {
  std::vector<const SignalPlan*> plans(w.signals.size(), nullptr);
  for (std::size_t i = 0; i < plans.size(); ++i)
    if (w.signals[i]) plans[i] = &w.signals[i]->plan;
  return plans;
}

class NoAction final : public Strategy {
 public:
  StrategyKind kind() const override { return StrategyKind::none; }
  void before_step(World&, Tick) override {}
};

class Vam final : public Strategy {
 public:
  Vam(const ScenarioConfig& c, RouteCache& routes) : comms_(c.comms), params_(c.routing), routes_(routes) {}

  StrategyKind kind() const override { return StrategyKind::vam; }

  void before_step(World& w, Tick tick) override {
    const RoadNetwork& net = w.net();
    if (!board_) {
      board_.emplace(w.vehicles.size(), net.edge_count(), comms_);
      scratch_.assign(net.edge_count(), 0);
      if (params_.unknown_edge_policy == UnknownEdgePolicy::last_known) last_known_.resize(w.vehicles.size());
    }
    board_->round(w.vehicles, net, tick);
    if (board_->broadcasters().empty()) return;

    const auto plans = signal_plans(w);
    const CostModelParams& cost = w.options.cost;
    for (VehicleId id : board_->broadcasters()) {
      Vehicle& v = w.vehicles[id.index()];
      if (!can_reroute(v)) continue;
      board_->counts_for(v.id, scratch_);
      EdgeObservations obs{scratch_, {}};
      if (!last_known_.empty()) {
        auto& lk = last_known_[v.id.index()];
        if (lk.empty()) lk.assign(net.edge_count(), 0);
        board_->for_each_heard(v.id, [&](const BeaconMessage& m) {
          for (EdgeId x : m.next_edges) lk[x.index()] = scratch_[x.index()];
        });
        obs.last_known = lk;
      }

      const Edge& cur = net.edge(v.current_edge());
      const auto alts = routes_.branches(cur.to, v.destination, cur.from);
      const RouteEstimate current = estimate_route(net, v.remaining_route(net), obs, plans, params_, cost);
      std::vector<RouteEstimate> estimates;
      estimates.reserve(alts->size());
      for (const Route& r : *alts) estimates.push_back(estimate_route(net, r, obs, plans, params_, cost));

      const Decision pre = decide(current, estimates, params_, 1.0);
      double draw = 1.0;
      if (pre.recommended) draw = compliance_draw(v.compliance_stream, v.draws++);
      const Decision dec = decide(current, estimates, params_, draw);
      if (dec.switched) switch_route(w, v, (*alts)[*dec.choice]);
      v.optional_routes = alts;
      v.optional_from = cur.to;
      if (record_)
        decisions_.push_back({tick, v.id, dec.current, dec.best, dec.recommended, dec.switched});
    }
  }

 private:
  CommsParams comms_;
  RoutingParams params_;
  RouteCache& routes_;
  std::optional<BeaconBoard> board_;
  std::vector<std::uint32_t> scratch_;
  std::vector<std::vector<std::uint32_t>> last_known_;
};

/// Omniscient routing on exact global loads. Routes every vehicle at its
/// departure and re-plans every I_T ticks. Full compliance.
class Centralized final : public Strategy {
 public:
  Centralized(const ScenarioConfig& c) : comms_(c.comms), margin_(c.routing.switch_margin) {}

  StrategyKind kind() const override { return StrategyKind::centralized; }

  void before_step(World& w, Tick tick) override {
    const bool is_epoch = epoch(tick, comms_.interval);
    std::vector<VehicleId> leaving;
    for (std::size_t i = w.next_departure; i < w.departure_order.size(); ++i) {
      const VehicleId id = w.departure_order[i];
      if (w.vehicles[id.index()].departure_time != tick) break;
      leaving.push_back(id);
    }
    if (!is_epoch && leaving.empty()) return;

    loads_ = next_edge_loads(w, comms_.horizon);
    costs_ = congested_costs(w, loads_);
    trees_.clear();

    for (VehicleId id : leaving) {
      Vehicle& v = w.vehicles[id.index()];
      const Route r = *tree(w, v.destination).route_from(v.origin);
      if (r != v.current_route) {
        set_loads(w, v, -1);
        v.current_route = r;
        v.route_pos = 0;
        ++v.switches;
        set_loads(w, v, +1);
      }
    }
    if (!is_epoch) return;

    const RoadNetwork& net = w.net();
    for (Vehicle& v : w.vehicles) {
      if (!can_reroute(v)) continue;
      const Edge& cur = net.edge(v.current_edge());
      // Current continuation without the vehicle's own contribution.
      double current = 0.0;
      const auto rest = v.remaining_after_current();
      for (std::size_t i = 0; i < rest.size(); ++i) {
        const bool own = i + 1 < comms_.horizon;
        current += own ? cost_without_one(w, rest[i]) : costs_[rest[i].index()];
      }
      auto best = tree(w, v.destination).route_from(cur.to, cur.from);
      if (!best) continue;
      const double best_cost = route_cost(*best, costs_);
      const bool recommended = best_cost < (1.0 - margin_) * current &&
                               !std::equal(best->edges.begin(), best->edges.end(), rest.begin(), rest.end());
      if (recommended) {
        set_loads(w, v, -1);
        switch_route(w, v, *best);
        set_loads(w, v, +1);
      }
      if (record_) decisions_.push_back({tick, v.id, current, best_cost, recommended, recommended});
    }
  }

 private:
  CommsParams comms_;
  double margin_;
  std::vector<std::uint32_t> loads_;
  std::vector<double> costs_;
  std::map<std::uint32_t, DistanceTree> trees_;

  const DistanceTree& tree(const World& w, NodeId dest) {
    auto it = trees_.find(dest.value);
    if (it == trees_.end()) it = trees_.emplace(dest.value, DistanceTree(w.net(), dest, costs_)).first;
    return it->second;
  }

  double edge_cost(const World& w, EdgeId e, double load) const {
    const Edge& edge = w.net().edge(e);
    const std::uint32_t lanes = w.lanes(e);
    double c = edge_travel_time(edge, load, w.options.cost, lanes);
    if (const SignalPlan* plan = w.plan_at(edge.to)) c += signal_wait_estimate(*plan, e, load, w.options.cost, lanes);
    return c;
  }

  double cost_without_one(const World& w, EdgeId e) const {
    const double load = loads_[e.index()];
    return edge_cost(w, e, load > 0 ? load - 1 : 0);
  }

  /// Adds or removes the vehicle's next-N footprint and refreshes the
  /// affected costs. Any change invalidates the cached trees.
  void set_loads(const World& w, const Vehicle& v, int delta) {
    const auto& edges = v.current_route.edges;
    const std::size_t end = std::min(edges.size(), v.route_pos + comms_.horizon);
    const bool counted = v.in_network();
    if (!counted) return;  // pending vehicles carry no load yet
    for (std::size_t i = v.route_pos; i < end; ++i) {
      auto& l = loads_[edges[i].index()];
      l = delta < 0 ? (l > 0 ? l - 1 : 0) : l + 1;
      costs_[edges[i].index()] = edge_cost(w, edges[i], l);
    }
    trees_.clear();
  }
};

/// Alert-on-congestion baseline: reroute around active zones once they are
/// within the alert distance ahead. Follows alerts with probability P_R.
class Alert final : public Strategy {
 public:
  Alert(const ScenarioConfig& c, const RoadNetwork& net)
      : interval_(c.comms.interval), params_(c.routing), monitor_(net, c.zones) {}

  StrategyKind kind() const override { return StrategyKind::alert; }

  void before_step(World& w, Tick tick) override {
    if (!epoch(tick, interval_) || monitor_.active().empty()) return;
    for (Vehicle& v : w.vehicles) {
      if (!can_reroute(v)) continue;
      auto ahead = v.remaining_after_current();
      if (ahead.size() > monitor_.params().lookahead_edges) ahead = ahead.first(monitor_.params().lookahead_edges);
      if (!zone_ahead(monitor_.active(), ahead)) continue;
      auto r = alert_reroute(w, v, monitor_.active(), monitor_.params(), tree(w, v.destination));
      if (!r) continue;
      const double draw = compliance_draw(v.compliance_stream, v.draws++);
      const bool complied = draw < params_.compliance;
      if (record_) {
        const auto& ff = w.net().free_flow_costs();
        double cur = 0.0;
        for (EdgeId e : v.remaining_after_current()) cur += ff[e.index()];
        decisions_.push_back({tick, v.id, cur, route_cost(*r, ff), true, complied});
      }
      if (complied) switch_route(w, v, *r);
    }
  }

  void after_step(const World& w, Tick tick, std::span<const Event>) override { monitor_.observe(w, tick); }

 private:
  Tick interval_;
  RoutingParams params_;
  ZoneMonitor monitor_;
  std::uint64_t trees_version_ = ~std::uint64_t{0};
  std::vector<double> costs_;
  std::map<std::uint32_t, DistanceTree> trees_;

  const DistanceTree& tree(const World& w, NodeId dest) {
    if (trees_version_ != monitor_.version()) {
      trees_.clear();
      costs_ = zone_costs(w.net(), monitor_.active(), monitor_.params());
      trees_version_ = monitor_.version();
    }
    auto it = trees_.find(dest.value);
    if (it == trees_.end()) it = trees_.emplace(dest.value, DistanceTree(w.net(), dest, costs_)).first;
    return it->second;
  }
};

}  // namespace

std::unique_ptr<Strategy> make_strategy(const ScenarioConfig& c, RouteCache& routes) {
  switch (c.strategy) {
    case StrategyKind::vam: return std::make_unique<Vam>(c, routes);
    case StrategyKind::centralized: return std::make_unique<Centralized>(c);
    case StrategyKind::alert: return std::make_unique<Alert>(c, routes.network());
    case StrategyKind::none: return std::make_unique<NoAction>();
  }
  throw ConfigError("unknown strategy");
}

}  // namespace dtm
