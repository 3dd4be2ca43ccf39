#include "dtm/vam.hpp"

#include <algorithm>
#include <string>

#include "dtm/error.hpp"
#include "dtm/rng.hpp"

namespace dtm {

std::string_view to_string(UnknownEdgePolicy p) {
  return p == UnknownEdgePolicy::free_flow ? "free-flow" : "last-known";
}

UnknownEdgePolicy parse_unknown_edge_policy(std::string_view text) {
  if (text == "free-flow") return UnknownEdgePolicy::free_flow;
  if (text == "last-known") return UnknownEdgePolicy::last_known;
  throw ConfigError("unknown_edge_policy must be free-flow or last-known, got '" + std::string(text) + "'");
}

void RoutingParams::validate() const {
  if (!(compliance >= 0.0 && compliance <= 1.0)) throw ConfigError("compliance P_R must be in [0, 1]");
  if (!(switch_margin >= 0.0)) throw ConfigError("switch margin must be >= 0");
}

RouteEstimate estimate_route(const RoadNetwork& net, const Route& route, const EdgeObservations& obs,
                             SignalPlans plans, const RoutingParams& params, const CostModelParams& cost) {
  RouteEstimate est;
  est.route = route;
  est.breakdown.reserve(route.edges.size());
  std::size_t observed = 0;
  for (EdgeId e : route.edges) {
    if (!net.contains(e)) throw RoutingError("route references unknown edge " + std::to_string(e.value));
    const Edge& edge = net.edge(e);
    std::uint32_t count = e.index() < obs.counts.size() ? obs.counts[e.index()] : 0;
    const bool seen = count > 0;
    if (!seen && params.unknown_edge_policy == UnknownEdgePolicy::last_known && e.index() < obs.last_known.size())
      count = obs.last_known[e.index()];
    EdgeEstimate ee{e, edge_travel_time(edge, count, cost), 0.0, seen};
    if (edge.to.index() < plans.size() && plans[edge.to.index()])
      ee.signal_wait_s = signal_wait_estimate(*plans[edge.to.index()], e, count, cost, edge.lanes);
    est.total_delay += ee.travel_s + ee.signal_wait_s;
    observed += seen ? 1 : 0;
    est.breakdown.push_back(ee);
  }
  est.data_coverage = route.edges.empty() ? 0.0 : static_cast<double>(observed) / route.edges.size();
  return est;
}

Decision decide(const RouteEstimate& current, std::span<const RouteEstimate> alternatives,
                const RoutingParams& params, double draw) {
  Decision d;
  d.current = current.total_delay;
  d.best = current.total_delay;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < alternatives.size(); ++i)
    if (!best || alternatives[i].total_delay < alternatives[*best].total_delay) best = i;
  if (!best) return d;
  d.best = alternatives[*best].total_delay;
  if (d.best < (1.0 - params.switch_margin) * d.current) {
    d.recommended = true;
    d.choice = best;
    d.switched = draw < params.compliance;
  }
  return d;
}

double compliance_draw(std::uint64_t stream, std::uint64_t index) {
  RandomStream s(stable_hash({stream, index}));
  return s.uniform01();
}

}  // namespace dtm
