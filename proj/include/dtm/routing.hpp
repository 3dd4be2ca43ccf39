#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "dtm/network.hpp"

namespace dtm {

/// Per-edge non-negative cost, indexed by edge id.
using EdgeCosts = std::span<const double>;

/// Sum of edge costs taken left to right along the route.
double route_cost(const Route& route, EdgeCosts cost);

/// Total order used for every ranked route list: by cost, then by the edge
/// id sequence (lexicographic).
bool route_before(double cost_a, const Route& a, double cost_b, const Route& b);

/// Least-cost route; ties resolve to the lexicographically smallest edge id
/// sequence. Returns nullopt if the destination is unreachable. Throws
/// RoutingError for unknown intersections.
std::optional<Route> shortest_route(const RoadNetwork& net, NodeId origin, NodeId destination, EdgeCosts cost);

/// The `count` best loop-free routes in (cost, lexicographic) order, the
/// first being shortest_route. Yen's algorithm.
std::vector<Route> k_shortest_routes(const RoadNetwork& net, NodeId origin, NodeId destination, std::size_t count,
                                     EdgeCosts cost);

/// Up to k loop-free alternatives to the shortest route, nondecreasing in
/// cost. Throws RoutingError if the destination is unreachable.
std::vector<Route> optional_routes(const RoadNetwork& net, NodeId origin, NodeId destination, std::size_t k,
                                   EdgeCosts cost);

/// One route per outgoing branch of `from`: the least-cost loop-free
/// continuation to `destination` that starts with that edge. Routes never
/// visit `avoid` (the intersection a vehicle just came from). Sorted in
/// (cost, lexicographic) order.
std::vector<Route> branch_routes(const RoadNetwork& net, NodeId from, NodeId destination, std::optional<NodeId> avoid,
                                 EdgeCosts cost);

/// Least-cost distances from every intersection to one destination, reusable
/// across many origins under a fixed cost vector.
class DistanceTree {
 public:
  DistanceTree(const RoadNetwork& net, NodeId destination, std::vector<double> cost);

  NodeId destination() const { return destination_; }
  EdgeCosts costs() const { return cost_; }
  double distance(NodeId from) const { return dist_[from.index()]; }
  /// Same result as shortest_route(net, from, destination, costs()). When
  /// `avoid` is given and the least-cost route would pass through it, falls
  /// back to the least-cost route that does not (nullopt if none exists).
  std::optional<Route> route_from(NodeId from, std::optional<NodeId> avoid = std::nullopt) const;

 private:
  const RoadNetwork* net_;
  NodeId destination_;
  std::vector<double> cost_;
  std::vector<double> dist_;
};

/// Free-flow shortest route plus up to k alternatives for one O-D pair.
struct RoutePlan {
  std::optional<Route> shortest;  ///< nullopt if unreachable
  std::vector<Route> alternatives;
};

/// Shares free-flow route computations across vehicles and replications.
/// The network must outlive the cache. Thread-safe.
class RouteCache {
 public:
  explicit RouteCache(const RoadNetwork& net);

  const RoadNetwork& network() const { return net_; }
  EdgeCosts free_flow() const { return free_flow_; }

  std::shared_ptr<const std::vector<Route>> optional(NodeId origin, NodeId destination, std::size_t k);
  std::shared_ptr<const RoutePlan> plan(NodeId origin, NodeId destination, std::size_t k);
  std::shared_ptr<const std::vector<Route>> branches(NodeId from, NodeId destination, std::optional<NodeId> avoid);

 private:
  const RoadNetwork& net_;
  std::vector<double> free_flow_;
  std::mutex mutex_;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::size_t>, std::shared_ptr<const std::vector<Route>>> optional_;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::shared_ptr<const std::vector<Route>>>
      branches_;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::size_t>, std::shared_ptr<const RoutePlan>> plans_;
};

}  // namespace dtm
