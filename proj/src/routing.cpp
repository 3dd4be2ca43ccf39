#include "dtm/routing.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>

#include "dtm/error.hpp"

namespace dtm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Mask {
  std::vector<char> nodes;
  std::vector<char> edges;
};

/// Distance from every node to `dest` over unmasked edges. When `stop_at` is
/// given the search ends once all nodes at most as far as it are settled.
std::vector<double> distances_to(const RoadNetwork& net, NodeId dest, EdgeCosts cost, const Mask* mask,
                                 std::optional<NodeId> stop_at) {
  std::vector<double> dist(net.intersection_count(), kInf);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[dest.index()] = 0.0;
  heap.emplace(0.0, dest.value);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    if (stop_at && d > dist[stop_at->index()]) break;
    heap.pop();
    if (d > dist[u]) continue;
    for (EdgeId eid : net.incoming(NodeId(u))) {
      if (mask && mask->edges[eid.index()]) continue;
      const Edge& e = net.edge(eid);
      if (mask && mask->nodes[e.from.index()]) continue;
      const double nd = cost[eid.index()] + d;
      if (nd < dist[e.from.index()]) {
        dist[e.from.index()] = nd;
        heap.emplace(nd, e.from.value);
      }
    }
  }
  return dist;
}

/// Follows tight edges from `origin`, smallest id first. Yields the
/// lexicographically smallest least-cost edge sequence.
std::optional<Route> walk_tight(const RoadNetwork& net, NodeId origin, NodeId dest, EdgeCosts cost,
                                const std::vector<double>& dist, const Mask* mask) {
  if (dist[origin.index()] == kInf) return std::nullopt;
  Route route{origin, dest, {}};
  std::vector<char> visited(net.intersection_count(), 0);
  NodeId at = origin;
  visited[at.index()] = 1;
  while (at != dest) {
    std::optional<EdgeId> chosen;
    for (EdgeId eid : net.outgoing(at)) {
      if (mask && mask->edges[eid.index()]) continue;
      const Edge& e = net.edge(eid);
      if (visited[e.to.index()] || (mask && mask->nodes[e.to.index()])) continue;
      if (cost[eid.index()] + dist[e.to.index()] == dist[at.index()]) {
        chosen = eid;
        break;
      }
    }
    if (!chosen) return std::nullopt;  // only reachable through a zero-cost cycle
    route.edges.push_back(*chosen);
    at = net.edge(*chosen).to;
    visited[at.index()] = 1;
  }
  return route;
}

void check_node(const RoadNetwork& net, NodeId n) {
  if (!net.contains(n)) throw RoutingError("unknown intersection " + std::to_string(n.value));
}

void check_costs(const RoadNetwork& net, EdgeCosts cost) {
  if (cost.size() != net.edge_count()) throw RoutingError("cost vector does not match edge count");
}

struct Candidate {
  double cost;
  Route route;
  bool operator<(const Candidate& o) const { return route_before(cost, route, o.cost, o.route); }
};

}  // namespace

double route_cost(const Route& route, EdgeCosts cost) {
  double total = 0.0;
  for (EdgeId e : route.edges) total += cost[e.index()];
  return total;
}

bool route_before(double cost_a, const Route& a, double cost_b, const Route& b) {
  if (cost_a != cost_b) return cost_a < cost_b;
  return a.edges < b.edges;
}

std::optional<Route> shortest_route(const RoadNetwork& net, NodeId origin, NodeId destination, EdgeCosts cost) {
  check_node(net, origin);
  check_node(net, destination);
  check_costs(net, cost);
  if (origin == destination) return Route{origin, destination, {}};
  const auto dist = distances_to(net, destination, cost, nullptr, origin);
  return walk_tight(net, origin, destination, cost, dist, nullptr);
}

std::vector<Route> k_shortest_routes(const RoadNetwork& net, NodeId origin, NodeId destination, std::size_t count,
                                     EdgeCosts cost) {
  check_node(net, origin);
  check_node(net, destination);
  check_costs(net, cost);
  std::vector<Route> found;
  if (count == 0) return found;
  auto first = shortest_route(net, origin, destination, cost);
  if (!first) return found;
  found.push_back(std::move(*first));
  if (origin == destination) return found;

  std::set<Candidate> candidates;
  Mask mask{std::vector<char>(net.intersection_count(), 0), std::vector<char>(net.edge_count(), 0)};

  while (found.size() < count) {
    const Route& prev = found.back();
    NodeId spur = origin;
    for (std::size_t j = 0; j < prev.edges.size(); ++j) {
      std::fill(mask.nodes.begin(), mask.nodes.end(), 0);
      std::fill(mask.edges.begin(), mask.edges.end(), 0);
      const std::span<const EdgeId> root(prev.edges.data(), j);
      for (const Route& p : found) {
        if (p.edges.size() > j && std::equal(root.begin(), root.end(), p.edges.begin())) mask.edges[p.edges[j].index()] = 1;
      }
      NodeId at = origin;
      for (EdgeId e : root) {
        mask.nodes[at.index()] = 1;
        at = net.edge(e).to;
      }
      const auto dist = distances_to(net, destination, cost, &mask, spur);
      if (auto tail = walk_tight(net, spur, destination, cost, dist, &mask)) {
        Route full{origin, destination, {root.begin(), root.end()}};
        full.edges.insert(full.edges.end(), tail->edges.begin(), tail->edges.end());
        if (std::find(found.begin(), found.end(), full) == found.end()) {
          const double c = route_cost(full, cost);
          candidates.insert({c, std::move(full)});
        }
      }
      spur = net.edge(prev.edges[j]).to;
    }
    if (candidates.empty()) break;
    found.push_back(candidates.begin()->route);
    candidates.erase(candidates.begin());
  }
  return found;
}

std::vector<Route> optional_routes(const RoadNetwork& net, NodeId origin, NodeId destination, std::size_t k,
                                   EdgeCosts cost) {
  auto all = k_shortest_routes(net, origin, destination, k + 1, cost);
  if (all.empty())
    throw RoutingError("intersection " + std::to_string(destination.value) + " is unreachable from " +
                       std::to_string(origin.value));
  if (k == 0) return {};
  all.erase(all.begin());
  return all;
}

std::vector<Route> branch_routes(const RoadNetwork& net, NodeId from, NodeId destination, std::optional<NodeId> avoid,
                                 EdgeCosts cost) {
  check_node(net, from);
  check_node(net, destination);
  check_costs(net, cost);
  std::vector<Route> out;
  if (from == destination) return out;
  Mask mask{std::vector<char>(net.intersection_count(), 0), std::vector<char>(net.edge_count(), 0)};
  mask.nodes[from.index()] = 1;
  if (avoid && *avoid != destination) mask.nodes[avoid->index()] = 1;
  const auto dist = distances_to(net, destination, cost, &mask, std::nullopt);

  std::vector<Candidate> found;
  for (EdgeId eid : net.outgoing(from)) {
    const NodeId next = net.edge(eid).to;
    if (mask.nodes[next.index()]) continue;
    auto tail = walk_tight(net, next, destination, cost, dist, &mask);
    if (!tail) continue;
    Route r{from, destination, {eid}};
    r.edges.insert(r.edges.end(), tail->edges.begin(), tail->edges.end());
    const double c = route_cost(r, cost);
    found.push_back({c, std::move(r)});
  }
  std::sort(found.begin(), found.end());
  out.reserve(found.size());
  for (auto& c : found) out.push_back(std::move(c.route));
  return out;
}

RouteCache::RouteCache(const RoadNetwork& net) : net_(net), free_flow_(net.free_flow_costs()) {}

DistanceTree::DistanceTree(const RoadNetwork& net, NodeId destination, std::vector<double> cost)
    : net_(&net), destination_(destination), cost_(std::move(cost)) {
  check_node(net, destination);
  check_costs(net, cost_);
  dist_ = distances_to(net, destination, cost_, nullptr, std::nullopt);
}

std::optional<Route> DistanceTree::route_from(NodeId from, std::optional<NodeId> avoid) const {
  check_node(*net_, from);
  auto route = walk_tight(*net_, from, destination_, cost_, dist_, nullptr);
  if (!route || !avoid || *avoid == from || *avoid == destination_) return route;
  bool passes = false;
  for (EdgeId e : route->edges) passes = passes || net_->edge(e).to == *avoid;
  if (!passes) return route;
  Mask mask{std::vector<char>(net_->intersection_count(), 0), std::vector<char>(net_->edge_count(), 0)};
  mask.nodes[avoid->index()] = 1;
  const auto dist = distances_to(*net_, destination_, cost_, &mask, from);
  return walk_tight(*net_, from, destination_, cost_, dist, &mask);
}

std::shared_ptr<const std::vector<Route>> RouteCache::optional(NodeId origin, NodeId destination, std::size_t k) {
  const auto key = std::make_tuple(origin.value, destination.value, k);
  {
    std::lock_guard lock(mutex_);
    if (auto it = optional_.find(key); it != optional_.end()) return it->second;
  }
  auto routes = std::make_shared<const std::vector<Route>>(optional_routes(net_, origin, destination, k, free_flow_));
  std::lock_guard lock(mutex_);
  return optional_.emplace(key, std::move(routes)).first->second;
}

std::shared_ptr<const RoutePlan> RouteCache::plan(NodeId origin, NodeId destination, std::size_t k) {
  const auto key = std::make_tuple(origin.value, destination.value, k);
  {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
  }
  auto all = k_shortest_routes(net_, origin, destination, k + 1, free_flow_);
  auto plan = std::make_shared<RoutePlan>();
  if (!all.empty()) {
    plan->shortest = std::move(all.front());
    plan->alternatives.assign(std::make_move_iterator(all.begin() + 1), std::make_move_iterator(all.end()));
  }
  std::lock_guard lock(mutex_);
  return plans_.emplace(key, std::move(plan)).first->second;
}

std::shared_ptr<const std::vector<Route>> RouteCache::branches(NodeId from, NodeId destination,
                                                               std::optional<NodeId> avoid) {
  const auto key = std::make_tuple(from.value, destination.value, avoid ? avoid->value : ~std::uint32_t{0});
  {
    std::lock_guard lock(mutex_);
    if (auto it = branches_.find(key); it != branches_.end()) return it->second;
  }
  auto routes = std::make_shared<const std::vector<Route>>(branch_routes(net_, from, destination, avoid, free_flow_));
  std::lock_guard lock(mutex_);
  return branches_.emplace(key, std::move(routes)).first->second;
}

}  // namespace dtm
