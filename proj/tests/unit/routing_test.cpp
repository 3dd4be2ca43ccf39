#include <doctest.h>

#include <set>

#include "dtm/error.hpp"
#include "dtm/routing.hpp"
#include "oracle.hpp"

using namespace dtm;

namespace {

RoadNetwork triangle() {
  std::vector<Intersection> nodes{{NodeId(0), {0, 0}, false}, {NodeId(1), {10, 0}, false}, {NodeId(2), {20, 0}, false}};
  auto edge = [](std::uint32_t id, std::uint32_t a, std::uint32_t b, double len) {
    Edge e;
    e.id = EdgeId(id);
    e.from = NodeId(a);
    e.to = NodeId(b);
    e.length_m = len;
    e.free_flow_speed = 1.0;
    e.per_lane_capacity = 5;
    return e;
  };
  return RoadNetwork::create(nodes, {edge(0, 0, 1, 10), edge(1, 1, 2, 10), edge(2, 0, 2, 25)});
}

RoadNetwork grid(std::uint32_t n) {
  GridSpec g;
  g.rows = g.cols = n;
  return generate_grid(g);
}

}  // namespace

TEST_CASE("triangle: forced two-hop route") {
  const RoadNetwork net = triangle();
  const auto cost = net.free_flow_costs();
  const auto r = shortest_route(net, NodeId(0), NodeId(2), cost);
  REQUIRE(r);
  CHECK(r->edges == std::vector<EdgeId>{EdgeId(0), EdgeId(1)});
  CHECK(route_cost(*r, cost) == 20.0);
}

TEST_CASE("origin equals destination gives an empty route") {
  const RoadNetwork net = triangle();
  const auto r = shortest_route(net, NodeId(1), NodeId(1), net.free_flow_costs());
  REQUIRE(r);
  CHECK(r->empty());
  CHECK(route_cost(*r, net.free_flow_costs()) == 0.0);
}

TEST_CASE("unreachable and unknown intersections") {
  const RoadNetwork net = triangle();
  const auto cost = net.free_flow_costs();
  CHECK_FALSE(shortest_route(net, NodeId(2), NodeId(0), cost));
  CHECK_THROWS_AS(shortest_route(net, NodeId(0), NodeId(9), cost), RoutingError);
  CHECK_THROWS_AS(optional_routes(net, NodeId(2), NodeId(0), 2, cost), RoutingError);
}

TEST_CASE("optional routes: degenerate k and single-path topology") {
  const RoadNetwork net = triangle();
  const auto cost = net.free_flow_costs();
  CHECK(optional_routes(net, NodeId(0), NodeId(2), 0, cost).empty());
  CHECK(optional_routes(net, NodeId(0), NodeId(1), 3, cost).empty());  // only one path 0 -> 1
  const auto alts = optional_routes(net, NodeId(0), NodeId(2), 3, cost);
  REQUIRE(alts.size() == 1);
  CHECK(alts[0].edges == std::vector<EdgeId>{EdgeId(2)});
}

TEST_CASE("3x3 grid corner to corner, k=2") {
  const RoadNetwork net = grid(3);
  const auto cost = net.free_flow_costs();
  const auto best = shortest_route(net, NodeId(0), NodeId(8), cost);
  REQUIRE(best);
  const auto alts = optional_routes(net, NodeId(0), NodeId(8), 2, cost);
  REQUIRE(alts.size() == 2);
  CHECK(alts[0] != alts[1]);
  for (const Route& r : alts) {
    CHECK(net.is_loop_free(r));
    CHECK(r != *best);
    CHECK(route_cost(r, cost) >= route_cost(*best, cost));
  }
  const auto all = oracle::all_simple_paths(net, NodeId(0), NodeId(8), cost);
  CHECK(alts[0] == all[1].route);
  CHECK(alts[1] == all[2].route);
}

TEST_CASE("shortest and k-shortest match exhaustive enumeration on random graphs") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const RoadNetwork net = oracle::random_graph(seed);
    const auto cost = net.free_flow_costs();
    for (const auto& o : net.intersections()) {
      for (const auto& d : net.intersections()) {
        const auto all = oracle::all_simple_paths(net, o.id, d.id, cost);
        const auto best = shortest_route(net, o.id, d.id, cost);
        if (all.empty()) {
          CHECK_FALSE(best);
          continue;
        }
        REQUIRE(best);
        CHECK(route_cost(*best, cost) == all.front().cost);
        CHECK(*best == all.front().route);
        const auto top = k_shortest_routes(net, o.id, d.id, 4, cost);
        REQUIRE(top.size() == std::min<std::size_t>(4, all.size()));
        for (std::size_t i = 0; i < top.size(); ++i) CHECK(top[i] == all[i].route);
      }
    }
  }
}

TEST_CASE("branch routes: one least-cost continuation per usable outgoing edge") {
  const RoadNetwork net = grid(4);
  const auto cost = net.free_flow_costs();
  const NodeId from(5), dest(15), back(4);
  const auto routes = branch_routes(net, from, dest, back, cost);
  // node 5 has four neighbours; the one we came from is excluded
  REQUIRE(routes.size() == 3);
  std::set<EdgeId> first;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const Route& r = routes[i];
    CHECK(r.origin == from);
    CHECK(r.destination == dest);
    CHECK(net.is_loop_free(r));
    for (EdgeId e : r.edges) CHECK(net.edge(e).to != back);
    first.insert(r.edges.front());
    if (i > 0) CHECK(route_cost(routes[i - 1], cost) <= route_cost(r, cost));
    // least-cost among paths starting with this edge and avoiding `back`
    double best = 1e18;
    for (const auto& p : oracle::all_simple_paths(net, from, dest, cost)) {
      bool ok = p.route.edges.front() == r.edges.front();
      for (EdgeId e : p.route.edges) ok = ok && net.edge(e).to != back;
      if (ok) best = std::min(best, p.cost);
    }
    CHECK(route_cost(r, cost) == best);
  }
  CHECK(first.size() == 3);
  CHECK(branch_routes(net, dest, dest, std::nullopt, cost).empty());
}

TEST_CASE("distance tree agrees with shortest_route") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const RoadNetwork net = oracle::random_graph(seed);
    const auto cost = net.free_flow_costs();
    for (const auto& d : net.intersections()) {
      const DistanceTree tree(net, d.id, cost);
      for (const auto& o : net.intersections()) {
        const auto a = shortest_route(net, o.id, d.id, cost);
        const auto b = tree.route_from(o.id);
        REQUIRE(a.has_value() == b.has_value());
        if (a) CHECK(*a == *b);
      }
    }
  }
}

TEST_CASE("distance tree avoid falls back to a route around the node") {
  const RoadNetwork net = grid(3);
  const auto cost = net.free_flow_costs();
  const DistanceTree tree(net, NodeId(2), cost);
  const auto direct = tree.route_from(NodeId(0));
  REQUIRE(direct);
  CHECK(direct->edges.size() == 2);  // 0 -> 1 -> 2
  const auto around = tree.route_from(NodeId(0), NodeId(1));
  REQUIRE(around);
  for (EdgeId e : around->edges) CHECK(net.edge(e).to != NodeId(1));
  CHECK(around->edges.size() == 4);  // 0 -> 3 -> 4 -> 5 -> 2
}

TEST_CASE("route cache returns shared, stable results") {
  const RoadNetwork net = grid(3);
  RouteCache cache(net);
  const auto a = cache.plan(NodeId(0), NodeId(8), 3);
  const auto b = cache.plan(NodeId(0), NodeId(8), 3);
  CHECK(a.get() == b.get());
  REQUIRE(a->shortest);
  CHECK(*a->shortest == *shortest_route(net, NodeId(0), NodeId(8), net.free_flow_costs()));
  CHECK(a->alternatives == optional_routes(net, NodeId(0), NodeId(8), 3, net.free_flow_costs()));
}
