#include <doctest.h>

#include "dtm/error.hpp"
#include "dtm/traffic.hpp"

using namespace dtm;

namespace {

std::shared_ptr<const RoadNetwork> line(double length, double speed, bool signalized, std::uint32_t nodes = 2) {
  std::vector<Intersection> ns;
  std::vector<Edge> es;
  for (std::uint32_t i = 0; i < nodes; ++i) ns.push_back({NodeId(i), {i * length, 0.0}, signalized});
  for (std::uint32_t i = 0; i + 1 < nodes; ++i) {
    Edge e;
    e.id = EdgeId(i);
    e.from = NodeId(i);
    e.to = NodeId(i + 1);
    e.length_m = length;
    e.free_flow_speed = speed;
    e.per_lane_capacity = 100;
    es.push_back(e);
  }
  return std::make_shared<const RoadNetwork>(RoadNetwork::create(ns, es));
}

Vehicle car(std::uint32_t id, Route r, Tick depart = 0) {
  Vehicle v;
  v.id = VehicleId(id);
  v.origin = r.origin;
  v.destination = r.destination;
  v.departure_time = depart;
  v.current_route = std::move(r);
  return v;
}

Route whole(const RoadNetwork& net) {
  Route r{NodeId(0), NodeId(static_cast<std::uint32_t>(net.intersection_count() - 1)), {}};
  for (const Edge& e : net.edges()) r.edges.push_back(e.id);
  return r;
}

}  // namespace

TEST_CASE("volume-delay law") {
  Edge e;
  e.length_m = 600;
  e.free_flow_speed = 10;
  e.lanes = 2;
  e.per_lane_capacity = 10;
  const CostModelParams p;
  CHECK(edge_travel_time(e, 0, p) == doctest::Approx(60.0));
  CHECK(edge_travel_time(e, 20, p) == doctest::Approx(69.0));
  CHECK(edge_travel_time(e, 40, p) == doctest::Approx(204.0));
  CHECK(edge_travel_time(e, 20, p, 1) == doctest::Approx(204.0));
}

TEST_CASE("signal wait estimate") {
  SignalPlan plan;
  plan.cycle = Millis{60'000};
  plan.lost_time = Millis{0};
  plan.phases = {{{EdgeId(0)}, Millis{30'000}}, {{EdgeId(1)}, Millis{30'000}}};
  const CostModelParams p;
  CHECK(signal_wait_estimate(plan, EdgeId(0), 0, p, 1) == doctest::Approx(15.0));
  CHECK(signal_wait_estimate(plan, EdgeId(0), 10, p, 1) > signal_wait_estimate(plan, EdgeId(0), 0, p, 1));
  SignalPlan always;
  always.cycle = Millis{60'000};
  always.lost_time = Millis{0};
  always.phases = {{{EdgeId(0)}, Millis{60'000}}};
  CHECK(signal_wait_estimate(always, EdgeId(0), 0, p, 1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(signal_wait_estimate(plan, EdgeId(5), 0, p, 1), StateError);
}

TEST_CASE("free-flow kinematics") {
  auto net = line(1000, 10, false, 3);
  World w = make_world(net, {});
  add_vehicles(w, {car(0, whole(*net))});
  step(w, 0);
  const Vehicle& v = w.vehicles[0];
  CHECK(v.state == VehicleState::moving);
  CHECK(v.progress == doctest::Approx(0.01));
  step(w, 1);
  CHECK(v.progress == doctest::Approx(0.02));
  CHECK(v.speed == doctest::Approx(10.0));
}

TEST_CASE("single vehicle completes in free-flow time") {
  auto net = line(1000, 10, false, 3);
  World w = make_world(net, {});
  add_vehicles(w, {car(0, whole(*net), 5)});
  Tick t = 0;
  while (!w.finished() && t < 1000) step(w, t++);
  REQUIRE(w.finished());
  const Tick travel = *w.vehicles[0].arrived_at - 5;
  CHECK(std::abs(travel - 200) <= 1);
}

TEST_CASE("stopped vehicle holds position for the stop duration") {
  auto net = line(1000, 10, false);
  World w = make_world(net, {});
  add_vehicles(w, {car(0, whole(*net))});
  step(w, 0);
  Vehicle& v = w.vehicles[0];
  stop_vehicle(w, v, 0 + 30);
  const double at = v.progress;
  for (Tick t = 1; t <= 30; ++t) {
    step(w, t);
    CHECK(v.state == VehicleState::stopped);
    CHECK(v.progress == at);
  }
  step(w, 31);
  CHECK(v.state == VehicleState::moving);
  CHECK(v.progress > at);
}

TEST_CASE("stopped vehicle blocks those behind it") {
  auto net = line(1000, 10, false);
  World w = make_world(net, {});
  add_vehicles(w, {car(0, whole(*net)), car(1, whole(*net), 20)});
  for (Tick t = 0; t < 50; ++t) step(w, t);
  stop_vehicle(w, w.vehicles[0], 49 + 100);
  for (Tick t = 50; t < 120; ++t) step(w, t);
  CHECK(w.vehicles[1].progress <= w.vehicles[0].progress);
}

TEST_CASE("vehicle reaching a red signal queues without leaving the edge") {
  auto net = line(100, 10, true, 3);
  WorldOptions opt;
  opt.signal_mode = SignalMode::fixed;
  World w = make_world(net, opt);
  add_vehicles(w, {car(0, whole(*net))});
  bool saw_queue = false;
  for (Tick t = 0; t < 200 && !w.finished(); ++t) {
    step(w, t);
    const Vehicle& v = w.vehicles[0];
    if (v.state == VehicleState::queued) {
      saw_queue = true;
      CHECK(v.progress == 1.0);
      CHECK(w.edges[v.current_edge().index()].count() == 1);
    }
  }
  CHECK(saw_queue);
  CHECK(w.finished());
}

TEST_CASE("conservation and state machine over a busy grid") {
  GridSpec g;
  g.rows = g.cols = 4;
  g.block_length_m = 200;
  g.lanes = 1;
  auto net = std::make_shared<const RoadNetwork>(generate_grid(g));
  WorldOptions opt;
  opt.lane_reversal = true;
  World w = make_world(net, opt);
  std::vector<Vehicle> vs;
  for (std::uint32_t i = 0; i < 300; ++i) {
    // straight east along row i % 4 then south
    const std::uint32_t row = i % 4;
    Route r{NodeId(row * 4), NodeId(15), {}};
    for (std::uint32_t c = 0; c < 3; ++c)
      for (EdgeId e : net->outgoing(NodeId(row * 4 + c)))
        if (net->edge(e).to == NodeId(row * 4 + c + 1)) r.edges.push_back(e);
    for (std::uint32_t rr = row; rr < 3; ++rr)
      for (EdgeId e : net->outgoing(NodeId(rr * 4 + 3)))
        if (net->edge(e).to == NodeId((rr + 1) * 4 + 3)) r.edges.push_back(e);
    if (r.edges.size() < 3) continue;
    vs.push_back(car(static_cast<std::uint32_t>(vs.size()), r, i % 50));
  }
  add_vehicles(w, vs);
  std::vector<VehicleState> prev(w.vehicles.size(), VehicleState::pending);
  for (Tick t = 0; t < 5000 && !w.finished(); ++t) {
    step(w, t);
    const Census c = census(w);
    REQUIRE(c.pending + c.in_flight + c.stopped + c.arrived == w.vehicles.size());
    std::size_t on_edges = 0;
    for (const auto& e : w.edges) on_edges += e.count();
    REQUIRE(on_edges == c.in_flight + c.stopped);
    for (const auto& pair : w.pairs) {
      REQUIRE(pair.lanes_a + pair.lanes_b == pair.total_lanes);
      REQUIRE(pair.lanes_a >= 1);
      REQUIRE(pair.lanes_b >= 1);
    }
    for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
      const auto s = w.vehicles[i].state;
      if (prev[i] == VehicleState::arrived) REQUIRE(s == VehicleState::arrived);
      if (s == VehicleState::pending) REQUIRE(prev[i] == VehicleState::pending);
      REQUIRE(s != VehicleState::stopped);
      prev[i] = s;
    }
  }
  CHECK(w.finished());
}

TEST_CASE("step rejects skipped ticks") {
  auto net = line(100, 10, false);
  World w = make_world(net, {});
  step(w, 0);
  CHECK_THROWS_AS(step(w, 2), StateError);
}

TEST_CASE("switch_route keeps the occupied edge and validates the continuation") {
  GridSpec g;
  g.rows = g.cols = 2;
  auto net = std::make_shared<const RoadNetwork>(generate_grid(g));
  World w = make_world(net, {});
  // 0 -> 1 -> 3
  add_vehicles(w, {car(0, Route{NodeId(0), NodeId(3), {EdgeId(0), EdgeId(4)}})});
  Vehicle& v = w.vehicles[0];
  CHECK_THROWS_AS(switch_route(w, v, Route{NodeId(1), NodeId(3), {EdgeId(4)}}), StateError);  // still pending
  step(w, 0);
  CHECK_THROWS_AS(switch_route(w, v, Route{NodeId(0), NodeId(3), {EdgeId(2), EdgeId(6)}}), StateError);
  // 1 -> 0 -> 2 -> 3
  switch_route(w, v, Route{NodeId(1), NodeId(3), {EdgeId(1), EdgeId(2), EdgeId(6)}});
  CHECK(v.current_edge() == EdgeId(0));
  CHECK(v.current_route.edges.size() == 4);
  CHECK(v.switches == 1);
}
