#include "dtm/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dtm/error.hpp"

namespace dtm {

namespace {

std::string edge_name(const Edge& e) { return "edge " + std::to_string(e.id.value); }

void build_index(std::size_t nodes, std::span<const Edge> edges, bool outgoing, std::vector<std::uint32_t>& offsets,
                 std::vector<EdgeId>& flat) {
  offsets.assign(nodes + 1, 0);
  for (const Edge& e : edges) ++offsets[(outgoing ? e.from : e.to).index() + 1];
  for (std::size_t i = 0; i < nodes; ++i) offsets[i + 1] += offsets[i];
  flat.resize(edges.size());
  std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
  // Edges are visited in id order, so each bucket ends up ascending.
  for (const Edge& e : edges) flat[cursor[(outgoing ? e.from : e.to).index()]++] = e.id;
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

RoadNetwork RoadNetwork::create(std::vector<Intersection> intersections, std::vector<Edge> edges) {
  std::sort(intersections.begin(), intersections.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::sort(edges.begin(), edges.end(), [](auto& a, auto& b) { return a.id < b.id; });

  for (std::size_t i = 0; i < intersections.size(); ++i) {
    const auto& n = intersections[i];
    if (n.id.index() != i) {
      if (i > 0 && intersections[i - 1].id == n.id)
        throw ConfigError("duplicate intersection id " + std::to_string(n.id.value));
      throw ConfigError("intersection ids must be contiguous from 0; missing " + std::to_string(i));
    }
    if (!std::isfinite(n.position.x) || !std::isfinite(n.position.y))
      throw ConfigError("intersection " + std::to_string(n.id.value) + " has a non-finite position");
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.id.index() != i) {
      if (i > 0 && edges[i - 1].id == e.id) throw ConfigError("duplicate edge id " + std::to_string(e.id.value));
      throw ConfigError("edge ids must be contiguous from 0; missing " + std::to_string(i));
    }
    if (e.from.index() >= intersections.size())
      throw ConfigError(edge_name(e) + ": dangling endpoint 'from' = " + std::to_string(e.from.value));
    if (e.to.index() >= intersections.size())
      throw ConfigError(edge_name(e) + ": dangling endpoint 'to' = " + std::to_string(e.to.value));
    if (e.from == e.to) throw ConfigError(edge_name(e) + ": from and to are the same intersection");
    if (!(e.length_m > 0.0) || !std::isfinite(e.length_m))
      throw ConfigError(edge_name(e) + ": length must be positive");
    if (!(e.free_flow_speed > 0.0) || !std::isfinite(e.free_flow_speed))
      throw ConfigError(edge_name(e) + ": free_flow_speed must be positive");
    if (e.per_lane_capacity == 0) throw ConfigError(edge_name(e) + ": per_lane_capacity must be positive");
    if (e.lanes == 0) throw ConfigError(edge_name(e) + ": lanes must be at least 1");
  }
  for (const Edge& e : edges) {
    if (!e.dual) continue;
    if (e.dual->index() >= edges.size())
      throw ConfigError(edge_name(e) + ": dual refers to unknown edge " + std::to_string(e.dual->value));
    const Edge& d = edges[e.dual->index()];
    if (d.dual != e.id)
      throw ConfigError(edge_name(e) + ": asymmetric dual pairing with edge " + std::to_string(d.id.value));
    if (d.from != e.to || d.to != e.from)
      throw ConfigError(edge_name(e) + ": dual edge " + std::to_string(d.id.value) + " does not connect to->from");
  }

  RoadNetwork net;
  net.intersections_ = std::move(intersections);
  net.edges_ = std::move(edges);
  build_index(net.intersections_.size(), net.edges_, true, net.out_offsets_, net.out_edges_);
  build_index(net.intersections_.size(), net.edges_, false, net.in_offsets_, net.in_edges_);
  return net;
}

std::span<const EdgeId> RoadNetwork::outgoing(NodeId n) const {
  const auto i = n.index();
  return {out_edges_.data() + out_offsets_.at(i), out_offsets_.at(i + 1) - out_offsets_[i]};
}

std::span<const EdgeId> RoadNetwork::incoming(NodeId n) const {
  const auto i = n.index();
  return {in_edges_.data() + in_offsets_.at(i), in_offsets_.at(i + 1) - in_offsets_[i]};
}

Point RoadNetwork::position_on(EdgeId e, double progress) const {
  const Edge& edge = edges_[e.index()];
  const Point a = intersections_[edge.from.index()].position;
  const Point b = intersections_[edge.to.index()].position;
  return {a.x + (b.x - a.x) * progress, a.y + (b.y - a.y) * progress};
}

std::vector<double> RoadNetwork::free_flow_costs() const {
  std::vector<double> costs(edges_.size());
  for (const Edge& e : edges_) costs[e.id.index()] = e.free_flow_time();
  return costs;
}

bool RoadNetwork::is_valid(const Route& route) const {
  if (!contains(route.origin) || !contains(route.destination)) return false;
  if (route.edges.empty()) return route.origin == route.destination;
  NodeId at = route.origin;
  for (EdgeId id : route.edges) {
    if (!contains(id)) return false;
    const Edge& e = edges_[id.index()];
    if (e.from != at) return false;
    at = e.to;
  }
  return at == route.destination;
}

bool RoadNetwork::is_loop_free(const Route& route) const {
  if (!is_valid(route)) return false;
  std::vector<bool> seen(intersections_.size(), false);
  seen[route.origin.index()] = true;
  for (EdgeId id : route.edges) {
    const auto to = edges_[id.index()].to.index();
    if (seen[to]) return false;
    seen[to] = true;
  }
  return true;
}

RoadNetwork generate_grid(const GridSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2) throw ConfigError("grid needs at least 2 rows and 2 columns");
  if (!(spec.block_length_m > 0.0)) throw ConfigError("grid block length must be positive");
  if (!(spec.speed > 0.0)) throw ConfigError("grid speed must be positive");
  if (spec.lanes == 0) throw ConfigError("grid lanes must be at least 1");

  const std::uint32_t storage =
      spec.per_lane_capacity > 0
          ? spec.per_lane_capacity
          : std::max<std::uint32_t>(1, static_cast<std::uint32_t>(spec.block_length_m / 7.5));

  std::vector<Intersection> nodes;
  nodes.reserve(std::size_t{spec.rows} * spec.cols);
  for (std::uint32_t r = 0; r < spec.rows; ++r)
    for (std::uint32_t c = 0; c < spec.cols; ++c)
      nodes.push_back({NodeId(r * spec.cols + c), {c * spec.block_length_m, r * spec.block_length_m}, spec.signalized});

  std::vector<Edge> edges;
  auto add_street = [&](std::uint32_t a, std::uint32_t b) {
    const EdgeId fwd(static_cast<std::uint32_t>(edges.size()));
    const EdgeId rev(fwd.value + 1);
    edges.push_back({fwd, NodeId(a), NodeId(b), spec.block_length_m, spec.lanes, spec.speed, storage, rev});
    edges.push_back({rev, NodeId(b), NodeId(a), spec.block_length_m, spec.lanes, spec.speed, storage, fwd});
  };
  for (std::uint32_t r = 0; r < spec.rows; ++r) {
    for (std::uint32_t c = 0; c < spec.cols; ++c) {
      const std::uint32_t n = r * spec.cols + c;
      if (c + 1 < spec.cols) add_street(n, n + 1);
      if (r + 1 < spec.rows) add_street(n, n + spec.cols);
    }
  }
  return RoadNetwork::create(std::move(nodes), std::move(edges));
}

namespace {

using nlohmann::json;

template <class T>
T require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

std::uint32_t require_id(const json& obj, const char* key, const std::string& where) {
  const auto v = require<std::int64_t>(obj, key, where);
  if (v < 0 || v > 0xffffffffLL) throw ConfigError(where + ": field '" + key + "' is out of range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

RoadNetwork load_network(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("network description is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("network description must be an object");
  const auto version = require<int>(doc, "format_version", "network");
  if (version != kNetworkFormatVersion)
    throw ConfigError("unsupported network format_version " + std::to_string(version));

  std::vector<Intersection> nodes;
  for (const json& j : require<json>(doc, "intersections", "network")) {
    const std::string where = "intersection entry";
    Intersection n;
    n.id = NodeId(require_id(j, "id", where));
    const std::string named = "intersection " + std::to_string(n.id.value);
    n.position = {require<double>(j, "x", named), require<double>(j, "y", named)};
    n.signalized = j.value("signalized", true);
    nodes.push_back(n);
  }
  std::vector<Edge> edges;
  for (const json& j : require<json>(doc, "edges", "network")) {
    Edge e;
    e.id = EdgeId(require_id(j, "id", "edge entry"));
    const std::string named = "edge " + std::to_string(e.id.value);
    e.from = NodeId(require_id(j, "from", named));
    e.to = NodeId(require_id(j, "to", named));
    e.length_m = require<double>(j, "length", named);
    const auto lanes = require<std::int64_t>(j, "lanes", named);
    if (lanes < 1) throw ConfigError(named + ": lanes must be at least 1");
    e.lanes = static_cast<std::uint32_t>(lanes);
    e.free_flow_speed = require<double>(j, "free_flow_speed", named);
    const auto cap = require<std::int64_t>(j, "per_lane_capacity", named);
    if (cap < 1) throw ConfigError(named + ": per_lane_capacity must be positive");
    e.per_lane_capacity = static_cast<std::uint32_t>(cap);
    if (auto it = j.find("dual"); it != j.end() && !it->is_null()) e.dual = EdgeId(require_id(j, "dual", named));
    edges.push_back(e);
  }
  return RoadNetwork::create(std::move(nodes), std::move(edges));
}

RoadNetwork load_network_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open network file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_network(ss.str());
}

std::string serialize_network(const RoadNetwork& net) {
  json doc;
  doc["format_version"] = kNetworkFormatVersion;
  json nodes = json::array();
  for (const auto& n : net.intersections())
    nodes.push_back({{"id", n.id.value}, {"x", n.position.x}, {"y", n.position.y}, {"signalized", n.signalized}});
  json edges = json::array();
  for (const auto& e : net.edges()) {
    json j = {{"id", e.id.value},
              {"from", e.from.value},
              {"to", e.to.value},
              {"length", e.length_m},
              {"lanes", e.lanes},
              {"free_flow_speed", e.free_flow_speed},
              {"per_lane_capacity", e.per_lane_capacity}};
    j["dual"] = e.dual ? json(e.dual->value) : json(nullptr);
    edges.push_back(std::move(j));
  }
  doc["intersections"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  return doc.dump(1) + "\n";
}

void save_network_file(const RoadNetwork& net, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw Error("cannot write network file " + path.string());
  out << serialize_network(net);
}

}  // namespace dtm
