#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtm/ids.hpp"

namespace dtm {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

double distance(Point a, Point b);

struct Intersection {
  NodeId id;
  Point position;
  bool signalized = true;
};

struct Edge {
  EdgeId id;
  NodeId from;
  NodeId to;
  double length_m = 0.0;
  std::uint32_t lanes = 1;
  double free_flow_speed = 0.0;        ///< m/s
  std::uint32_t per_lane_capacity = 0; ///< jam storage, vehicles per lane
  std::optional<EdgeId> dual;

  double free_flow_time() const { return length_m / free_flow_speed; }
  std::uint32_t capacity() const { return lanes * per_lane_capacity; }
};

/// Ordered edge list between two intersections.
struct Route {
  NodeId origin;
  NodeId destination;
  std::vector<EdgeId> edges;

  bool empty() const { return edges.empty(); }
  bool operator==(const Route&) const = default;
};

/// Immutable validated road graph. Intersection and edge ids are dense
/// (0..n-1) and equal to their position in the respective vectors.
class RoadNetwork {
 public:
  /// Validates and indexes. Throws ConfigError naming the offending element.
  static RoadNetwork create(std::vector<Intersection> intersections, std::vector<Edge> edges);

  std::span<const Intersection> intersections() const { return intersections_; }
  std::span<const Edge> edges() const { return edges_; }
  std::size_t intersection_count() const { return intersections_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  bool contains(NodeId n) const { return n.index() < intersections_.size(); }
  bool contains(EdgeId e) const { return e.index() < edges_.size(); }

  const Intersection& intersection(NodeId n) const { return intersections_.at(n.index()); }
  const Edge& edge(EdgeId e) const { return edges_.at(e.index()); }

  /// Outgoing / incoming edges, ascending by id.
  std::span<const EdgeId> outgoing(NodeId n) const;
  std::span<const EdgeId> incoming(NodeId n) const;

  /// Position at fraction `progress` along an edge.
  Point position_on(EdgeId e, double progress) const;
  Point midpoint(EdgeId e) const { return position_on(e, 0.5); }

  /// Per-edge free-flow traversal time in seconds, indexed by edge id.
  std::vector<double> free_flow_costs() const;

  /// True iff the route is well formed on this network: known edges,
  /// consecutive adjacency, endpoints matching origin/destination.
  bool is_valid(const Route& route) const;
  /// Additionally requires that no intersection repeats.
  bool is_loop_free(const Route& route) const;

 private:
  std::vector<Intersection> intersections_;
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> out_offsets_;
  std::vector<EdgeId> out_edges_;
  std::vector<std::uint32_t> in_offsets_;
  std::vector<EdgeId> in_edges_;
};

struct GridSpec {
  std::uint32_t rows = 10;
  std::uint32_t cols = 10;
  double block_length_m = 1500.0;
  std::uint32_t lanes = 2;
  double speed = 13.9;
  /// Jam storage per lane; 0 derives it from the block length at 7.5 m per vehicle.
  std::uint32_t per_lane_capacity = 0;
  bool signalized = true;
};

/// Rectangular grid with dual-paired streets between 4-neighbours.
/// Intersection id = row * cols + col, at (col * L, row * L). Edges are
/// emitted per undirected street (row-major, eastward streets before
/// southward ones at each intersection) as consecutive (forward, reverse) ids.
RoadNetwork generate_grid(const GridSpec& spec);

/// Network description I/O (JSON, `format_version` 1).
RoadNetwork load_network(std::string_view text);
RoadNetwork load_network_file(const std::filesystem::path& path);
std::string serialize_network(const RoadNetwork& net);
void save_network_file(const RoadNetwork& net, const std::filesystem::path& path);

inline constexpr int kNetworkFormatVersion = 1;

}  // namespace dtm
