#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dtm/control.hpp"
#include "dtm/network.hpp"
#include "dtm/traffic.hpp"

namespace dtm {

enum class UnknownEdgePolicy : std::uint8_t { free_flow, last_known };

std::string_view to_string(UnknownEdgePolicy p);
UnknownEdgePolicy parse_unknown_edge_policy(std::string_view text);

struct RoutingParams {
  double compliance = 0.85;    ///< P_R
  double switch_margin = 0.05;  ///< epsilon
  UnknownEdgePolicy unknown_edge_policy = UnknownEdgePolicy::free_flow;
  std::size_t k = 3;  ///< optional routes carried from departure

  void validate() const;
};

struct EdgeEstimate {
  EdgeId edge;
  double travel_s = 0.0;
  double signal_wait_s = 0.0;
  bool observed = false;
};

struct RouteEstimate {
  Route route;
  double total_delay = 0.0;
  std::vector<EdgeEstimate> breakdown;
  double data_coverage = 0.0;
};

/// What a vehicle knows when estimating: per-edge neighbor counts (0 means no
/// data) and, for the last-known policy, the most recent nonzero counts.
struct EdgeObservations {
  std::span<const std::uint32_t> counts;      ///< indexed by edge id
  std::span<const std::uint32_t> last_known;  ///< indexed by edge id; may be empty
};

/// Signal plan per intersection (nullptr when unsignalized), indexed by node id.
using SignalPlans = std::span<const SignalPlan* const>;

/// Delay of `route`: per edge the volume-delay time at its observed count
/// plus the expected wait at its downstream signal. Throws RoutingError if
/// the route names an unknown edge.
RouteEstimate estimate_route(const RoadNetwork& net, const Route& route, const EdgeObservations& obs,
                             SignalPlans plans, const RoutingParams& params, const CostModelParams& cost);

struct Decision {
  bool recommended = false;
  bool switched = false;
  std::optional<std::size_t> choice;  ///< index into the alternatives when recommended
  double current = 0.0;
  double best = 0.0;
};

/// Recommend the cheapest alternative iff it beats the current estimate by
/// the switch margin; follow the recommendation iff `draw` < P_R.
Decision decide(const RouteEstimate& current, std::span<const RouteEstimate> alternatives,
                const RoutingParams& params, double draw);

/// The i-th compliance draw of a vehicle, a pure function of its substream.
double compliance_draw(std::uint64_t stream, std::uint64_t index);

}  // namespace dtm
