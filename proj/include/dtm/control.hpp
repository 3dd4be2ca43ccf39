#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtm/network.hpp"

namespace dtm {

using Millis = std::chrono::milliseconds;

// ---------------------------------------------------------------------------
// Adaptive traffic light control
// ---------------------------------------------------------------------------

struct Phase {
  std::vector<EdgeId> approaches;
  Millis green{0};
};

/// Fixed-order phase plan for one intersection. Durations are whole
/// milliseconds so the cycle identity holds exactly.
struct SignalPlan {
  NodeId intersection;
  Millis cycle{60'000};
  Millis lost_time{6'000};
  Millis min_green{7'000};
  Millis max_green{60'000};
  std::vector<Phase> phases;

  Millis usable_green() const { return cycle - lost_time; }
  /// Index of the phase serving `approach`, or nullopt.
  std::optional<std::size_t> phase_of(EdgeId approach) const;
  /// Green seconds / cycle seconds for the approach's phase. Throws StateError
  /// if the approach belongs to no phase.
  double green_share(EdgeId approach) const;
  /// Throws StateError if any plan invariant is violated.
  void validate() const;
};

struct SignalTiming {
  Millis cycle{60'000};
  Millis lost_time{6'000};
  Millis min_green{7'000};
  Millis max_green{53'000};
};

/// Groups the incoming edges of a signalized intersection into phases by
/// heading (east-west first, then north-south; empty groups dropped) and
/// splits green equally.
SignalPlan initial_plan(const RoadNetwork& net, NodeId intersection, const SignalTiming& timing);

/// Largest-remainder split of `usable` in proportion to `weights`; all-zero
/// weights split equally. Remainder milliseconds go to the largest fractional
/// parts, lower index first on ties.
std::vector<Millis> proportional_split(Millis usable, std::span<const std::uint64_t> weights);

/// Re-times a plan from local approach counts only. Greens are split in
/// proportion to each phase's total count, clamped to [min_green, max_green],
/// and the surplus redistributed among unclamped phases until a fixed point;
/// the greens always sum to the usable green. Phases with equal counts differ
/// by at most the 1 ms rounding remainder. Approaches missing from `counts`
/// count as zero.
SignalPlan atlc_update(const SignalPlan& current, const std::map<EdgeId, std::uint32_t>& counts);

// ---------------------------------------------------------------------------
// Dynamic lane reversal
// ---------------------------------------------------------------------------

struct DlrParams {
  double ratio = 1.5;      ///< heavier / lighter demand that triggers a reversal
  Tick window = 2;         ///< monitoring window, ticks
  Tick cooldown = 60;      ///< ticks after a commit before the pair may reverse again
};

enum class PairSide : std::uint8_t { a, b };

struct DualEdgePair {
  EdgeId edge_a;
  EdgeId edge_b;
  std::uint32_t lanes_a = 1;
  std::uint32_t lanes_b = 1;
  std::uint32_t total_lanes = 2;

  struct Clearing {
    PairSide donor;
    std::uint32_t lane;  ///< lane index on the donor edge being emptied
    Tick since;
  };
  std::optional<Clearing> clearing;  ///< nullopt == stable
  Tick cooldown_until = 0;

  static DualEdgePair from_edges(const Edge& a, const Edge& b);
  bool stable() const { return !clearing.has_value(); }
  std::uint32_t lanes(PairSide s) const { return s == PairSide::a ? lanes_a : lanes_b; }
  EdgeId edge(PairSide s) const { return s == PairSide::a ? edge_a : edge_b; }
};

enum class DlrAction : std::uint8_t { none, reverse_toward_a, reverse_toward_b };

/// Reversal decision for one monitoring window.
DlrAction dlr_check(const DualEdgePair& pair, double demand_a, double demand_b, Tick tick,
                    const DlrParams& params = {});

/// Puts a stable pair into the clearing state for `action` (the donor's
/// highest lane is emptied). No-op for DlrAction::none.
void dlr_begin(DualEdgePair& pair, DlrAction action, Tick tick);

enum class DlrCommit : std::uint8_t { committed, still_clearing };

/// Completes a pending reversal once the clearing lane is empty. Throws
/// StateError on a stable pair.
DlrCommit dlr_commit(DualEdgePair& pair, std::uint32_t clearing_lane_vehicles, Tick tick,
                     const DlrParams& params = {});

// ---------------------------------------------------------------------------
// Dynamic lane grouping screening
// ---------------------------------------------------------------------------

struct LaneGroup {
  EdgeId approach;
  std::uint32_t lanes = 1;
  double capacity = 0.0;  ///< vehicles the group can serve in the observation period
};

struct ApproachRatios {
  EdgeId approach;
  double volume = 0.0;
  double v_over_c = 0.0;
  double v_over_l = 0.0;
};

struct DlgThresholds {
  double flag = 0.9;       ///< some movement at or above this V/C ...
  double imbalance = 0.5;  ///< ... while another sits at or below this one
};

struct DlgReport {
  NodeId intersection;
  std::vector<ApproachRatios> approaches;
  bool flagged = false;
  std::string reason;
};

/// Screens an intersection for lane regrouping. Throws ConfigError for a lane
/// group with zero capacity or zero lanes.
DlgReport dlg_screen(NodeId intersection, const std::map<EdgeId, double>& volumes, std::span<const LaneGroup> groups,
                     const DlgThresholds& thresholds = {});

}  // namespace dtm
