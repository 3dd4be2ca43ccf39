#include "dtm/control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dtm/error.hpp"

namespace dtm {

std::optional<std::size_t> SignalPlan::phase_of(EdgeId approach) const {
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto& a = phases[i].approaches;
    if (std::find(a.begin(), a.end(), approach) != a.end()) return i;
  }
  return std::nullopt;
}

double SignalPlan::green_share(EdgeId approach) const {
  const auto p = phase_of(approach);
  if (!p)
    throw StateError("edge " + std::to_string(approach.value) + " is not an approach of intersection " +
                     std::to_string(intersection.value));
  return static_cast<double>(phases[*p].green.count()) / static_cast<double>(cycle.count());
}

void SignalPlan::validate() const {
  const std::string where = "signal plan for intersection " + std::to_string(intersection.value);
  if (phases.empty()) throw StateError(where + ": no phases");
  if (cycle <= Millis{0} || lost_time < Millis{0} || lost_time >= cycle) throw StateError(where + ": bad cycle/lost time");
  Millis sum{0};
  for (const auto& p : phases) {
    if (p.green < min_green || p.green > max_green) throw StateError(where + ": green outside [min, max]");
    sum += p.green;
  }
  if (sum + lost_time != cycle) throw StateError(where + ": greens + lost time != cycle");
  std::vector<EdgeId> all;
  for (const auto& p : phases) all.insert(all.end(), p.approaches.begin(), p.approaches.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) throw StateError(where + ": approach in two phases");
}

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

std::vector<Millis> proportional_split(Millis usable, std::span<const std::uint64_t> weights) {
  const std::size_t n = weights.size();
  std::vector<Millis> out(n, Millis{0});
  if (n == 0) return out;
  std::vector<std::uint64_t> w(weights.begin(), weights.end());
  u128 total = 0;
  for (auto x : w) total += x;
  if (total == 0) {
    std::fill(w.begin(), w.end(), 1);
    total = n;
  }
  const auto u = static_cast<u128>(usable.count());
  std::vector<u128> rem(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const u128 scaled = u * w[i];
    out[i] = Millis{static_cast<std::int64_t>(scaled / total)};
    rem[i] = scaled % total;
    assigned += out[i].count();
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::int64_t left = usable.count() - assigned, k = 0; left > 0; --left, ++k) out[order[k]] += Millis{1};
  return out;
}

SignalPlan initial_plan(const RoadNetwork& net, NodeId intersection, const SignalTiming& timing) {
  std::vector<EdgeId> east_west, north_south;
  for (EdgeId e : net.incoming(intersection)) {
    const Edge& edge = net.edge(e);
    const Point a = net.intersection(edge.from).position;
    const Point b = net.intersection(edge.to).position;
    (std::abs(b.x - a.x) >= std::abs(b.y - a.y) ? east_west : north_south).push_back(e);
  }
  SignalPlan plan;
  plan.intersection = intersection;
  plan.cycle = timing.cycle;
  plan.lost_time = timing.lost_time;
  for (auto* group : {&east_west, &north_south})
    if (!group->empty()) plan.phases.push_back({std::move(*group), Millis{0}});
  if (plan.phases.empty())
    throw ConfigError("signalized intersection " + std::to_string(intersection.value) + " has no approaches");

  const auto n = static_cast<std::int64_t>(plan.phases.size());
  const Millis usable = plan.usable_green();
  if (usable <= Millis{0}) throw ConfigError("signal lost time must be shorter than the cycle");
  plan.min_green = std::min(timing.min_green, Millis{usable.count() / n});
  plan.max_green = std::max(std::min(timing.max_green, usable - plan.min_green * (n - 1)),
                            Millis{(usable.count() + n - 1) / n});
  const std::vector<std::uint64_t> equal(plan.phases.size(), 1);
  const auto greens = proportional_split(usable, equal);
  for (std::size_t i = 0; i < plan.phases.size(); ++i) plan.phases[i].green = greens[i];
  plan.validate();
  return plan;
}

SignalPlan atlc_update(const SignalPlan& current, const std::map<EdgeId, std::uint32_t>& counts) {
  SignalPlan plan = current;
  const std::size_t n = plan.phases.size();
  std::vector<std::uint64_t> weight(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (EdgeId a : plan.phases[i].approaches)
      if (auto it = counts.find(a); it != counts.end()) weight[i] += it->second;

  // Greens are clamp(lambda * w_i, min, max) with lambda set so they sum to the
  // usable green. Each pass takes lambda = remaining / open weight and fixes
  // the violators on the side whose clamping moves the total most; those stay
  // clamped at the final lambda. Integer arithmetic keeps the tests exact.
  __extension__ typedef __int128 i128;
  const std::int64_t lo = plan.min_green.count(), hi = plan.max_green.count();
  std::vector<std::optional<Millis>> fixed(n);
  std::int64_t remaining = plan.usable_green().count();
  for (;;) {
    std::vector<std::size_t> open;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!fixed[i]) open.push_back(i), total += weight[i];
    if (open.empty()) break;
    if (total == 0) {  // all-zero counts split equally
      for (auto i : open) weight[i] = 1;
      continue;
    }
    // Scaled by total: phase i wants remaining * w_i.
    i128 up = 0, down = 0;
    for (auto i : open) {
      const i128 want = static_cast<i128>(remaining) * weight[i];
      if (want < static_cast<i128>(lo) * total) up += static_cast<i128>(lo) * total - want;
      if (want > static_cast<i128>(hi) * total) down += want - static_cast<i128>(hi) * total;
    }
    if (up == 0 && down == 0) break;
    const std::int64_t before = remaining;
    for (auto i : open) {
      const i128 want = static_cast<i128>(before) * weight[i];
      if (up >= down && want < static_cast<i128>(lo) * total) fixed[i] = plan.min_green;
      if (down >= up && want > static_cast<i128>(hi) * total) fixed[i] = plan.max_green;
      if (fixed[i]) remaining -= fixed[i]->count();
    }
  }
  std::vector<std::size_t> open;
  std::vector<std::uint64_t> w;
  for (std::size_t i = 0; i < n; ++i)
    if (!fixed[i]) open.push_back(i), w.push_back(weight[i]);
  const auto split = proportional_split(Millis{remaining}, w);
  for (std::size_t j = 0; j < open.size(); ++j) plan.phases[open[j]].green = split[j];
  for (std::size_t i = 0; i < n; ++i)
    if (fixed[i]) plan.phases[i].green = *fixed[i];
  return plan;
}

DualEdgePair DualEdgePair::from_edges(const Edge& a, const Edge& b) {
  if (a.dual != b.id || b.dual != a.id)
    throw ConfigError("edges " + std::to_string(a.id.value) + " and " + std::to_string(b.id.value) +
                      " are not a dual pair");
  DualEdgePair p;
  p.edge_a = a.id;
  p.edge_b = b.id;
  p.lanes_a = a.lanes;
  p.lanes_b = b.lanes;
  p.total_lanes = a.lanes + b.lanes;
  return p;
}

DlrAction dlr_check(const DualEdgePair& pair, double demand_a, double demand_b, Tick tick, const DlrParams& params) {
  if (!pair.stable() || tick < pair.cooldown_until) return DlrAction::none;
  const bool a_heavier = demand_a >= demand_b;
  const double heavy = a_heavier ? demand_a : demand_b;
  const double light = a_heavier ? demand_b : demand_a;
  if (!(heavy > 0.0)) return DlrAction::none;
  const bool imbalanced = light == 0.0 || heavy >= params.ratio * light;
  if (!imbalanced) return DlrAction::none;
  const PairSide donor = a_heavier ? PairSide::b : PairSide::a;
  if (pair.lanes(donor) <= 1) return DlrAction::none;
  return a_heavier ? DlrAction::reverse_toward_a : DlrAction::reverse_toward_b;
}

void dlr_begin(DualEdgePair& pair, DlrAction action, Tick tick) {
  if (action == DlrAction::none) return;
  if (!pair.stable()) throw StateError("lane reversal already in progress");
  const PairSide donor = action == DlrAction::reverse_toward_a ? PairSide::b : PairSide::a;
  if (pair.lanes(donor) <= 1) throw StateError("donor direction has a single lane");
  pair.clearing = DualEdgePair::Clearing{donor, pair.lanes(donor) - 1, tick};
}

DlrCommit dlr_commit(DualEdgePair& pair, std::uint32_t clearing_lane_vehicles, Tick tick, const DlrParams& params) {
  if (pair.stable()) throw StateError("dlr_commit called on a stable pair");
  if (clearing_lane_vehicles > 0) return DlrCommit::still_clearing;
  if (pair.clearing->donor == PairSide::a) {
    --pair.lanes_a;
    ++pair.lanes_b;
  } else {
    --pair.lanes_b;
    ++pair.lanes_a;
  }
  pair.clearing.reset();
  pair.cooldown_until = tick + params.cooldown;
  return DlrCommit::committed;
}

DlgReport dlg_screen(NodeId intersection, const std::map<EdgeId, double>& volumes, std::span<const LaneGroup> groups,
                     const DlgThresholds& thresholds) {
  DlgReport report;
  report.intersection = intersection;
  for (const auto& g : groups) {
    if (!(g.capacity > 0.0) || g.lanes == 0)
      throw ConfigError("lane group for edge " + std::to_string(g.approach.value) + " has zero capacity");
    ApproachRatios r;
    r.approach = g.approach;
    auto it = volumes.find(g.approach);
    r.volume = it == volumes.end() ? 0.0 : std::max(0.0, it->second);
    r.v_over_c = r.volume / g.capacity;
    r.v_over_l = r.volume / g.lanes;
    report.approaches.push_back(r);
  }
  if (report.approaches.empty()) {
    report.reason = "no lane groups";
    return report;
  }
  auto [lo, hi] = std::minmax_element(report.approaches.begin(), report.approaches.end(),
                                      [](auto& a, auto& b) { return a.v_over_c < b.v_over_c; });
  report.flagged = hi->v_over_c >= thresholds.flag && lo->v_over_c <= thresholds.imbalance;
  std::ostringstream why;
  why << "max V/C " << hi->v_over_c << " on edge " << hi->approach.value << ", min V/C " << lo->v_over_c
      << " on edge " << lo->approach.value;
  report.reason = why.str();
  return report;
}

}  // namespace dtm
