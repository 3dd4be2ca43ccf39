#include "dtm/comms.hpp"

#include <algorithm>
#include <cmath>

#include "dtm/error.hpp"
#include "dtm/rng.hpp"
#include "dtm/traffic.hpp"

namespace dtm {

void CommsParams::validate() const {
  if (!(range_m > 0.0)) throw ConfigError("communication range must be positive");
  if (interval < 1) throw ConfigError("beacon interval must be at least 1 tick");
  if (horizon < 1) throw ConfigError("route horizon N must be at least 1");
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) throw ConfigError("drop probability must be in [0, 1]");
}

std::vector<EdgeId> optional_edges(const BeaconMessage& m) {
  std::vector<EdgeId> out;
  if (!m.optional_routes) return out;
  for (const Route& r : *m.optional_routes) out.insert(out.end(), r.edges.begin(), r.edges.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

BeaconMessage make_beacon(const Vehicle& v, const RoadNetwork& net, std::uint32_t horizon, Tick tick) {
  BeaconMessage m;
  fill_beacon(m, v, net, horizon, tick);
  return m;
}

void fill_beacon(BeaconMessage& m, const Vehicle& v, const RoadNetwork& net, std::uint32_t horizon, Tick tick) {
  m.sender = v.id;
  const EdgeId cur = v.current_edge();
  m.location = net.position_on(cur, v.progress);
  m.speed = v.speed;
  const auto& edges = v.current_route.edges;
  const std::size_t end = std::min(edges.size(), v.route_pos + horizon);
  m.next_edges.assign(edges.begin() + static_cast<std::ptrdiff_t>(v.route_pos),
                      edges.begin() + static_cast<std::ptrdiff_t>(end));
  m.optional_routes = v.optional_routes;
  m.issued_at = tick;
}

namespace {

/// Buckets points by cells of side range_m; only neighbouring cells can be in range.
class CellIndex {
 public:
  CellIndex(std::span<const Point> points, double range) : points_(points), range_(range), r2_(range * range) {
    keys_.resize(points.size());
    for (std::uint32_t i = 0; i < points.size(); ++i) keys_[i] = {cell(points[i].x), cell(points[i].y), i};
    std::sort(keys_.begin(), keys_.end(), [](const Key& a, const Key& b) {
      return a.cx != b.cx ? a.cx < b.cx : (a.cy != b.cy ? a.cy < b.cy : a.i < b.i);
    });
  }

  /// Calls f(j) for every j != i within range of point i (inclusive boundary).
  template <class F>
  void for_each_in_range(std::uint32_t i, F&& f) const {
    const Point p = points_[i];
    const std::int64_t cx = cell(p.x), cy = cell(p.y);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto lo = std::lower_bound(keys_.begin(), keys_.end(), std::pair{cx + dx, cy + dy},
                                   [](const Key& k, std::pair<std::int64_t, std::int64_t> c) {
                                     return k.cx != c.first ? k.cx < c.first : k.cy < c.second;
                                   });
        for (auto it = lo; it != keys_.end() && it->cx == cx + dx && it->cy == cy + dy; ++it) {
          if (it->i == i) continue;
          const double ddx = points_[it->i].x - p.x;
          const double ddy = points_[it->i].y - p.y;
          // compare with hypot too so exact-range pairs are not lost to rounding
          if (ddx * ddx + ddy * ddy > r2_ && std::hypot(ddx, ddy) > range_) continue;
          f(it->i);
        }
      }
    }
  }

 private:
  struct Key {
    std::int64_t cx, cy;
    std::uint32_t i;
  };
  std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / range_)); }

  std::span<const Point> points_;
  double range_, r2_;
  std::vector<Key> keys_;
};

bool delivered(const CommsParams& params, Tick issued_at, VehicleId sender, VehicleId receiver) {
  if (!(params.drop_probability > 0.0)) return true;
  RandomStream s(stable_hash({params.loss_seed, static_cast<std::uint64_t>(issued_at), sender.value, receiver.value}));
  return !(s.uniform01() < params.drop_probability);
}

/// Adds `delta` to counts of each distinct edge in `next`.
void add_edges(std::span<std::uint32_t> counts, const std::vector<EdgeId>& next, std::uint32_t delta) {
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (std::find(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(i), next[i]) !=
        next.begin() + static_cast<std::ptrdiff_t>(i))
      continue;
    counts[next[i].index()] += delta;  // unsigned wrap-around makes a negative delta subtract
  }
}

}  // namespace

Delivery exchange(std::vector<BeaconMessage> beacons, const CommsParams& params, std::vector<char> broadcasting) {
  Delivery d;
  const std::size_t n = beacons.size();
  d.inbox.resize(n);
  if (broadcasting.empty()) broadcasting.assign(n, 1);
  if (broadcasting.size() != n) throw StateError("broadcast mask does not match beacon count");
  std::vector<Point> points(n);
  for (std::size_t i = 0; i < n; ++i) points[i] = beacons[i].location;
  const CellIndex index(points, params.range_m);
  for (std::uint32_t i = 0; i < n; ++i) {
    index.for_each_in_range(i, [&](std::uint32_t j) {
      if (!(broadcasting[i] || broadcasting[j])) return;
      if (delivered(params, beacons[j].issued_at, beacons[j].sender, beacons[i].sender)) d.inbox[i].push_back(j);
    });
    std::sort(d.inbox[i].begin(), d.inbox[i].end());
  }
  auto batch = std::make_shared<BeaconBatch>();
  batch->messages = std::move(beacons);
  d.batch = std::move(batch);
  d.broadcasting = std::move(broadcasting);
  return d;
}

bool broadcasts_at(const Vehicle& v, Tick tick, Tick interval) {
  return v.in_network() && v.departed_at && tick > *v.departed_at && (tick - *v.departed_at) % interval == 0;
}

Delivery broadcast_round(std::span<const Vehicle> vehicles, const RoadNetwork& net, const CommsParams& params,
                         Tick tick) {
  std::vector<BeaconMessage> beacons;
  std::vector<char> mask;
  for (const Vehicle& v : vehicles) {
    if (!v.in_network()) continue;
    beacons.push_back(make_beacon(v, net, params.horizon, tick));
    mask.push_back(broadcasts_at(v, tick, params.interval) ? 1 : 0);
  }
  return exchange(std::move(beacons), params, std::move(mask));
}

const BeaconMessage* NeighborTable::find(VehicleId sender) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), sender,
                             [](const Entry& e, VehicleId s) { return e.sender < s; });
  return it != entries_.end() && it->sender == sender ? it->message : nullptr;
}

void NeighborTable::update(const std::shared_ptr<const BeaconBatch>& batch, std::span<const std::uint32_t> received,
                           Tick now, Tick staleness) {
  if (batch && !received.empty()) {
    std::vector<Entry> incoming;
    incoming.reserve(received.size());
    for (std::uint32_t idx : received) {
      const BeaconMessage& m = batch->messages.at(idx);
      if (m.sender == owner_) continue;
      incoming.push_back({m.sender, &m});
    }
    std::stable_sort(incoming.begin(), incoming.end(), [](const Entry& a, const Entry& b) { return a.sender < b.sender; });
    std::vector<Entry> merged;
    merged.reserve(entries_.size() + incoming.size());
    auto a = entries_.begin();
    auto b = incoming.begin();
    auto push = [&](const Entry& e) {
      if (!merged.empty() && merged.back().sender == e.sender) {
        if (e.message->issued_at >= merged.back().message->issued_at) merged.back() = e;
      } else {
        merged.push_back(e);
      }
    };
    while (a != entries_.end() || b != incoming.end()) {
      if (b == incoming.end() || (a != entries_.end() && a->sender <= b->sender))
        push(*a++);
      else
        push(*b++);
    }
    entries_ = std::move(merged);
    batches_.push_back(batch);
  }
  std::erase_if(entries_, [&](const Entry& e) { return now - e.message->issued_at > staleness; });
  // Drop batches no surviving entry points into.
  std::erase_if(batches_, [&](const std::shared_ptr<const BeaconBatch>& bt) {
    const auto* lo = bt->messages.data();
    const auto* hi = lo + bt->messages.size();
    return std::none_of(entries_.begin(), entries_.end(),
                        [&](const Entry& e) { return e.message >= lo && e.message < hi; });
  });
}

void update_neighbor_table(NeighborTable& table, const std::shared_ptr<const BeaconBatch>& batch,
                           std::span<const std::uint32_t> received, Tick now, const CommsParams& params) {
  table.update(batch, received, now, params.staleness_horizon());
}

std::map<EdgeId, std::uint32_t> count_vehicles_per_edge(const NeighborTable& table,
                                                        std::span<const EdgeId> edges_of_interest) {
  std::map<EdgeId, std::uint32_t> counts;
  for (EdgeId e : edges_of_interest) counts[e] = 0;
  for (const auto& entry : table.entries()) {
    const auto& next = entry.message->next_edges;
    for (auto& [edge, count] : counts)
      if (std::find(next.begin(), next.end(), edge) != next.end()) ++count;
  }
  return counts;
}

void accumulate_counts(const NeighborTable& table, std::span<std::uint32_t> counts) {
  for (const auto& entry : table.entries()) add_edges(counts, entry.message->next_edges, 1);
}

BeaconBoard::BeaconBoard(std::size_t fleet_size, std::size_t edge_count, const CommsParams& params)
    : params_(params),
      fleet_(static_cast<std::uint32_t>(fleet_size)),
      edges_(edge_count),
      window_(static_cast<std::size_t>(params.staleness_horizon()) + 1),
      last_(fleet_size * fleet_size, kNever),
      history_(fleet_size * window_),
      live_(fleet_size, 0),
      global_(edge_count, 0) {
  params_.validate();
}

void BeaconBoard::round(std::span<const Vehicle> vehicles, const RoadNetwork& net, Tick now) {
  if (vehicles.size() != fleet_) throw StateError("beacon board built for a different fleet size");
  if (now <= now_) throw StateError("beacon rounds must advance in time");
  if (now > INT32_MAX) throw StateError("tick out of range for the beacon board");
  now_ = now;
  std::fill(global_.begin(), global_.end(), 0);
  std::fill(live_.begin(), live_.end(), 0);
  broadcasters_.clear();

  std::vector<std::uint32_t> ids;
  std::vector<Point> points;
  std::vector<char> mask;
  for (const Vehicle& v : vehicles) {
    if (!v.in_network()) continue;
    BeaconMessage& m = history_[v.id.index() * window_ + static_cast<std::size_t>(now % static_cast<Tick>(window_))];
    fill_beacon(m, v, net, params_.horizon, now);
    add_edges(global_, m.next_edges, 1);
    live_[v.id.index()] = 1;
    ids.push_back(v.id.value);
    points.push_back(m.location);
    mask.push_back(broadcasts_at(v, now, params_.interval) ? 1 : 0);
    if (mask.back()) broadcasters_.push_back(v.id);
  }
  const CellIndex index(points, params_.range_m);
  const auto t = static_cast<std::int32_t>(now);
  for (std::uint32_t i = 0; i < ids.size(); ++i) {
    if (!mask[i]) continue;
    const VehicleId a(ids[i]);
    index.for_each_in_range(i, [&](std::uint32_t j) {
      const VehicleId b(ids[j]);
      if (delivered(params_, now, b, a)) last_[std::size_t{a.value} * fleet_ + b.value] = t;
      if (delivered(params_, now, a, b)) last_[std::size_t{b.value} * fleet_ + a.value] = t;
    });
  }
}

const BeaconMessage* BeaconBoard::heard(VehicleId receiver, VehicleId sender) const {
  if (receiver == sender || receiver.value >= fleet_ || sender.value >= fleet_) return nullptr;
  const std::int32_t last = last_[std::size_t{receiver.value} * fleet_ + sender.value];
  return valid(last) ? &slot(sender.value, last) : nullptr;
}

void BeaconBoard::counts_for(VehicleId receiver, std::span<std::uint32_t> counts) const {
  if (counts.size() != edges_) throw StateError("count buffer does not match edge count");
  std::copy(global_.begin(), global_.end(), counts.begin());
  const auto t = static_cast<std::int32_t>(now_);
  const std::int32_t* row = &last_[std::size_t{receiver.value} * fleet_];
  // Start from every current beacon, then swap in what the receiver actually holds.
  for (std::uint32_t s = 0; s < fleet_; ++s) {
    const std::int32_t last = row[s];
    if (last == t && s != receiver.value) continue;
    if (live_[s]) add_edges(counts, slot(s, now_).next_edges, ~std::uint32_t{0});
    if (s != receiver.value && valid(last)) add_edges(counts, slot(s, last).next_edges, 1);
  }
}

}  // namespace dtm
