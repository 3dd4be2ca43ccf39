#pragma once

#include <climits>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "dtm/network.hpp"
#include "dtm/routing.hpp"

namespace dtm {

struct Vehicle;

struct CommsParams {
  double range_m = 5000.0;  ///< D_R
  Tick interval = 5;        ///< I_T
  std::uint32_t horizon = 5;  ///< N
  /// Probability that a single directed delivery is lost. 0 = ideal channel.
  double drop_probability = 0.0;
  std::uint64_t loss_seed = 0;

  void validate() const;
  Tick staleness_horizon() const { return 2 * interval; }
};

struct BeaconMessage {
  VehicleId sender;
  Point location;
  double speed = 0.0;
  std::vector<EdgeId> next_edges;      ///< first N edges of the sender's remaining R_C
  std::shared_ptr<const std::vector<Route>> optional_routes;  ///< sender's R_O, shared; may be null
  Tick issued_at = 0;
};

/// Every edge on any of the message's optional routes, ascending, no repeats.
std::vector<EdgeId> optional_edges(const BeaconMessage& message);

/// All beacons of one exchange round. Receivers hold shared ownership
/// through their neighbor tables.
struct BeaconBatch {
  std::vector<BeaconMessage> messages;
};

/// Result of a round: inbox[i] lists indices into batch->messages received
/// by the sender of message i.
struct Delivery {
  std::shared_ptr<const BeaconBatch> batch;
  std::vector<std::vector<std::uint32_t>> inbox;
  std::vector<char> broadcasting;  ///< per message: its sender started an exchange this round
};

/// The beacon an in-network vehicle would broadcast now.
BeaconMessage make_beacon(const Vehicle& vehicle, const RoadNetwork& net, std::uint32_t horizon, Tick tick);
/// Same, reusing `out`'s storage.
void fill_beacon(BeaconMessage& out, const Vehicle& vehicle, const RoadNetwork& net, std::uint32_t horizon, Tick tick);

/// Symmetric range-gated exchange: every pair within range_m (inclusive) in
/// which at least one side is broadcasting receives each other's message
/// (broadcast plus reciprocation). An empty mask means everyone broadcasts.
Delivery exchange(std::vector<BeaconMessage> beacons, const CommsParams& params,
                  std::vector<char> broadcasting = {});

/// True when the vehicle's own beacon timer fires: every `interval` ticks
/// counted from its departure.
bool broadcasts_at(const Vehicle& vehicle, Tick tick, Tick interval);

/// One exchange round at `tick`: vehicles whose timer fires broadcast, every
/// in-network vehicle in range reciprocates.
Delivery broadcast_round(std::span<const Vehicle> vehicles, const RoadNetwork& net, const CommsParams& params,
                         Tick tick);

class NeighborTable {
 public:
  struct Entry {
    VehicleId sender;
    const BeaconMessage* message;
  };

  explicit NeighborTable(VehicleId owner = VehicleId(0)) : owner_(owner) {}

  VehicleId owner() const { return owner_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const BeaconMessage* find(VehicleId sender) const;

  /// Merges received messages (latest issued_at per sender wins), drops the
  /// owner's own beacon, then evicts entries older than `staleness` ticks.
  void update(const std::shared_ptr<const BeaconBatch>& batch, std::span<const std::uint32_t> received, Tick now,
              Tick staleness);

 private:
  VehicleId owner_;
  std::vector<Entry> entries_;  ///< sorted by sender
  std::vector<std::shared_ptr<const BeaconBatch>> batches_;
};

void update_neighbor_table(NeighborTable& table, const std::shared_ptr<const BeaconBatch>& batch,
                           std::span<const std::uint32_t> received, Tick now, const CommsParams& params);

/// Number of distinct neighbors whose next_edges contain each edge of
/// interest. Edges without data map to 0.
std::map<EdgeId, std::uint32_t> count_vehicles_per_edge(const NeighborTable& table,
                                                        std::span<const EdgeId> edges_of_interest);

/// Dense variant: adds each neighbor's next_edges into `counts` (indexed by
/// edge id), one per sender per edge.
void accumulate_counts(const NeighborTable& table, std::span<std::uint32_t> counts);

/// Fleet-wide neighbor state. Gives every vehicle the same view a
/// NeighborTable fed by broadcast_round would hold, but keeps one beacon
/// history per sender and a dense last-heard matrix instead of per-receiver
/// copies, so a round costs O(broadcasters x in-range vehicles).
class BeaconBoard {
 public:
  BeaconBoard(std::size_t fleet_size, std::size_t edge_count, const CommsParams& params);

  /// One exchange round at `now` (same rules as broadcast_round). Rounds
  /// must be run at strictly increasing ticks, normally every tick.
  void round(std::span<const Vehicle> vehicles, const RoadNetwork& net, Tick now);

  /// Vehicles whose beacon timer fired in the last round, ascending.
  std::span<const VehicleId> broadcasters() const { return broadcasters_; }

  /// The message `receiver` currently holds from `sender`, null if none
  /// (never heard, evicted, or sender == receiver).
  const BeaconMessage* heard(VehicleId receiver, VehicleId sender) const;

  /// Overwrites `counts` (indexed by edge id) with the number of held
  /// messages whose next_edges contain each edge. Equals accumulate_counts
  /// on the receiver's table.
  void counts_for(VehicleId receiver, std::span<std::uint32_t> counts) const;

  template <class F>
  void for_each_heard(VehicleId receiver, F&& f) const {
    for (std::uint32_t s = 0; s < fleet_; ++s)
      if (const BeaconMessage* m = heard(receiver, VehicleId(s))) f(*m);
  }

 private:
  static constexpr std::int32_t kNever = INT32_MIN;
  const BeaconMessage& slot(std::uint32_t sender, Tick issued) const {
    return history_[static_cast<std::size_t>(sender) * window_ + static_cast<std::size_t>(issued % window_)];
  }
  bool valid(std::int32_t last) const { return last != kNever && now_ - last <= params_.staleness_horizon(); }

  CommsParams params_;
  std::uint32_t fleet_;
  std::size_t edges_;
  std::size_t window_;
  Tick now_ = -1;
  std::vector<std::int32_t> last_;  ///< [receiver * fleet + sender] tick last heard
  std::vector<BeaconMessage> history_;
  std::vector<char> live_;  ///< sender built a beacon this round
  std::vector<std::uint32_t> global_;  ///< counts over every beacon of this round
  std::vector<VehicleId> broadcasters_;
};

}  // namespace dtm
