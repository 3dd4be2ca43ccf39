#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "dtm/baselines.hpp"
#include "dtm/comms.hpp"
#include "dtm/routing.hpp"
#include "dtm/scenario.hpp"
#include "dtm/traffic.hpp"
#include "dtm/vam.hpp"

namespace dtm {

/// One row of the decision trace.
struct DecisionRecord {
  Tick tick;
  VehicleId vehicle;
  double current_est;
  double best_alt_est;
  bool recommended;
  bool complied;
};

/// A rerouting policy driven by the harness around each engine step.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual StrategyKind kind() const = 0;
  /// Runs before the world advances to `tick`.
  virtual void before_step(World& world, Tick tick) = 0;
  /// Runs after step(world, tick).
  virtual void after_step(const World&, Tick, std::span<const Event>) {}

  void record_decisions(bool on) { record_ = on; }
  const std::vector<DecisionRecord>& decisions() const { return decisions_; }

 protected:
  bool record_ = false;
  std::vector<DecisionRecord> decisions_;
};

std::unique_ptr<Strategy> make_strategy(const ScenarioConfig& config, RouteCache& routes);

}  // namespace dtm
