#include "dtm/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dtm/error.hpp"
#include "dtm/rng.hpp"

namespace dtm {

using nlohmann::json;

std::string_view to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::vam: return "vam";
    case StrategyKind::centralized: return "centralized";
    case StrategyKind::alert: return "alert";
    case StrategyKind::none: return "none";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view text) {
  if (text == "vam") return StrategyKind::vam;
  if (text == "centralized") return StrategyKind::centralized;
  if (text == "alert") return StrategyKind::alert;
  if (text == "none") return StrategyKind::none;
  throw ConfigError("unknown strategy '" + std::string(text) + "' (expected vam, centralized, alert or none)");
}

Tick ScenarioConfig::tick_limit() const {
  if (max_ticks) return *max_ticks;
  return std::max<Tick>(20 * departure_window, 1000);
}

void ScenarioConfig::validate() const {
  if (grid.has_value() == !network_file.empty()) throw ConfigError("network: give exactly one of grid or file");
  if (vehicle_count < 1) throw ConfigError("vehicles must be at least 1");
  if (departure_window < 0) throw ConfigError("departure_window must be >= 0");
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (max_ticks && *max_ticks < 1) throw ConfigError("max_ticks must be at least 1");
  if (!(world.seconds_per_tick > 0.0)) throw ConfigError("seconds_per_tick must be positive");
  if (std::llround(world.seconds_per_tick * 1000.0) < 1) throw ConfigError("seconds_per_tick below 1 ms");
  if (world.dlr.window < 1) throw ConfigError("lane_reversal.window must be at least 1 tick");
  if (world.dlr.cooldown < 0) throw ConfigError("lane_reversal.cooldown must be >= 0");
  if (!(world.dlr.ratio >= 1.0)) throw ConfigError("lane_reversal.ratio must be >= 1");
  world.cost.validate();
  comms.validate();
  routing.validate();
  zones.validate();
  for (const auto& inj : injections)
    if (inj.duration < 0 || inj.not_before < 0) throw ConfigError("injection times must be >= 0");
  for (const auto& od : demand) {
    if (!(od.weight > 0.0)) throw ConfigError("demand weights must be positive");
    if (od.origin == od.destination) throw ConfigError("demand pair with origin == destination");
  }
  for (const auto& inj : injections)
    if (inj.vehicle && inj.vehicle->value >= vehicle_count)
      throw ConfigError("injection names vehicle " + std::to_string(inj.vehicle->value) + " beyond the population");
}

namespace {

/// Typed field access with key-path error messages.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  void only(std::initializer_list<const char*> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError("unknown key " + sub(it.key()));
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(sub(key) + " must be a number");
    return v.get<double>();
  }

  template <class Int>
  Int integer(const char* key, Int def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(sub(key) + " must be an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) throw ConfigError(sub(key) + " is too large");
      return static_cast<Int>(u);
    }
    const auto s = v.get<std::int64_t>();
    if (s < static_cast<std::int64_t>(std::numeric_limits<Int>::min()) ||
        (s > 0 && static_cast<std::uint64_t>(s) > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())))
      throw ConfigError(sub(key) + " is out of range");
    return static_cast<Int>(s);
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) throw ConfigError(sub(key) + " must be true or false");
    return j_.at(key).get<bool>();
  }

  std::string text(const char* key, std::string def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_string()) throw ConfigError(sub(key) + " must be a string");
    return j_.at(key).get<std::string>();
  }

  Reader object(const char* key) const { return Reader(j_.at(key), sub(key)); }

 private:
  const json& j_;
  std::string path_;
  std::string where() const { return path_.empty() ? "scenario" : path_; }
};

Millis seconds_to_ms(double s, const std::string& what) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError(what + " must be a non-negative number of seconds");
  return Millis{std::llround(s * 1000.0)};
}

double ms_to_seconds(Millis m) { return static_cast<double>(m.count()) / 1000.0; }

}  // namespace

ScenarioConfig parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  Reader r(doc, "");
  r.only({"format_version", "network", "vehicles", "departure_window", "seed", "runs", "max_ticks", "strategy",
          "seconds_per_tick", "cost", "signals", "comms", "routing", "alert", "lane_reversal", "dlg", "demand",
          "injections", "outputs", "check_conservation"});
  if (!r.has("format_version")) throw ConfigError("format_version is required");
  const int version = r.integer<int>("format_version", 0);
  if (version != kScenarioFormatVersion)
    throw ConfigError("unsupported format_version " + std::to_string(version) + " (expected " +
                      std::to_string(kScenarioFormatVersion) + ")");

  ScenarioConfig c;
  if (!r.has("network")) throw ConfigError("network is required");
  {
    Reader n = r.object("network");
    n.only({"grid", "file"});
    if (n.has("grid") == n.has("file")) throw ConfigError("network: give exactly one of grid or file");
    if (n.has("grid")) {
      Reader g = n.object("grid");
      g.only({"rows", "cols", "block_m", "lanes", "free_flow_speed", "per_lane_capacity", "signalized"});
      GridSpec spec;
      spec.rows = g.integer<std::uint32_t>("rows", spec.rows);
      spec.cols = g.integer<std::uint32_t>("cols", spec.cols);
      spec.block_length_m = g.number("block_m", spec.block_length_m);
      spec.lanes = g.integer<std::uint32_t>("lanes", spec.lanes);
      spec.speed = g.number("free_flow_speed", spec.speed);
      spec.per_lane_capacity = g.integer<std::uint32_t>("per_lane_capacity", spec.per_lane_capacity);
      spec.signalized = g.boolean("signalized", spec.signalized);
      c.grid = spec;
    } else {
      std::filesystem::path p = n.text("file", "");
      if (p.empty()) throw ConfigError("network.file must not be empty");
      c.network_file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
  }
  c.vehicle_count = r.integer<std::uint32_t>("vehicles", c.vehicle_count);
  c.departure_window = r.integer<Tick>("departure_window", c.departure_window);
  c.seed = r.integer<std::uint64_t>("seed", c.seed);
  c.runs = r.integer<std::uint32_t>("runs", c.runs);
  if (r.has("max_ticks")) c.max_ticks = r.integer<Tick>("max_ticks", 0);
  c.strategy = parse_strategy(r.text("strategy", "vam"));
  c.world.seconds_per_tick = r.number("seconds_per_tick", c.world.seconds_per_tick);
  c.check_conservation = r.boolean("check_conservation", c.check_conservation);

  if (r.has("cost")) {
    Reader s = r.object("cost");
    s.only({"alpha", "beta", "saturation_flow"});
    c.world.cost.alpha = s.number("alpha", c.world.cost.alpha);
    c.world.cost.beta = s.number("beta", c.world.cost.beta);
    c.world.cost.saturation_flow = s.number("saturation_flow", c.world.cost.saturation_flow);
  }
  if (r.has("signals")) {
    Reader s = r.object("signals");
    s.only({"mode", "cycle_s", "lost_time_s", "min_green_s", "max_green_s"});
    const std::string mode = s.text("mode", "adaptive");
    if (mode == "adaptive")
      c.world.signal_mode = SignalMode::adaptive;
    else if (mode == "fixed")
      c.world.signal_mode = SignalMode::fixed;
    else
      throw ConfigError("signals.mode must be adaptive or fixed");
    auto& t = c.world.timing;
    t.cycle = seconds_to_ms(s.number("cycle_s", ms_to_seconds(t.cycle)), "signals.cycle_s");
    t.lost_time = seconds_to_ms(s.number("lost_time_s", ms_to_seconds(t.lost_time)), "signals.lost_time_s");
    t.min_green = seconds_to_ms(s.number("min_green_s", ms_to_seconds(t.min_green)), "signals.min_green_s");
    t.max_green = seconds_to_ms(s.number("max_green_s", ms_to_seconds(t.max_green)), "signals.max_green_s");
    if (t.cycle <= t.lost_time) throw ConfigError("signals.cycle_s must exceed lost_time_s");
    if (t.min_green > t.max_green) throw ConfigError("signals.min_green_s must not exceed max_green_s");
  }
  if (r.has("comms")) {
    Reader s = r.object("comms");
    s.only({"range_m", "interval", "horizon", "drop_probability"});
    c.comms.range_m = s.number("range_m", c.comms.range_m);
    c.comms.interval = s.integer<Tick>("interval", c.comms.interval);
    c.comms.horizon = s.integer<std::uint32_t>("horizon", c.comms.horizon);
    c.comms.drop_probability = s.number("drop_probability", c.comms.drop_probability);
  }
  if (r.has("routing")) {
    Reader s = r.object("routing");
    s.only({"compliance", "switch_margin", "unknown_edge_policy", "k"});
    c.routing.compliance = s.number("compliance", c.routing.compliance);
    c.routing.switch_margin = s.number("switch_margin", c.routing.switch_margin);
    c.routing.unknown_edge_policy = parse_unknown_edge_policy(s.text("unknown_edge_policy", "free-flow"));
    c.routing.k = s.integer<std::uint32_t>("k", static_cast<std::uint32_t>(c.routing.k));
  }
  if (r.has("alert")) {
    Reader s = r.object("alert");
    s.only({"speed_threshold", "persist_ticks", "radius_m", "lookahead_edges", "penalty", "min_occupancy"});
    c.zones.speed_threshold = s.number("speed_threshold", c.zones.speed_threshold);
    c.zones.persist_ticks = s.integer<Tick>("persist_ticks", c.zones.persist_ticks);
    c.zones.radius_m = s.number("radius_m", c.zones.radius_m);
    c.zones.lookahead_edges = s.integer<std::uint32_t>("lookahead_edges", c.zones.lookahead_edges);
    c.zones.penalty = s.number("penalty", c.zones.penalty);
    c.zones.min_occupancy = s.number("min_occupancy", c.zones.min_occupancy);
  }
  if (r.has("lane_reversal")) {
    Reader s = r.object("lane_reversal");
    s.only({"enabled", "ratio", "window", "cooldown"});
    c.world.lane_reversal = s.boolean("enabled", c.world.lane_reversal);
    c.world.dlr.ratio = s.number("ratio", c.world.dlr.ratio);
    c.world.dlr.window = s.integer<Tick>("window", c.world.dlr.window);
    c.world.dlr.cooldown = s.integer<Tick>("cooldown", c.world.dlr.cooldown);
  }
  if (r.has("dlg")) {
    Reader s = r.object("dlg");
    s.only({"enabled", "flag", "imbalance"});
    c.world.dlg_screening = s.boolean("enabled", c.world.dlg_screening);
    c.world.dlg.flag = s.number("flag", c.world.dlg.flag);
    c.world.dlg.imbalance = s.number("imbalance", c.world.dlg.imbalance);
  }
  if (r.has("demand")) {
    const json& arr = r.at("demand");
    if (!arr.is_array()) throw ConfigError("demand must be a list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader s(arr[i], "demand[" + std::to_string(i) + "]");
      s.only({"origin", "destination", "weight"});
      if (!s.has("origin") || !s.has("destination")) throw ConfigError(s.sub("origin/destination") + " required");
      c.demand.push_back({NodeId(s.integer<std::uint32_t>("origin", 0)),
                          NodeId(s.integer<std::uint32_t>("destination", 0)), s.number("weight", 1.0)});
    }
  }
  if (r.has("injections")) {
    const json& arr = r.at("injections");
    if (!arr.is_array()) throw ConfigError("injections must be a list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader s(arr[i], "injections[" + std::to_string(i) + "]");
      s.only({"vehicle", "edge", "not_before", "duration"});
      if (!s.has("edge")) throw ConfigError(s.sub("edge") + " is required");
      InjectionSpec inj;
      if (s.has("vehicle")) {
        const json& v = s.at("vehicle");
        if (v.is_string()) {
          if (v.get<std::string>() != "any") throw ConfigError(s.sub("vehicle") + " must be an id or \"any\"");
        } else {
          inj.vehicle = VehicleId(s.integer<std::uint32_t>("vehicle", 0));
        }
      }
      inj.edge = EdgeId(s.integer<std::uint32_t>("edge", 0));
      inj.not_before = s.integer<Tick>("not_before", inj.not_before);
      inj.duration = s.integer<Tick>("duration", inj.duration);
      c.injections.push_back(inj);
    }
  }
  if (r.has("outputs")) {
    Reader s = r.object("outputs");
    s.only({"edges", "decisions", "control"});
    c.outputs.edges = s.boolean("edges", false);
    c.outputs.decisions = s.boolean("decisions", false);
    c.outputs.control = s.boolean("control", false);
  }
  c.world.record_control = c.outputs.control;
  c.validate();
  return c;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str(), path.parent_path());
}

std::string serialize_scenario(const ScenarioConfig& c) {
  json doc;
  doc["format_version"] = kScenarioFormatVersion;
  if (c.grid) {
    const GridSpec& g = *c.grid;
    doc["network"]["grid"] = {{"rows", g.rows},
                              {"cols", g.cols},
                              {"block_m", g.block_length_m},
                              {"lanes", g.lanes},
                              {"free_flow_speed", g.speed},
                              {"per_lane_capacity", g.per_lane_capacity},
                              {"signalized", g.signalized}};
  } else {
    doc["network"]["file"] = c.network_file.string();
  }
  doc["vehicles"] = c.vehicle_count;
  doc["departure_window"] = c.departure_window;
  doc["seed"] = c.seed;
  doc["runs"] = c.runs;
  doc["max_ticks"] = c.max_ticks ? json(*c.max_ticks) : json(nullptr);
  doc["strategy"] = std::string(to_string(c.strategy));
  doc["seconds_per_tick"] = c.world.seconds_per_tick;
  doc["check_conservation"] = c.check_conservation;
  doc["cost"] = {{"alpha", c.world.cost.alpha}, {"beta", c.world.cost.beta},
                 {"saturation_flow", c.world.cost.saturation_flow}};
  const auto& t = c.world.timing;
  doc["signals"] = {{"mode", c.world.signal_mode == SignalMode::adaptive ? "adaptive" : "fixed"},
                    {"cycle_s", ms_to_seconds(t.cycle)},
                    {"lost_time_s", ms_to_seconds(t.lost_time)},
                    {"min_green_s", ms_to_seconds(t.min_green)},
                    {"max_green_s", ms_to_seconds(t.max_green)}};
  doc["comms"] = {{"range_m", c.comms.range_m},
                  {"interval", c.comms.interval},
                  {"horizon", c.comms.horizon},
                  {"drop_probability", c.comms.drop_probability}};
  doc["routing"] = {{"compliance", c.routing.compliance},
                    {"switch_margin", c.routing.switch_margin},
                    {"unknown_edge_policy", std::string(to_string(c.routing.unknown_edge_policy))},
                    {"k", c.routing.k}};
  doc["alert"] = {{"speed_threshold", c.zones.speed_threshold},
                  {"persist_ticks", c.zones.persist_ticks},
                  {"radius_m", c.zones.radius_m},
                  {"lookahead_edges", c.zones.lookahead_edges},
                  {"penalty", c.zones.penalty},
                  {"min_occupancy", c.zones.min_occupancy}};
  doc["lane_reversal"] = {{"enabled", c.world.lane_reversal},
                          {"ratio", c.world.dlr.ratio},
                          {"window", c.world.dlr.window},
                          {"cooldown", c.world.dlr.cooldown}};
  doc["dlg"] = {{"enabled", c.world.dlg_screening}, {"flag", c.world.dlg.flag}, {"imbalance", c.world.dlg.imbalance}};
  json demand = json::array();
  for (const auto& od : c.demand)
    demand.push_back({{"origin", od.origin.value}, {"destination", od.destination.value}, {"weight", od.weight}});
  doc["demand"] = demand;
  json inj = json::array();
  for (const auto& i : c.injections)
    inj.push_back({{"vehicle", i.vehicle ? json(i.vehicle->value) : json("any")},
                   {"edge", i.edge.value},
                   {"not_before", i.not_before},
                   {"duration", i.duration}});
  doc["injections"] = inj;
  doc["outputs"] = {{"edges", c.outputs.edges}, {"decisions", c.outputs.decisions}, {"control", c.outputs.control}};
  return doc.dump(2) + "\n";
}

std::shared_ptr<const RoadNetwork> scenario_network(const ScenarioConfig& c) {
  c.validate();
  auto net = std::make_shared<const RoadNetwork>(c.grid ? generate_grid(*c.grid) : load_network_file(c.network_file));
  if (net->intersection_count() < 2) throw ConfigError("network too small to place distinct O-D pairs");
  for (const auto& inj : c.injections)
    if (!net->contains(inj.edge)) throw ConfigError("injection references unknown edge " + std::to_string(inj.edge.value));
  for (const auto& od : c.demand)
    if (!net->contains(od.origin) || !net->contains(od.destination))
      throw ConfigError("demand references unknown intersection");
  return net;
}

std::vector<Vehicle> build_population(const ScenarioConfig& c, RouteCache& routes, std::uint64_t seed) {
  const RoadNetwork& net = routes.network();
  const std::uint64_t n = net.intersection_count();
  if (n < 2) throw ConfigError("network too small to place distinct O-D pairs");
  std::vector<double> cumulative;
  for (const auto& od : c.demand) cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + od.weight);

  constexpr int kMaxDraws = 100;
  std::vector<Vehicle> out(c.vehicle_count);
  for (std::uint32_t i = 0; i < c.vehicle_count; ++i) {
    RandomStream rng = RandomStream::derive(seed, i, StreamPurpose::population);
    Vehicle& v = out[i];
    v.id = VehicleId(i);
    std::shared_ptr<const RoutePlan> plan;
    for (int attempt = 0; attempt < kMaxDraws && !plan; ++attempt) {
      NodeId o, d;
      if (cumulative.empty()) {
        o = NodeId(static_cast<std::uint32_t>(rng.below(n)));
        d = NodeId(static_cast<std::uint32_t>(rng.below(n)));
      } else {
        const double x = rng.uniform01() * cumulative.back();
        const std::size_t k = std::upper_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin();
        const auto& od = c.demand[std::min(k, c.demand.size() - 1)];
        o = od.origin;
        d = od.destination;
      }
      if (o == d) continue;
      auto p = routes.plan(o, d, c.routing.k);
      if (!p->shortest) continue;
      v.origin = o;
      v.destination = d;
      plan = std::move(p);
    }
    if (!plan)
      throw ConfigError("no reachable O-D pair found for vehicle " + std::to_string(i) + " after " +
                        std::to_string(kMaxDraws) + " draws");
    v.departure_time = rng.between(0, c.departure_window);
    v.current_route = *plan->shortest;
    v.optional_routes = std::shared_ptr<const std::vector<Route>>(plan, &plan->alternatives);
    v.optional_from = v.origin;
    v.compliance_stream = stable_hash({seed, i, static_cast<std::uint64_t>(StreamPurpose::compliance)});
  }
  return out;
}

std::uint64_t population_digest(std::span<const Vehicle> vehicles) {
  std::uint64_t h = stable_hash({vehicles.size()});
  for (const Vehicle& v : vehicles)
    h = stable_hash({h, v.id.value, v.origin.value, v.destination.value, static_cast<std::uint64_t>(v.departure_time)});
  return h;
}

World build_scenario(const ScenarioConfig& c, std::shared_ptr<const RoadNetwork> network, RouteCache& routes,
                     std::uint64_t seed) {
  if (&routes.network() != network.get()) throw StateError("route cache belongs to a different network");
  World w = make_world(std::move(network), c.world);
  add_vehicles(w, build_population(c, routes, seed));
  return w;
}

}  // namespace dtm
