#include "dtm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>

#include <json.hpp>

#include "dtm/error.hpp"

namespace dtm {

namespace {

std::string num(double x, int precision = 3) {
  if (std::isnan(x)) return "nan";
  std::ostringstream o;
  o.imbue(std::locale::classic());
  o << std::fixed << std::setprecision(precision) << x;
  return o.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

class Injector {
 public:
  explicit Injector(const std::vector<InjectionSpec>& specs) : specs_(specs), fired_(specs.size(), false) {}

  void handle(World& w, Tick tick, std::span<const Event> events) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      if (fired_[i] || tick < specs_[i].not_before) continue;
      for (const Event& ev : events) {
        if (ev.kind != EventKind::enter_edge || ev.edge != specs_[i].edge) continue;
        if (specs_[i].vehicle && *specs_[i].vehicle != ev.vehicle) continue;
        Vehicle& v = w.vehicles[ev.vehicle.index()];
        // Passed straight through within the tick, or already held by another injection.
        if (v.state != VehicleState::moving || v.current_edge() != ev.edge) continue;
        stop_vehicle(w, v, tick + specs_[i].duration);
        fired_[i] = true;
        break;
      }
    }
  }

  const std::vector<bool>& fired() const { return fired_; }

 private:
  const std::vector<InjectionSpec>& specs_;
  std::vector<bool> fired_;
};

void check_conservation(const World& w, Tick tick) {
  const Census c = census(w);
  if (w.departed != c.arrived + c.in_flight + c.stopped || c.arrived != w.arrived ||
      c.pending + w.departed != w.vehicles.size())
    throw StateError("conservation violated at tick " + std::to_string(tick) + ": departed " +
                     std::to_string(w.departed) + ", arrived " + std::to_string(c.arrived) + ", in flight " +
                     std::to_string(c.in_flight) + ", stopped " + std::to_string(c.stopped));
}

void aggregate(RunReport& rep) {
  std::vector<double> ct, mt, md, sw;
  rep.truncated = 0;
  for (const auto& r : rep.runs) {
    if (r.truncated) {
      ++rep.truncated;
      continue;
    }
    ct.push_back(static_cast<double>(r.completion_time));
    mt.push_back(r.mean_travel_time);
    md.push_back(r.median_travel_time);
    sw.push_back(static_cast<double>(r.switches));
  }
  rep.completion_time = summarize(ct);
  rep.mean_travel_time = summarize(mt);
  rep.median_travel_time = summarize(md);
  rep.switches = summarize(sw);
}

double pct(double x, double ref) { return ref == 0.0 ? 0.0 : (x - ref) / ref * 100.0; }

}  // namespace

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (s.n == 0) {
    s.mean = s.stddev = std::nan("");
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

RunMetrics run_once(const ScenarioConfig& config, std::shared_ptr<const RoadNetwork> network, RouteCache& routes,
                    std::uint32_t run_index, std::uint64_t seed, RunTrace* trace, const TickHook& hook) {
  World w = build_scenario(config, network, routes, seed);
  auto strategy = make_strategy(config, routes);
  strategy->record_decisions(trace && config.outputs.decisions);
  Injector injector(config.injections);
  const Tick limit = config.tick_limit();
  std::ostringstream edges;

  RunMetrics m;
  m.run_index = run_index;
  m.seed = seed;
  m.strategy = config.strategy;
  m.population_digest = population_digest(w.vehicles);

  Tick tick = 0;
  for (; tick < limit && !w.finished(); ++tick) {
    strategy->before_step(w, tick);
    const auto events = step(w, tick);
    injector.handle(w, tick, events);
    strategy->after_step(w, tick, events);
    if (config.check_conservation) check_conservation(w, tick);
    if (trace && config.outputs.edges)
      for (std::size_t e = 0; e < w.edges.size(); ++e)
        if (const auto c = w.edges[e].count(); c > 0)
          edges << run_index << ',' << tick << ',' << e << ',' << c << '\n';
    if (hook) hook(w, tick, events);
  }

  m.truncated = !w.finished();
  std::vector<double> travel;
  double dist = 0.0;
  Tick last = 0;
  for (const Vehicle& v : w.vehicles) {
    m.switches += v.switches;
    if (!v.arrived_at) continue;
    travel.push_back(static_cast<double>(*v.arrived_at - v.departure_time));
    dist += v.distance_m;
    last = std::max(last, *v.arrived_at);
    m.max_departure = std::max(m.max_departure, v.departed_at.value_or(0));
  }
  m.arrived = travel.size();
  m.completion_time = m.truncated ? limit : last;
  m.mean_travel_time = summarize(travel).mean;
  m.median_travel_time = median(travel);
  m.mean_distance_m = travel.empty() ? std::nan("") : dist / static_cast<double>(travel.size());
  for (const EdgeState& st : w.edges) {
    m.edge_peaks.push_back(st.peak);
    m.peak_occupancy = std::max(m.peak_occupancy, st.peak);
  }
  m.injections_fired = injector.fired();
  if (trace) {
    trace->decisions = strategy->decisions();
    trace->control = std::move(w.control_log);
    trace->edges_csv = edges.str();
  }
  return m;
}

namespace {

RunReport run_impl(const ScenarioConfig& config, const TickHook& hook, const std::filesystem::path* out) {
  auto net = scenario_network(config);
  RouteCache routes(*net);
  RunReport rep;
  rep.strategy = config.strategy;
  std::ostringstream edges;
  if (out) ensure_dir(*out);
  for (std::uint32_t r = 0; r < config.runs; ++r) {
    RunTrace trace;
    rep.runs.push_back(run_once(config, net, routes, r, config.seed + r, out ? &trace : nullptr, hook));
    if (!out) continue;
    edges << trace.edges_csv;
    // Traces of the first replication only; they grow with population and horizon.
    if (r == 0 && config.outputs.decisions) write_file(*out / "decisions.csv", decisions_csv(trace.decisions));
    if (r == 0 && config.outputs.control) write_file(*out / "control.csv", control_csv(trace.control));
  }
  aggregate(rep);
  if (out) {
    write_file(*out / "runs.csv", runs_csv(rep));
    write_file(*out / "summary.json", summary_json(rep));
    if (config.outputs.edges) write_file(*out / "edges.csv", "run_index,tick,edge_id,count\n" + edges.str());
  }
  return rep;
}

}  // namespace

RunReport run(const ScenarioConfig& config, const TickHook& hook) { return run_impl(config, hook, nullptr); }

RunReport run_to_directory(const ScenarioConfig& config, const std::filesystem::path& out) {
  return run_impl(config, {}, &out);
}

Comparison compare(const std::vector<ScenarioConfig>& configs, const std::filesystem::path& out) {
  if (configs.empty()) throw ConfigError("nothing to compare");
  auto strip = [](ScenarioConfig c) {
    c.strategy = StrategyKind::none;
    return serialize_scenario(c);
  };
  const std::string base = strip(configs.front());
  for (const auto& c : configs)
    if (strip(c) != base) throw ConfigError("compared configs differ in more than the strategy");
  for (std::size_t i = 0; i < configs.size(); ++i)
    for (std::size_t j = i + 1; j < configs.size(); ++j)
      if (configs[i].strategy == configs[j].strategy) throw ConfigError("strategy listed twice");

  Comparison cmp;
  cmp.reference = configs.front().strategy;
  for (const auto& c : configs)
    if (c.strategy == StrategyKind::none) cmp.reference = StrategyKind::none;
  if (!out.empty()) ensure_dir(out);
  for (const auto& c : configs) {
    ComparisonRow row;
    row.report = out.empty() ? run(c) : run_to_directory(c, out / std::string(to_string(c.strategy)));
    cmp.rows.push_back(std::move(row));
  }
  const auto& first = cmp.rows.front().report.runs;
  for (const auto& row : cmp.rows)
    for (std::size_t r = 0; r < first.size(); ++r)
      if (row.report.runs[r].population_digest != first[r].population_digest)
        throw StateError("vehicle populations differ between strategies in run " + std::to_string(r));
  const RunReport* ref = nullptr;
  for (const auto& row : cmp.rows)
    if (row.report.strategy == cmp.reference) ref = &row.report;
  for (auto& row : cmp.rows) {
    row.completion_delta_pct = pct(row.report.completion_time.mean, ref->completion_time.mean);
    row.travel_delta_pct = pct(row.report.mean_travel_time.mean, ref->mean_travel_time.mean);
  }
  if (!out.empty()) write_file(out / "compare.csv", compare_csv(cmp));
  return cmp;
}

std::vector<std::string> sweep_parameters() {
  return {"P_R", "epsilon", "D_R", "I_T", "N", "k", "vehicles", "T_dep", "dlr_ratio"};
}

void set_parameter(ScenarioConfig& c, const std::string& name, double value) {
  auto whole = [&](double lo) {
    if (!(value >= lo) || value != std::floor(value) || value > 4e9)
      throw ConfigError(name + " needs an integer value >= " + num(lo, 0));
    return static_cast<std::int64_t>(value);
  };
  if (name == "P_R")
    c.routing.compliance = value;
  else if (name == "epsilon")
    c.routing.switch_margin = value;
  else if (name == "D_R")
    c.comms.range_m = value;
  else if (name == "I_T")
    c.comms.interval = whole(1);
  else if (name == "N")
    c.comms.horizon = static_cast<std::uint32_t>(whole(1));
  else if (name == "k")
    c.routing.k = static_cast<std::size_t>(whole(0));
  else if (name == "vehicles")
    c.vehicle_count = static_cast<std::uint32_t>(whole(1));
  else if (name == "T_dep")
    c.departure_window = whole(0);
  else if (name == "dlr_ratio")
    c.world.dlr.ratio = value;
  else
    throw ConfigError("unknown sweep parameter '" + name + "'");
  c.validate();
}

std::vector<SweepPoint> sweep(const ScenarioConfig& config, const std::string& param,
                              const std::vector<double>& values, const std::filesystem::path& out) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ScenarioConfig> configs;
  for (double v : values) {
    ScenarioConfig c = config;
    set_parameter(c, param, v);
    configs.push_back(std::move(c));
  }
  if (!out.empty()) ensure_dir(out);
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepPoint p;
    p.value = values[i];
    p.report = out.empty() ? run(configs[i]) : run_to_directory(configs[i], out / (param + "=" + num(values[i])));
    points.push_back(std::move(p));
  }
  if (!out.empty()) write_file(out / "sweep.csv", sweep_csv(param, points));
  return points;
}

std::string runs_csv(const RunReport& rep) {
  std::ostringstream o;
  const std::string s(to_string(rep.strategy));
  o << "run_index,strategy,completion_time,mean_travel_time,median_travel_time,switches,truncated\n";
  for (const auto& r : rep.runs)
    o << r.run_index << ',' << s << ',' << r.completion_time << ',' << num(r.mean_travel_time) << ','
      << num(r.median_travel_time) << ',' << r.switches << ',' << (r.truncated ? 1 : 0) << '\n';
  o << "aggregate," << s << ',' << num(rep.completion_time.mean) << ',' << num(rep.mean_travel_time.mean) << ','
    << num(rep.median_travel_time.mean) << ',' << num(rep.switches.mean) << ',' << rep.truncated << '\n';
  return o.str();
}

std::string summary_json(const RunReport& rep) {
  using nlohmann::json;
  auto stat = [](const Summary& s) {
    return json{{"mean", std::isnan(s.mean) ? json(nullptr) : json(s.mean)}, {"stddev", s.stddev}, {"n", s.n}};
  };
  json runs = json::array();
  for (const auto& r : rep.runs) {
    json fired = json::array();
    for (bool f : r.injections_fired) fired.push_back(f);
    runs.push_back({{"run_index", r.run_index},
                    {"seed", r.seed},
                    {"population_digest", r.population_digest},
                    {"arrived", r.arrived},
                    {"mean_distance_m", std::isnan(r.mean_distance_m) ? json(nullptr) : json(r.mean_distance_m)},
                    {"peak_edge_occupancy", r.peak_occupancy},
                    {"truncated", r.truncated},
                    {"injections_fired", fired}});
  }
  json doc{{"strategy", std::string(to_string(rep.strategy))},
           {"completed_runs", rep.runs.size() - rep.truncated},
           {"truncated_runs", rep.truncated},
           {"completion_time", stat(rep.completion_time)},
           {"mean_travel_time", stat(rep.mean_travel_time)},
           {"median_travel_time", stat(rep.median_travel_time)},
           {"switches", stat(rep.switches)},
           {"runs", runs}};
  return doc.dump(2) + "\n";
}

std::string compare_csv(const Comparison& cmp) {
  std::ostringstream o;
  o << "strategy,completed_runs,completion_time_mean,completion_time_sd,mean_travel_time_mean,mean_travel_time_sd,"
       "switches_mean,completion_delta_pct,travel_delta_pct\n";
  for (const auto& row : cmp.rows) {
    const RunReport& r = row.report;
    o << to_string(r.strategy) << ',' << r.runs.size() - r.truncated << ',' << num(r.completion_time.mean) << ','
      << num(r.completion_time.stddev) << ',' << num(r.mean_travel_time.mean) << ',' << num(r.mean_travel_time.stddev)
      << ',' << num(r.switches.mean) << ',' << num(row.completion_delta_pct, 2) << ',' << num(row.travel_delta_pct, 2)
      << '\n';
  }
  return o.str();
}

std::string sweep_csv(const std::string& param, const std::vector<SweepPoint>& points) {
  std::ostringstream o;
  o << "param,value,completed_runs,completion_time_mean,completion_time_sd,mean_travel_time_mean,"
       "mean_travel_time_sd,switches_mean\n";
  for (const auto& p : points) {
    const RunReport& r = p.report;
    o << param << ',' << num(p.value) << ',' << r.runs.size() - r.truncated << ',' << num(r.completion_time.mean)
      << ',' << num(r.completion_time.stddev) << ',' << num(r.mean_travel_time.mean) << ','
      << num(r.mean_travel_time.stddev) << ',' << num(r.switches.mean) << '\n';
  }
  return o.str();
}

std::string decisions_csv(std::span<const DecisionRecord> rows) {
  std::ostringstream o;
  o << "tick,vehicle,current_est,best_alt_est,recommended,complied\n";
  for (const auto& d : rows)
    o << d.tick << ',' << d.vehicle.value << ',' << num(d.current_est) << ',' << num(d.best_alt_est) << ','
      << (d.recommended ? 1 : 0) << ',' << (d.complied ? 1 : 0) << '\n';
  return o.str();
}

std::string control_csv(std::span<const ControlRecord> rows) {
  std::ostringstream o;
  o << "tick,controller,kind,action,inputs_digest\n";
  for (const auto& r : rows) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : r.inputs) h = (h ^ ch) * 1099511628211ULL;
    o << r.tick << ',' << r.controller << ',' << r.kind << ',' << r.action << ',' << std::hex << std::setw(16)
      << std::setfill('0') << h << std::dec << std::setfill(' ') << '\n';
  }
  return o.str();
}

}  // namespace dtm
