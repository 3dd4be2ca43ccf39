// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <CLI11.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dtm/control.hpp"
#include "dtm/error.hpp"
#include "dtm/harness.hpp"
#include "dtm/rng.hpp"
#include "dtm/routing.hpp"
#include "oracle.hpp"

using namespace dtm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  %-34s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

/// Runs `body`; exceptions count as failure of `name`.
void criterion(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    verdict(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

/// One-sided paired t test of H1: mean(hi - lo) > 0. Returns the p-value.
double p_greater(const std::vector<double>& lo, const std::vector<double>& hi) {
  const std::size_t n = lo.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = hi[i] - lo[i];
  const double m = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / (n - 1));
  if (sd == 0.0) return m > 0.0 ? 0.0 : 1.0;
  const boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::cdf(boost::math::complement(dist, m / (sd / std::sqrt(static_cast<double>(n)))));
}

std::vector<double> completion(const RunReport& r) {
  std::vector<double> out;
  for (const auto& m : r.runs) out.push_back(static_cast<double>(m.completion_time));
  return out;
}

std::vector<double> travel(const RunReport& r) {
  std::vector<double> out;
  for (const auto& m : r.runs) out.push_back(m.mean_travel_time);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Independent per-tick conservation check.
struct ConservationProbe {
  std::size_t ticks = 0;
  std::size_t violations = 0;

  TickHook hook() {
    return [this](const World& w, Tick, std::span<const Event>) {
      ++ticks;
      const Census c = census(w);
      std::size_t on_edges = 0;
      bool lanes_ok = true;
      for (const auto& e : w.edges) {
        on_edges += e.count();
        lanes_ok = lanes_ok && std::accumulate(e.lane_counts.begin(), e.lane_counts.end(), 0u) == e.count();
      }
      for (const auto& p : w.pairs)
        lanes_ok = lanes_ok && p.lanes_a >= 1 && p.lanes_b >= 1 && p.lanes_a + p.lanes_b == p.total_lanes &&
                   w.lanes(p.edge_a) == p.lanes_a && w.lanes(p.edge_b) == p.lanes_b;
      if (w.departed != c.arrived + c.in_flight + c.stopped || c.arrived != w.arrived ||
          c.pending + w.departed != w.vehicles.size() || on_edges != c.in_flight + c.stopped || !lanes_ok)
        ++violations;
    };
  }
};

bool any_truncated(const RunReport& r) { return r.any_truncated(); }

// ---------------------------------------------------------------------------

struct DeskResults {
  std::map<StrategyKind, RunReport> by_strategy;
};

void strategy_ordering(const ScenarioConfig& desk, DeskResults& out) {
  const std::string name = "strategy ordering";
  criterion(name, [&] {
    std::vector<ScenarioConfig> configs;
    for (auto s : {StrategyKind::centralized, StrategyKind::vam, StrategyKind::alert, StrategyKind::none}) {
      ScenarioConfig c = desk;
      c.strategy = s;
      c.check_conservation = true;
      configs.push_back(c);
    }
    const auto t0 = Clock::now();
    const Comparison cmp = compare(configs);
    const double elapsed = seconds_since(t0);
    for (const auto& row : cmp.rows) out.by_strategy[row.report.strategy] = row.report;
    const auto& C = out.by_strategy.at(StrategyKind::centralized);
    const auto& V = out.by_strategy.at(StrategyKind::vam);
    const auto& A = out.by_strategy.at(StrategyKind::alert);
    const auto& N = out.by_strategy.at(StrategyKind::none);
    const bool truncated = any_truncated(C) || any_truncated(V) || any_truncated(A) || any_truncated(N);
    const double p_cv = p_greater(completion(C), completion(V));
    const double p_va = p_greater(completion(V), completion(A));
    const double p_an = p_greater(completion(A), completion(N));
    const double mc = mean(completion(C)), mv = mean(completion(V)), ma = mean(completion(A)),
                 mn = mean(completion(N));
    const bool ordered = mc <= mv && mv <= ma && ma <= mn && p_cv < 0.05 && p_va < 0.05 && p_an < 0.05;
    verdict(name, ordered && !truncated,
            fmt("%zu seeds, means C %.1f <= VAM %.1f <= alert %.1f <= none %.1f; one-sided paired p %.2g, %.2g, %.2g",
                C.runs.size(), mc, mv, ma, mn, p_cv, p_va, p_an));
    verdict("VAM within 10% of centralized", mv <= 1.10 * mc, fmt("VAM / centralized = %.4f (limit 1.10)", mv / mc));
    verdict("desk comparison runtime", elapsed < 180.0, fmt("%.1f s for 4 x %zu runs (limit 180 s)", elapsed,
                                                            C.runs.size()));
  });
}

void compliance_sweep(const ScenarioConfig& desk, const DeskResults& desk_results) {
  const std::string name = "compliance sweep";
  std::vector<SweepPoint> points;
  criterion(name, [&] {
    ScenarioConfig c = desk;
    c.strategy = StrategyKind::vam;
    c.check_conservation = true;
    points = sweep(c, "P_R", {0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
    std::string means;
    bool truncated = false;
    for (const auto& p : points) {
      means += fmt("%s%.1f", means.empty() ? "" : ", ", mean(travel(p.report)));
      truncated = truncated || any_truncated(p.report);
    }
    const double t0 = mean(travel(points[0].report));
    const double t4 = mean(travel(points[2].report));
    const double reduction = 1.0 - t4 / t0;
    verdict("travel time reduction at P_R=0.4", reduction >= 0.10 && !truncated,
            fmt("%.1f%% below P_R=0 (%.1f vs %.1f; limit 10%%)", 100.0 * reduction, t4, t0));
    double worst_p = 1.0;
    for (std::size_t i = 1; i < points.size(); ++i)
      worst_p = std::min(worst_p, p_greater(travel(points[i - 1].report), travel(points[i].report)));
    verdict("travel time non-increasing in P_R", worst_p >= 0.05 && !truncated,
            fmt("means [%s]; smallest one-sided p for an increase %.3g (significant below 0.05)", means.c_str(),
                worst_p));
  });

  criterion("P_R=0 reduces to no-action", [&] {
    if (points.empty() || !desk_results.by_strategy.count(StrategyKind::none))
      throw std::runtime_error("desk runs unavailable");
    const RunReport& vam0 = points[0].report;
    const RunReport& none = desk_results.by_strategy.at(StrategyKind::none);
    std::size_t same = 0;
    for (std::size_t i = 0; i < vam0.runs.size() && i < none.runs.size(); ++i) {
      const auto& a = vam0.runs[i];
      const auto& b = none.runs[i];
      if (a.completion_time == b.completion_time && a.mean_travel_time == b.mean_travel_time &&
          a.median_travel_time == b.median_travel_time && a.switches == 0 && b.switches == 0 &&
          a.truncated == b.truncated && a.edge_peaks == b.edge_peaks && a.population_digest == b.population_digest)
        ++same;
    }
    verdict("P_R=0 reduces to no-action", same == none.runs.size() && same == vam0.runs.size(),
            fmt("%zu of %zu desk seeds identical in every metric", same, none.runs.size()));
  });
}

void dlr_exactness() {
  criterion("DLR trigger exactness", [&] {
    DualEdgePair p;
    p.edge_a = EdgeId(0);
    p.edge_b = EdgeId(1);
    p.lanes_a = p.lanes_b = 2;
    p.total_lanes = 4;
    const bool boundary = dlr_check(p, 1.5, 1.0, 0) == DlrAction::reverse_toward_a &&
                          dlr_check(p, 1.0, 1.5, 0) == DlrAction::reverse_toward_b &&
                          dlr_check(p, 15.0, 10.0, 0) == DlrAction::reverse_toward_a &&
                          dlr_check(p, 1.4999, 1.0, 0) == DlrAction::none &&
                          dlr_check(p, 1.0, 1.4999, 0) == DlrAction::none &&
                          dlr_check(p, 14.9, 10.0, 0) == DlrAction::none;

    const DlrParams params;
    RandomStream rng(2024);
    const double ratios[] = {1.0, 1.2, 1.4999, 1.5, 1.5001, 2.0, 3.0};
    std::size_t steps = 0, begins = 0, commits = 0, wrong_trigger = 0, below_one = 0, occupied_commit = 0,
                not_conserved = 0;
    for (int seq = 0; seq < 10'000; ++seq) {
      DualEdgePair q;
      q.edge_a = EdgeId(0);
      q.edge_b = EdgeId(1);
      q.lanes_a = static_cast<std::uint32_t>(rng.between(1, 4));
      q.lanes_b = static_cast<std::uint32_t>(rng.between(1, 4));
      q.total_lanes = q.lanes_a + q.lanes_b;
      const std::uint32_t total = q.total_lanes;
      for (Tick t = 0; t < 100; ++t, ++steps) {
        if (q.stable()) {
          const double light = static_cast<double>(rng.below(20));
          const double heavy = light == 0.0 && rng.below(2) ? 0.0 : light * ratios[rng.below(7)];
          const bool a_heavy = rng.below(2) == 0;
          const double da = a_heavy ? heavy : light, db = a_heavy ? light : heavy;
          const DlrAction act = dlr_check(q, da, db, t, params);
          // Rule restated: heavier >= 1.5 x lighter, donor keeps a lane, cooldown elapsed.
          const double hi = std::max(da, db), lo = std::min(da, db);
          const std::uint32_t donor_lanes = da >= db ? q.lanes_b : q.lanes_a;
          const bool expect = hi > 0.0 && hi >= 1.5 * lo && donor_lanes > 1 && t >= q.cooldown_until;
          const DlrAction expected_dir = !expect ? DlrAction::none
                                         : da >= db ? DlrAction::reverse_toward_a
                                                    : DlrAction::reverse_toward_b;
          if (act != expected_dir) ++wrong_trigger;
          if (act != DlrAction::none) ++begins;
          dlr_begin(q, act, t);
        } else {
          const std::uint32_t occ = static_cast<std::uint32_t>(rng.below(3));
          const auto before = std::pair{q.lanes_a, q.lanes_b};
          const DlrCommit r = dlr_commit(q, occ, t, params);
          if (r == DlrCommit::committed) {
            ++commits;
            if (occ != 0) ++occupied_commit;
          } else if (std::pair{q.lanes_a, q.lanes_b} != before) {
            ++occupied_commit;
          }
        }
        if (q.lanes_a < 1 || q.lanes_b < 1) ++below_one;
        if (q.lanes_a + q.lanes_b != total || q.total_lanes != total) ++not_conserved;
      }
    }
    const bool pass = boundary && wrong_trigger == 0 && below_one == 0 && occupied_commit == 0 && not_conserved == 0;
    verdict("DLR trigger exactness", pass,
            fmt("boundary %s; 10000 sequences, %zu steps, %zu begins, %zu commits; mismatches %zu, below one lane "
                "%zu, occupied commits %zu, conservation breaks %zu",
                boundary ? "ok" : "WRONG", steps, begins, commits, wrong_trigger, below_one, occupied_commit,
                not_conserved));
  });
}

void dlr_benefit(const fs::path& scenarios) {
  criterion("DLR corridor benefit", [&] {
    ScenarioConfig on = load_scenario_file(scenarios / "corridor.json");
    on.world.lane_reversal = true;
    on.check_conservation = true;
    ScenarioConfig off = on;
    off.world.lane_reversal = false;
    ConservationProbe probe;
    const RunReport with = run(on, probe.hook());
    const RunReport without = run(off);
    const double m_on = mean(completion(with)), m_off = mean(completion(without));
    const double gain = 1.0 - m_on / m_off;
    const bool pass = gain >= 0.05 && probe.violations == 0 && !with.any_truncated() && !without.any_truncated();
    verdict("DLR corridor benefit", pass,
            fmt("%zu seeds, completion %.1f with vs %.1f without: %.1f%% lower (limit 5%%); lane/occupancy "
                "violations %zu over %zu ticks",
                with.runs.size(), m_on, m_off, 100.0 * gain, probe.violations, probe.ticks));
  });
}

void routing_oracle() {
  criterion("routing oracle", [&] {
    const auto t0 = Clock::now();
    std::size_t queries = 0, cost_mismatch = 0, set_mismatch = 0;
    constexpr std::size_t k = 3;
    for (std::uint64_t g = 1; g <= 200; ++g) {
      const RoadNetwork net = oracle::random_graph(g * 7919);
      const auto cost = net.free_flow_costs();
      for (std::uint32_t o = 0; o < net.intersection_count(); ++o)
        for (std::uint32_t d = 0; d < net.intersection_count(); ++d) {
          if (o == d) continue;
          ++queries;
          const auto all = oracle::all_simple_paths(net, NodeId(o), NodeId(d), cost);
          const auto best = shortest_route(net, NodeId(o), NodeId(d), cost);
          if (all.empty() != !best.has_value() || (best && route_cost(*best, cost) != all.front().cost)) {
            ++cost_mismatch;
            continue;
          }
          if (all.empty()) continue;
          const auto alts = optional_routes(net, NodeId(o), NodeId(d), k, cost);
          const std::size_t want = std::min(k, all.size() - 1);
          bool same = alts.size() == want;
          for (std::size_t i = 0; same && i < want; ++i)
            same = route_cost(alts[i], cost) == all[i + 1].cost && alts[i].edges == all[i + 1].route.edges;
          if (!same) ++set_mismatch;
        }
    }
    const double elapsed = seconds_since(t0);
    verdict("routing oracle", cost_mismatch == 0 && set_mismatch == 0 && elapsed < 10.0,
            fmt("200 graphs, %zu O-D queries; cost mismatches %zu, top-%zu mismatches %zu; %.2f s (limit 10 s)",
                queries, cost_mismatch, k, set_mismatch, elapsed));
  });
}

void atlc_contract() {
  criterion("ATLC contract", [&] {
    using std::chrono::milliseconds;
    RandomStream rng(77);
    std::size_t sum_breaks = 0, equal_breaks = 0, monotone_breaks = 0, max_equal_gap = 0;
    for (int i = 0; i < 10'000; ++i) {
      SignalPlan plan;
      plan.intersection = NodeId(0);
      const auto n = static_cast<std::int64_t>(rng.between(2, 4));
      plan.cycle = milliseconds{rng.between(30'000, 150'000)};
      plan.lost_time = milliseconds{rng.between(0, 12'000)};
      const auto usable = plan.usable_green().count();
      const auto per = usable / n;
      plan.min_green = milliseconds{rng.between(0, per)};
      const auto max_lo = (usable + n - 1) / n;
      plan.max_green = milliseconds{rng.between(max_lo, std::max(max_lo, usable - plan.min_green.count() * (n - 1)))};
      std::vector<std::uint32_t> counts(n);
      const bool all_equal = rng.below(4) == 0;
      const std::uint32_t shared = static_cast<std::uint32_t>(rng.below(50));
      for (auto& c : counts) c = all_equal ? shared : static_cast<std::uint32_t>(rng.below(50));
      std::map<EdgeId, std::uint32_t> by_edge;
      for (std::int64_t p = 0; p < n; ++p) {
        // Two approaches per phase; the phase count is their sum.
        const EdgeId a(static_cast<std::uint32_t>(2 * p)), b(static_cast<std::uint32_t>(2 * p + 1));
        plan.phases.push_back({{a, b}, milliseconds{per}});
        const auto first = static_cast<std::uint32_t>(rng.below(counts[p] + 1));
        by_edge[a] = first;
        by_edge[b] = counts[p] - first;
      }
      const SignalPlan out = atlc_update(plan, by_edge);
      std::int64_t sum = 0;
      for (const auto& ph : out.phases) sum += ph.green.count();
      if (sum != usable) ++sum_breaks;

      for (std::size_t x = 0; x < counts.size(); ++x)
        for (std::size_t y = x + 1; y < counts.size(); ++y)
          if (counts[x] == counts[y]) {
            const auto gap = static_cast<std::size_t>(std::llabs(out.phases[x].green.count() -
                                                                 out.phases[y].green.count()));
            max_equal_gap = std::max(max_equal_gap, gap);
            if (gap > 1) ++equal_breaks;
          }

      // Pre-clamp greens are the proportional split of the phase totals.
      std::vector<std::uint64_t> w(counts.begin(), counts.end());
      const std::size_t j = rng.below(counts.size());
      const auto before = proportional_split(plan.usable_green(), w);
      w[j] += 1 + rng.below(20);
      const auto after = proportional_split(plan.usable_green(), w);
      if (after[j] < before[j]) ++monotone_breaks;
    }
    verdict("ATLC contract", sum_breaks == 0 && equal_breaks == 0 && monotone_breaks == 0,
            fmt("10000 count vectors; inexact sums %zu, unequal greens for equal counts %zu (largest gap %zu ms, "
                "1 ms rounding quantum allowed), pre-clamp monotonicity breaks %zu",
                sum_breaks, equal_breaks, max_equal_gap, monotone_breaks));
  });
}

void conservation_and_determinism(const ScenarioConfig& desk, const fs::path& scenarios) {
  criterion("conservation and determinism", [&] {
    ConservationProbe probe;
    std::size_t identical = 0, compared = 0;
    const fs::path root = fs::temp_directory_path() / "dtm_acceptance";
    std::vector<ScenarioConfig> configs;
    for (auto s : {StrategyKind::vam, StrategyKind::centralized, StrategyKind::alert, StrategyKind::none}) {
      ScenarioConfig c = desk;
      c.strategy = s;
      c.runs = 2;
      configs.push_back(c);
      ScenarioConfig small = load_scenario_file(scenarios / "small.json");
      small.strategy = s;
      configs.push_back(small);
    }
    ScenarioConfig corridor = load_scenario_file(scenarios / "corridor.json");
    corridor.runs = 3;
    configs.push_back(corridor);
    for (std::size_t i = 0; i < configs.size(); ++i) {
      ScenarioConfig c = configs[i];
      c.check_conservation = true;
      run(c, probe.hook());
      const fs::path a = root / (std::to_string(i) + "a"), b = root / (std::to_string(i) + "b");
      fs::remove_all(a);
      fs::remove_all(b);
      run_to_directory(c, a);
      run_to_directory(c, b);
      ++compared;
      const std::string ra = slurp(a / "runs.csv");
      if (!ra.empty() && ra == slurp(b / "runs.csv")) ++identical;
    }
    fs::remove_all(root);
    verdict("conservation every tick", probe.violations == 0 && probe.ticks > 0,
            fmt("%zu ticks checked across %zu configs, %zu violations (engine self-check also on for every run)",
                probe.ticks, configs.size(), probe.violations));
    verdict("byte-identical runs.csv", identical == compared,
            fmt("%zu of %zu configs identical across two executions", identical, compared));
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance suite");
  std::string scenario_dir = "scenarios";
  std::vector<std::string> only;
  app.add_option("--scenarios", scenario_dir, "Directory holding desk.json, corridor.json and small.json");
  app.add_option("--only", only, "Run only these groups")
      ->check(CLI::IsMember({"routing", "atlc", "dlr", "corridor", "desk", "determinism"}));
  CLI11_PARSE(app, argc, argv);
  const fs::path scenarios(scenario_dir);
  auto wanted = [&](const std::string& g) { return only.empty() || std::find(only.begin(), only.end(), g) != only.end(); };

  const auto t0 = Clock::now();
  if (wanted("routing")) routing_oracle();
  if (wanted("atlc")) atlc_contract();
  if (wanted("dlr")) dlr_exactness();
  if (wanted("corridor")) dlr_benefit(scenarios);

  if (wanted("desk") || wanted("determinism")) {
    ScenarioConfig desk;
    DeskResults desk_results;
    try {
      desk = load_scenario_file(scenarios / "desk.json");
    } catch (const std::exception& e) {
      verdict("desk scenario", false, e.what());
      return 1;
    }
    if (wanted("desk")) {
      strategy_ordering(desk, desk_results);
      compliance_sweep(desk, desk_results);
    }
    if (wanted("determinism")) conservation_and_determinism(desk, scenarios);
  }

  std::printf("%s: %d failing criteria, %.0f s\n", failures ? "FAILED" : "ALL PASSED", failures, seconds_since(t0));
  return failures ? 1 : 0;
}
