// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <queue>
#include <sstream>

#include "qcl/analysis.hpp"
#include "qcl/io.hpp"
#include "qcl/regularized.hpp"
#include "qcl/scenarios.hpp"

using namespace qcl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (pass) detail.str("");
    if (!pass) detail << "; ";
    pass = false;
    detail << why;
  }
};

// trajectories and quantizers collected for the envelope criterion
std::vector<std::pair<Trajectory<double>, Quantizer<double>>> corpus;

Trajectory<double> record(const SimulationConfig<double>& cfg) {
  auto traj = simulate<double>(cfg);
  corpus.emplace_back(traj, cfg.quantizer);
  return traj;
}

ScenarioConfig sliding(ScenarioConfig cfg) {
  cfg.policy = SlidingPolicy{};
  return cfg;
}

double oracle_deviation(const SimulationConfig<double>& cfg, const Trajectory<double>& exact, double eps, double h) {
  const double t_end = std::max(1.0, exact.end_time());
  return max_deviation(exact, simulate_regularized<double>(cfg, eps, h, t_end, t_end / 50.0));
}

Outcome criterion1() {
  Outcome o;
  const auto cfg = sliding(example1_line(3, 1.0));
  const auto traj = record(cfg);
  const auto rep = analyze(cfg, traj);
  const VectorX<double> final_x = (VectorX<double>(3) << 0.5, 1.0, 1.5).finished();
  if (traj.events.size() != 2) o.fail("expected 2 events, got " + std::to_string(traj.events.size()));
  else {
    const auto& e = traj.events[1];
    if (e.t != 0.5) o.fail("event time " + io::format_double(e.t));
    if (!e.has(EventKind::threshold_hit) || !e.has(EventKind::equilibrium)) o.fail("event kinds");
    if (e.agents != std::vector<Index>{0, 2}) o.fail("hitting agents");
    if (e.x != final_x) o.fail("final state");
  }
  if (!rep.t_con || *rep.t_con != 0.5) o.fail("t_con");
  if (!rep.s_star || *rep.s_star != 1.0) o.fail("s*");
  const double q_mean = cfg.quantizer.quantize(cfg.x0.mean());
  if (!rep.q_infinity || *rep.q_infinity != 1.0 || q_mean != 1.0) o.fail("q_infinity");
  const double dev = oracle_deviation(cfg, traj, 1e-3, 1e-5);
  if (dev > 5e-3) o.fail("oracle deviation " + io::format_double(dev));
  if (o.pass) o.detail << "hits at t=0.5, x=(0.5,1,1.5), t_con=0.5, s*=q_inf=1, oracle dev " << dev;
  return o;
}

Outcome criterion2() {
  Outcome o;
  std::ostringstream times;
  std::vector<std::pair<int, double>> c_misses;
  double prev = 0;
  for (int n = 3; n <= 10; ++n) {
    const auto fixed = example2_sliding(n, 1.0, 1.0);
    const auto slide = sliding(fixed);
    const auto tf = record(fixed), ts = record(slide);
    const std::string tag = "n=" + std::to_string(n) + ": ";
    if (tf.events.size() != ts.events.size()) o.fail(tag + "policies produce different event counts");
    else
      for (std::size_t k = 0; k < tf.events.size(); ++k)
        if (tf.events[k].t != ts.events[k].t || tf.events[k].x != ts.events[k].x) o.fail(tag + "policies disagree");
    // alpha on each held surface, levels 0 and 1 around the threshold 1/2
    for (int i = 1; i + 1 < n; ++i)
      if (ts.events[0].z(i) != std::ldexp(1.0, -(n - 1 - i))) o.fail(tag + "alpha_" + std::to_string(i + 1));
    const auto c = convergence_time(ts, slide.quantizer);
    if (!c) {
      o.fail(tag + "no convergence");
      continue;
    }
    times << (n == 3 ? "" : ",") << c->t_con;
    if (prev > 0 && std::abs(c->t_con / prev - 2.0) > 0.02) o.fail(tag + "ratio " + io::format_double(c->t_con / prev));
    prev = c->t_con;
    const double a = 1.0;
    if (c->t_con < std::ldexp(1.0, n - 2) / (2 * a)) o.fail(tag + "below 2^(n-2)/(2a)");
    if (c->t_con < std::ldexp(1.0, n) / (4 * a)) c_misses.emplace_back(n, c->t_con);
  }
  if (!c_misses.empty()) {
    std::ostringstream m;
    m << "t_con < 2^n/(4a) at n=" << c_misses.front().first << ".." << c_misses.back().first
      << " (measured 2^(n-3)/a, half the stated constant)";
    o.fail(m.str());
  }
  o.detail << " [t_con n=3..10: " << times.str() << "]";
  return o;
}

Outcome criterion3() {
  Outcome o;
  int cases = 0;
  double worst_ratio = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    RandomScenarioOptions r;
    r.seed = seed;
    r.n = 2 + static_cast<int>(seed % 5);
    r.delta = seed % 2 ? 1.0 : 0.25;
    r.x_high = 3.0 * r.delta * r.n / 2.0;
    auto cfg = random_connected(r);
    cfg.schedule = GraphSchedule<double>::constant(cfg.schedule.segments()[0].graph, 0.5, 2.0);
    const double bound = tcon_bound(cfg.schedule.n(), 0.5, 2.0, cfg.x0, cfg.quantizer);
    cfg.horizon = std::max(10.0 * bound, 100.0);
    const auto traj = record(cfg);
    const auto c = convergence_time(traj, cfg.quantizer);
    ++cases;
    if (!c) o.fail(cfg.name + ": not converged");
    else if (c->t_con > bound) o.fail(cfg.name + ": t_con " + io::format_double(c->t_con) + " > " + io::format_double(bound));
    else if (bound > 0) worst_ratio = std::max(worst_ratio, c->t_con / bound);
  }
  int periodic = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    RandomScenarioOptions r;
    r.seed = 1000 + seed;
    r.n = 2 + static_cast<int>(seed % 5);
    r.delta = seed % 2 ? 1.0 : 0.25;
    r.switching = std::make_pair(2 + static_cast<int>(seed % 3), 0.25 + 0.25 * static_cast<double>(seed % 4));
    auto cfg = random_connected(r);
    if (!satisfies_consensus_hypothesis(cfg.schedule)) continue;
    const double bound = tcon_bound(cfg.schedule.n(), cfg.schedule.a_low(), cfg.schedule.a_high(), cfg.x0, cfg.quantizer);
    cfg.horizon = std::max(10.0 * bound, 1.0);
    const auto traj = record(cfg);
    ++periodic;
    if (!traj.certified_equilibrium()) o.fail(cfg.name + ": periodic run not certified before 10x bound");
  }
  if (o.pass)
    o.detail << cases << " static runs within the bound (largest t_con/bound " << worst_ratio << "), " << periodic
             << " periodic runs certified";
  return o;
}

Outcome criterion4() {
  Outcome o;
  double worst = 0;
  int converged = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    RandomScenarioOptions r;
    r.seed = 5000 + seed;
    r.n = 2 + static_cast<int>(seed % 6);
    r.symmetric = true;
    r.delta = seed % 3 == 0 ? 0.25 : 1.0;
    if (seed % 4 == 0) r.switching = std::make_pair(3, 0.5);
    const auto cfg = random_connected(r);
    const auto traj = record(cfg);
    const double drift = average_conservation(traj);
    worst = std::max(worst, drift);
    if (drift > 1e-9) o.fail(cfg.name + ": drift " + io::format_double(drift));
    if (!traj.certified_equilibrium()) continue;
    ++converged;
    const auto limit = limit_value_check(traj, cfg.schedule, cfg.quantizer);
    if (limit.verdict != Verdict::pass) o.fail(cfg.name + ": limit value " + limit.detail);
  }
  if (o.pass) o.detail << "max drift " << worst << ", limit value checked on " << converged << " converged runs";
  return o;
}

Outcome criterion5() {
  Outcome o;
  std::size_t events = 0;
  for (const auto& [traj, q] : corpus) {
    events += traj.events.size();
    const auto env = envelopes(traj, q);
    if (!env.ok()) o.fail("violation at event " + std::to_string(*env.first_violation));
  }
  if (o.pass) o.detail << corpus.size() << " trajectories, " << events << " events, no violations";
  return o;
}

Outcome criterion6() {
  Outcome o;
  const int n = 6;
  std::vector<double> products;
  std::ostringstream measured;
  for (double delta : {1.0, 0.5, 0.25}) {
    const auto cfg = example1_line(n, delta);
    const auto traj = record(cfg);
    const auto c = convergence_time(traj, cfg.quantizer);
    if (!c) {
      o.fail("no convergence at delta " + io::format_double(delta));
      continue;
    }
    const double spread = cfg.quantizer.quantize(cfg.x0(n - 1)) - cfg.quantizer.quantize(cfg.x0(0));
    const double lower = n * spread / (8.0 * delta);
    if (c->t_con < lower) o.fail("t_con below n*spread/(8 delta) at delta " + io::format_double(delta));
    products.push_back(c->t_con * delta);
    measured << (measured.tellp() ? ", " : "") << "delta=" << delta << " t_con=" << c->t_con << " (>= " << lower << ")";
  }
  if (products.size() == 3) {
    const auto [lo, hi] = std::minmax_element(products.begin(), products.end());
    if (*hi > *lo * 1.01)
      o.fail("t_con*delta not constant: " + io::format_double(products[0]) + ", " + io::format_double(products[1]) +
             ", " + io::format_double(products[2]) + " (t_con is invariant under delta at a fixed level spread)");
  }
  o.detail << " [" << measured.str() << "]";
  return o;
}

bool brute_force_grn(const WeightedDigraph<double>& g) {
  const Index n = g.size();
  std::vector<int> reached_by(n, 0);
  for (Index s = 0; s < n; ++s) {
    std::vector<char> seen(n, 0);
    std::queue<Index> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const Index u = q.front();
      q.pop();
      ++reached_by[u];
      for (Index v = 0; v < n; ++v)
        if (g.has_edge(u, v) && !seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
    }
  }
  return std::find(reached_by.begin(), reached_by.end(), n) != reached_by.end();
}

Outcome criterion7() {
  Outcome o;
  std::size_t exhaustive = 0, random = 0;
  for (Index n = 1; n <= 4; ++n) {
    const int bits = static_cast<int>(n * (n - 1));
    for (unsigned mask = 0; mask < (1u << bits); ++mask) {
      WeightedDigraph<double> g(n);
      int bit = 0;
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          if (i != j && (mask >> bit++ & 1u)) g.set_weight(i, j, 1.0);
      ++exhaustive;
      if (has_globally_reachable_node(g).reachable != brute_force_grn(g))
        o.fail("n=" + std::to_string(n) + " mask " + std::to_string(mask));
    }
  }
  SplitMix64 rng(2024);
  for (int k = 0; k < 10000; ++k) {
    const Index n = 1 + static_cast<Index>(rng.below(6));
    const double p = rng.uniform(0.05, 0.6);
    WeightedDigraph<double> g(n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j && rng.uniform(0, 1) < p) g.set_weight(i, j, rng.uniform(0.5, 2.0));
    ++random;
    if (has_globally_reachable_node(g).reachable != brute_force_grn(g)) o.fail("random digraph " + std::to_string(k));
  }
  if (o.pass) o.detail << exhaustive << " exhaustive and " << random << " random digraphs agree";
  return o;
}

Outcome criterion8() {
  Outcome o;
  std::vector<ScenarioConfig> refs{sliding(example1_line(3, 1.0)), example2_sliding(3, 1.0, 1.0),
                                   example2_sliding(4, 1.0, 1.0)};
  for (const auto& entry : fs::directory_iterator(QCL_CORPUS_DIR)) {
    if (entry.path().extension() != ".json") continue;
    auto cfg = sliding(io::load_scenario(entry.path().string()));
    if (cfg.schedule.n() <= 4) refs.push_back(cfg);
  }
  std::sort(refs.begin(), refs.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  double worst = 0;
  for (const auto& cfg : refs) {
    const auto traj = record(cfg);
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {1.0, 0.5, 0.25}) {
      const double dev = oracle_deviation(cfg, traj, 1e-3 * scale, 1e-5 * scale);
      if (scale == 1.0) {
        worst = std::max(worst, dev);
        if (dev > 5e-3) o.fail(cfg.name + ": deviation " + io::format_double(dev));
      }
      if (!(dev < prev)) o.fail(cfg.name + ": deviation did not decrease at eps " + io::format_double(1e-3 * scale));
      prev = dev;
    }
  }
  if (o.pass) o.detail << refs.size() << " references, max deviation " << worst << " at eps=1e-3, decreasing under refinement";
  return o;
}

} // namespace

int main() {
  Outcome (*const criteria[])() = {criterion1, criterion2, criterion3, criterion4,
                                   criterion5, criterion6, criterion7, criterion8};
  int failed = 0;
  for (int k = 0; k < 8; ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << k + 1 << ": " << (o.pass ? "PASS" : "FAIL") << " — " << o.detail.str() << " ("
              << secs << " s)" << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
