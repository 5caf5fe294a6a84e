#include "qcl/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qcl/analysis.hpp"

namespace qcl {

double round12(double v) {
  const double r = std::round(v * 1e12) / 1e12;
  return std::isfinite(r) ? r : v;
}

ScenarioConfig example1_line(int n, double delta) {
  if (n < 3) throw InputError("example1 needs n >= 3");
  ScenarioConfig cfg;
  WeightedDigraph<double> g(n);
  for (int i = 0; i + 1 < n; ++i) {
    g.set_weight(i, i + 1, 1.0);
    g.set_weight(i + 1, i, 1.0);
  }
  cfg.schedule = GraphSchedule<double>::constant(std::move(g), 1.0, 1.0);
  cfg.quantizer = Quantizer<double>::uniform(delta);
  cfg.x0.resize(n);
  for (int i = 0; i < n; ++i) cfg.x0(i) = delta * i;
  cfg.policy = SequentialSlowPolicy{};
  cfg.horizon = 100.0 * n * n + 100.0;
  cfg.name = "example1-n" + std::to_string(n);

  Expectation e;
  // (1/8) N spread / delta with spread (N - 1) delta
  e.t_con_lower_bound = n * (n - 1) / 8.0;
  e.q_infinity = cfg.quantizer.quantize(cfg.x0.mean());
  e.collocation = n % 2 == 0;
  cfg.expected = e;
  return cfg;
}

ScenarioConfig example2_sliding(int n, double a, double b) {
  if (n < 3) throw InputError("example2 needs n >= 3");
  if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b)) throw InputError("example2 needs a > 0");
  if (b < a) throw InputError("example2 needs b >= a");
  ScenarioConfig cfg;
  WeightedDigraph<double> g(n);
  for (int i = 0; i + 1 < n; ++i) g.set_weight(i, i + 1, a);
  for (int i = 1; i + 1 < n; ++i) g.set_weight(i, 0, b);
  cfg.schedule = GraphSchedule<double>::constant(std::move(g), a, b);
  cfg.quantizer = Quantizer<double>::uniform(1.0);
  cfg.x0 = VectorX<double>::Constant(n, 0.5);
  cfg.x0(0) = 0.0;
  cfg.x0(n - 1) = 1.0;

  const double r = a / (a + b);
  FixedAlphaPolicy<double> fixed;
  Expectation e;
  for (int i = 1; i + 1 < n; ++i) {
    const double alpha = std::pow(r, n - 1 - i);
    fixed.alpha[i] = alpha;
    e.alpha.emplace_back(i, alpha);
  }
  cfg.policy = fixed;
  e.sliding_speed = a * std::pow(r, n - 2);
  e.t_con = 0.5 / *e.sliding_speed;
  e.t_con_alt = (1.0 / (2.0 * a)) * std::pow((a + b) / a, n - 1);
  e.t_con_lower_bound = std::pow(2.0, n - 2) / (2.0 * a);
  e.q_infinity = 1.0;
  cfg.expected = e;
  cfg.horizon = 10.0 * *e.t_con + 10.0;
  cfg.name = "example2-n" + std::to_string(n);
  return cfg;
}

ScenarioConfig random_connected(const RandomScenarioOptions& opts) {
  if (opts.n < 1) throw InputError("random scenario needs n >= 1");
  if (!(opts.edge_density > 0.0 && opts.edge_density <= 1.0))
    throw InputError("edge density must lie in (0, 1]");
  if (!(opts.w_low > 0.0 && opts.w_low <= opts.w_high)) throw InputError("weight range must satisfy 0 < low <= high");
  if (!(opts.x_low <= opts.x_high)) throw InputError("initial range must satisfy low <= high");
  const int graphs = opts.switching ? opts.switching->first : 1;
  const double dwell = opts.switching ? opts.switching->second : 1.0;
  if (graphs < 1 || !(dwell > 0.0)) throw InputError("switching needs at least one graph and a positive dwell");

  SplitMix64 rng(opts.seed);
  const int n = opts.n;
  auto weight = [&] { return round12(rng.uniform(opts.w_low, opts.w_high)); };
  auto connect = [&](WeightedDigraph<double>& g, int i, int j) {
    const double w = weight();
    g.set_weight(i, j, w);
    if (opts.symmetric) g.set_weight(j, i, w);
  };

  std::vector<ScheduleSegment<double>> segments;
  double lo = opts.w_low, hi = opts.w_high;
  for (int s = 0; s < graphs; ++s) {
    WeightedDigraph<double> g(n);
    // random order with the root first; everyone listens to an earlier agent
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int k = n - 1; k > 0; --k) std::swap(order[k], order[rng.below(k + 1)]);
    for (int k = 1; k < n; ++k) connect(g, order[k], order[rng.below(k)]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && !g.has_edge(i, j) && rng.uniform() < opts.edge_density) connect(g, i, j);
    if (auto r = g.weight_range()) {
      lo = std::min(lo, r->first);
      hi = std::max(hi, r->second);
    }
    segments.push_back({s * dwell, std::move(g)});
  }

  ScenarioConfig cfg;
  const std::optional<double> period =
      opts.switching ? std::optional<double>(graphs * dwell) : std::nullopt;
  cfg.schedule = GraphSchedule<double>(std::move(segments), period, lo, hi);
  cfg.quantizer = Quantizer<double>::uniform(opts.delta);
  cfg.x0.resize(n);
  for (int i = 0; i < n; ++i) cfg.x0(i) = round12(rng.uniform(opts.x_low, opts.x_high));
  cfg.policy = opts.policy;
  // ten times the static bound for the declared weight range
  const double bound = tcon_bound(n, lo, hi, cfg.x0, cfg.quantizer);
  cfg.horizon = std::max(10.0 * bound, 100.0);
  cfg.name = "random-n" + std::to_string(n) + "-seed" + std::to_string(opts.seed);
  return cfg;
}

} // namespace qcl
