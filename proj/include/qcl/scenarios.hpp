#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qcl/dynamics.hpp"

namespace qcl {

/// Reference values attached to a constructed scenario.
struct Expectation {
  std::optional<double> t_con;
  /// Lower bound the measured convergence time must respect.
  std::optional<double> t_con_lower_bound;
  /// Closed form (1/(2a)) ((a+b)/a)^(n-1); differs from t_con by (a+b)/a.
  std::optional<double> t_con_alt;
  std::optional<double> q_infinity;
  std::optional<double> sliding_speed;
  /// Prescribed alpha per agent (0-based index, value).
  std::vector<std::pair<Index, double>> alpha;
  bool collocation = false;
};

struct ScenarioConfig : SimulationConfig<double> {
  std::string name;
  std::optional<Expectation> expected;
};

/// Symmetric line graph with unit weights, x_i(0) = delta (i - 1).
ScenarioConfig example1_line(int n, double delta);

/// Chain toward a stubborn last agent with feedback of weight b to agent 1;
/// the interior agents start on the threshold 1/2.
ScenarioConfig example2_sliding(int n, double a, double b);

/// splitmix64: small, portable, seedable.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t bound) { return bound == 0 ? 0 : next() % bound; }

private:
  std::uint64_t state_;
};

struct RandomScenarioOptions {
  int n = 4;
  std::uint64_t seed = 1;
  /// Probability of each extra edge beyond the planted in-tree.
  double edge_density = 0.3;
  double w_low = 0.5;
  double w_high = 2.0;
  double delta = 1.0;
  /// Mirror every edge with the same weight (weight-balanced graphs).
  bool symmetric = false;
  /// Periodic schedule with this many graphs, each held for `dwell`.
  std::optional<std::pair<int, double>> switching;
  double x_low = 0.0;
  double x_high = 3.0;
  SelectionPolicy<double> policy = SlidingPolicy{};
};

/// Random scenario whose limit graph has a globally reachable node: every
/// segment graph contains a spanning in-tree toward a random root.
ScenarioConfig random_connected(const RandomScenarioOptions& opts);

/// Round to 12 decimal digits.
double round12(double v);

} // namespace qcl
