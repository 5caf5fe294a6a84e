#include <gtest/gtest.h>

#include <queue>

#include "qcl/graphkit.hpp"
#include "qcl/scenarios.hpp"

using namespace qcl;
using G = WeightedDigraph<double>;

namespace {

G from_edges(Index n, std::initializer_list<std::pair<Index, Index>> edges, double w = 1.0) {
  G g(n);
  for (auto [i, j] : edges) g.set_weight(i, j, w);
  return g;
}

// reach[u][v]: v reachable from u along edges (u, w1), (w1, w2), ...
std::vector<std::vector<char>> bfs_reach(const G& g) {
  const Index n = g.size();
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (Index s = 0; s < n; ++s) {
    std::queue<Index> q;
    q.push(s);
    reach[s][s] = 1;
    while (!q.empty()) {
      const Index u = q.front();
      q.pop();
      for (Index v = 0; v < n; ++v)
        if (g.has_edge(u, v) && !reach[s][v]) {
          reach[s][v] = 1;
          q.push(v);
        }
    }
  }
  return reach;
}

std::optional<Index> brute_force_grn(const G& g) {
  const auto reach = bfs_reach(g);
  for (Index v = 0; v < g.size(); ++v) {
    bool all = true;
    for (Index u = 0; u < g.size(); ++u) all = all && reach[u][v];
    if (all) return v;
  }
  return std::nullopt;
}

G graph_from_mask(Index n, unsigned mask) {
  G g(n);
  int bit = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && (mask >> bit++ & 1u)) g.set_weight(i, j, 1.0);
  return g;
}

} // namespace

TEST(WeightedDigraph, RejectsInvalidWeights) {
  MatrixX<double> m = MatrixX<double>::Zero(2, 2);
  m(0, 0) = 1.0;
  EXPECT_THROW(G{m}, InputError);
  m(0, 0) = 0.0;
  m(0, 1) = -1.0;
  EXPECT_THROW(G{m}, InputError);
  EXPECT_THROW(G(MatrixX<double>::Zero(2, 3)), InputError);
  G g(2);
  EXPECT_THROW(g.set_weight(0, 0, 1.0), InputError);
  EXPECT_THROW(g.set_weight(0, 2, 1.0), InputError);
}

TEST(Scc, ThreeCycleIsOneComponent) {
  const auto c = strongly_connected_components(from_edges(3, {{0, 1}, {1, 2}, {2, 0}}));
  ASSERT_EQ(c.components.size(), 1u);
  EXPECT_EQ(c.components[0], (std::vector<int>{0, 1, 2}));
  EXPECT_TRUE(c.dag[0].empty());
}

TEST(Scc, ChainGivesSingletonsInOrder) {
  const auto c = strongly_connected_components(from_edges(3, {{0, 1}, {1, 2}}));
  ASSERT_EQ(c.components.size(), 3u);
  EXPECT_EQ(c.dag[0], std::vector<int>{1});
  EXPECT_EQ(c.dag[1], std::vector<int>{2});
  EXPECT_TRUE(c.dag[2].empty());
  EXPECT_EQ(c.sinks(), std::vector<int>{2});
}

TEST(Scc, SlidingExampleMergesFeedbackLoop) {
  // n = 4: 1 -> 2 -> 3 -> 4 with 2 -> 1 and 3 -> 1 (0-based here)
  const auto cfg = example2_sliding(4, 1.0, 1.0);
  const auto& g = cfg.schedule.segments()[0].graph;
  const auto c = strongly_connected_components(g);
  const auto reach = bfs_reach(g);
  for (Index u = 0; u < 4; ++u)
    for (Index v = 0; v < 4; ++v)
      EXPECT_EQ(c.component_of[u] == c.component_of[v], reach[u][v] && reach[v][u]);
  EXPECT_EQ(c.components.size(), 2u);
  EXPECT_TRUE(c.is_acyclic());
}

TEST(GloballyReachable, SmallCases) {
  auto single = has_globally_reachable_node(G(1));
  EXPECT_TRUE(single.reachable);
  EXPECT_EQ(single.witness, 0);
  EXPECT_FALSE(has_globally_reachable_node(G(2)).reachable);
}

TEST(GloballyReachable, SlidingExampleWitnessIsLastAgent) {
  for (int n = 3; n <= 8; ++n) {
    const auto cfg = example2_sliding(n, 1.0, 2.0);
    const auto r = has_globally_reachable_node(cfg.schedule.segments()[0].graph);
    ASSERT_TRUE(r.reachable);
    EXPECT_EQ(r.witness, n - 1);
  }
}

TEST(GloballyReachable, AgreesWithBfsOnEveryGraphUpToFourNodes) {
  for (Index n = 1; n <= 4; ++n) {
    const unsigned count = 1u << (n * (n - 1));
    for (unsigned mask = 0; mask < count; ++mask) {
      const G g = graph_from_mask(n, mask);
      const auto r = has_globally_reachable_node(g);
      const auto oracle = brute_force_grn(g);
      ASSERT_EQ(r.reachable, oracle.has_value()) << "n=" << n << " mask=" << mask;
      if (r.reachable) {
        // the witness itself must be reachable from everyone
        const auto reach = bfs_reach(g);
        for (Index u = 0; u < n; ++u) EXPECT_TRUE(reach[u][*r.witness]);
      }
    }
  }
}

TEST(Condensation, PairwiseImpliesWeak) {
  for (Index n = 1; n <= 4; ++n) {
    const unsigned count = 1u << (n * (n - 1));
    for (unsigned mask = 0; mask < count; ++mask) {
      const auto c = strongly_connected_components(graph_from_mask(n, mask));
      if (c.is_pairwise_connected()) EXPECT_TRUE(c.is_weakly_connected());
      if (c.is_weakly_connected() && c.sinks().size() == 1) EXPECT_TRUE(c.is_acyclic());
    }
  }
}

TEST(Condensation, PairwiseIsStrongerThanWeak) {
  // 1 -> 3 <- 2: weakly connected, but 1 and 2 are not comparable
  const auto c = strongly_connected_components(from_edges(3, {{0, 2}, {1, 2}}));
  EXPECT_TRUE(c.is_weakly_connected());
  EXPECT_FALSE(c.is_pairwise_connected());
  EXPECT_TRUE(has_globally_reachable_node(from_edges(3, {{0, 2}, {1, 2}})).reachable);
}

TEST(Laplacian, Definitions) {
  EXPECT_TRUE(laplacian(G(3)).isZero());
  const auto two = laplacian(from_edges(2, {{0, 1}, {1, 0}}));
  EXPECT_EQ(two, (MatrixX<double>(2, 2) << 1, -1, -1, 1).finished());
  const auto line = laplacian(example1_line(3, 1.0).schedule.segments()[0].graph);
  EXPECT_EQ(line, (MatrixX<double>(3, 3) << 1, -1, 0, -1, 2, -1, 0, -1, 1).finished());
}

TEST(Laplacian, RowSumsVanishOnRandomGraphs) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(7));
    G g(n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j && rng.uniform() < 0.4) g.set_weight(i, j, rng.uniform(0.5, 2.0));
    const auto l = laplacian(g);
    EXPECT_LE(l.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(WeightBalance, Cases) {
  EXPECT_TRUE(is_weight_balanced(example1_line(5, 1.0).schedule.segments()[0].graph));
  EXPECT_FALSE(is_weight_balanced(from_edges(3, {{0, 1}, {1, 2}})));
  MatrixX<double> m(3, 3);
  m << 0, 0.7, 1.3, 0.7, 0, 2, 1.3, 2, 0;
  EXPECT_TRUE(is_weight_balanced(G(m)));
  // balanced but not symmetric: a directed cycle
  EXPECT_TRUE(is_weight_balanced(from_edges(3, {{0, 1}, {1, 2}, {2, 0}})));
}

TEST(Schedule, Validation) {
  const G g = from_edges(2, {{0, 1}});
  using S = GraphSchedule<double>;
  EXPECT_THROW(S({{1.0, g}}, std::nullopt, 1.0, 1.0), InputError);
  EXPECT_THROW(S({{0.0, g}, {0.0, g}}, std::nullopt, 1.0, 1.0), InputError);
  EXPECT_THROW(S({{0.0, g}, {1.0, G(3)}}, std::nullopt, 1.0, 1.0), InputError);
  EXPECT_THROW(S({{0.0, g}}, std::nullopt, 2.0, 3.0), InputError);
  EXPECT_THROW(S({{0.0, g}, {1.0, g}}, 1.0, 1.0, 1.0), InputError);
  EXPECT_NO_THROW(S({{0.0, g}, {1.0, g}}, 1.5, 1.0, 1.0));
}

TEST(Schedule, LocateAndAdvancePeriodically) {
  const G e1 = from_edges(2, {{0, 1}}), e2 = from_edges(2, {{1, 0}});
  GraphSchedule<double> s({{0.0, e1}, {1.0, e2}}, 2.0, 1.0, 1.0);
  EXPECT_EQ(s.locate(0.5).segment, 0u);
  EXPECT_EQ(s.locate(1.0).segment, 1u);
  const auto p = s.locate(4.25);
  EXPECT_EQ(p.cycle, 2);
  EXPECT_EQ(p.segment, 0u);
  EXPECT_EQ(*s.next_switch_time(p), 5.0);
  auto q = *s.next(*s.next(p));
  EXPECT_EQ(q.cycle, 3);
  EXPECT_EQ(s.start_time(q), 6.0);
  EXPECT_EQ(s.remaining_graphs(q).size(), 2u);
}

TEST(Schedule, FiniteScheduleHoldsLastSegment) {
  const G e1 = from_edges(2, {{0, 1}});
  GraphSchedule<double> s({{0.0, e1}, {3.0, G(2)}}, std::nullopt, 1.0, 1.0);
  const auto p = s.locate(100.0);
  EXPECT_EQ(p.segment, 1u);
  EXPECT_FALSE(s.next_switch_time(p));
  EXPECT_EQ(s.remaining_graphs(p).size(), 1u);
}

TEST(UnboundedInteractions, Cases) {
  const G e1 = from_edges(3, {{0, 1}}), e2 = from_edges(3, {{1, 2}});
  const auto single = unbounded_interactions_graph(GraphSchedule<double>::constant(e1, 1.0, 1.0));
  EXPECT_TRUE(single.same_edges(e1));

  const auto periodic = unbounded_interactions_graph(GraphSchedule<double>({{0.0, e1}, {1.0, e2}}, 2.0, 1.0, 1.0));
  EXPECT_TRUE(periodic.has_edge(0, 1));
  EXPECT_TRUE(periodic.has_edge(1, 2));
  EXPECT_EQ(periodic.edge_count(), 2u);

  const auto fading = unbounded_interactions_graph(GraphSchedule<double>({{0.0, e1}, {1.0, G(3)}}, std::nullopt, 1.0, 1.0));
  EXPECT_EQ(fading.edge_count(), 0u);
}

TEST(UnboundedInteractions, AddingPeriodicSegmentsIsMonotone) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScheduleSegment<double>> segs;
    const int count = 1 + static_cast<int>(rng.below(4));
    for (int k = 0; k < count; ++k) segs.push_back({double(k), graph_from_mask(4, static_cast<unsigned>(rng.below(4096)))});
    const auto before = unbounded_interactions_graph(GraphSchedule<double>(segs, double(count), 1.0, 1.0));
    segs.push_back({double(count), graph_from_mask(4, static_cast<unsigned>(rng.below(4096)))});
    const auto after = unbounded_interactions_graph(GraphSchedule<double>(segs, double(count + 1), 1.0, 1.0));
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j)
        if (before.has_edge(i, j)) EXPECT_TRUE(after.has_edge(i, j));
  }
}
