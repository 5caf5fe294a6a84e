#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qcl/errors.hpp"

namespace qcl {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Weighted adjacency of a directed interaction graph.
///
/// weights()(i, j) = a_ij is the weight with which agent i listens to agent j;
/// the edge (i, j) exists iff a_ij > 0. The diagonal is always zero.
template <typename Scalar>
class WeightedDigraph {
public:
  using Matrix = MatrixX<Scalar>;

  WeightedDigraph() = default;

  explicit WeightedDigraph(Index n) : weights_(Matrix::Zero(n, n)) {
    if (n < 0) throw InputError("graph size must be nonnegative");
  }

  explicit WeightedDigraph(Matrix weights) : weights_(std::move(weights)) {
    if (weights_.rows() != weights_.cols())
      throw InputError("weight matrix must be square");
    for (Index i = 0; i < size(); ++i)
      for (Index j = 0; j < size(); ++j) check_weight(i, j, weights_(i, j));
  }

  Index size() const { return weights_.rows(); }
  const Matrix& weights() const { return weights_; }
  Scalar weight(Index i, Index j) const { return weights_(i, j); }
  bool has_edge(Index i, Index j) const { return weights_(i, j) > Scalar(0); }

  void set_weight(Index i, Index j, Scalar w) {
    if (i < 0 || j < 0 || i >= size() || j >= size())
      throw InputError("edge endpoint out of range");
    check_weight(i, j, w);
    weights_(i, j) = w;
  }

  Scalar out_weight(Index i) const { return weights_.row(i).sum(); }
  Scalar in_weight(Index i) const { return weights_.col(i).sum(); }

  std::vector<Index> out_neighbors(Index i) const {
    std::vector<Index> out;
    for (Index j = 0; j < size(); ++j)
      if (has_edge(i, j)) out.push_back(j);
    return out;
  }

  std::size_t edge_count() const {
    return static_cast<std::size_t>((weights_.array() > Scalar(0)).count());
  }

  /// Smallest and largest nonzero weight; nullopt for an edgeless graph.
  std::optional<std::pair<Scalar, Scalar>> weight_range() const {
    std::optional<std::pair<Scalar, Scalar>> r;
    for (Index i = 0; i < size(); ++i)
      for (Index j = 0; j < size(); ++j) {
        const Scalar w = weights_(i, j);
        if (w <= Scalar(0)) continue;
        if (!r) r.emplace(w, w);
        r->first = std::min(r->first, w);
        r->second = std::max(r->second, w);
      }
    return r;
  }

  bool same_edges(const WeightedDigraph& other) const {
    return size() == other.size() &&
           ((weights_.array() > Scalar(0)) == (other.weights_.array() > Scalar(0))).all();
  }

  bool operator==(const WeightedDigraph& other) const {
    return size() == other.size() && weights_ == other.weights_;
  }

private:
  static void check_weight(Index i, Index j, Scalar w) {
    using std::isfinite;
    if (!isfinite(w) || w < Scalar(0))
      throw InputError("weights must be finite and nonnegative");
    if (i == j && w != Scalar(0))
      throw InputError("self-loop weights must be zero (agent " + std::to_string(i) + ")");
  }

  Matrix weights_;
};

/// Laplacian L = diag(A 1) - A of an adjacency expression.
template <typename Derived>
MatrixX<typename Derived::Scalar> laplacian(const Eigen::MatrixBase<Derived>& adjacency) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> lap = -adjacency;
  // self-loops carry no weight in L
  lap.diagonal() = adjacency.rowwise().sum() - adjacency.diagonal();
  return lap;
}

template <typename Scalar>
MatrixX<Scalar> laplacian(const WeightedDigraph<Scalar>& g) {
  return laplacian(g.weights());
}

template <typename Scalar>
bool is_weight_balanced(const WeightedDigraph<Scalar>& g, Scalar tol = Scalar(1e-12)) {
  for (Index i = 0; i < g.size(); ++i) {
    using std::abs;
    if (abs(g.out_weight(i) - g.in_weight(i)) > tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Strongly connected components and the condensation.

/// Partition of agents into strongly connected components plus the acyclic
/// component graph. Components are numbered by their smallest agent.
struct Condensation {
  std::vector<int> component_of;
  std::vector<std::vector<int>> components;
  std::vector<std::vector<int>> dag;

  int size() const { return static_cast<int>(components.size()); }

  std::vector<int> sinks() const {
    std::vector<int> out;
    for (int c = 0; c < size(); ++c)
      if (dag[c].empty()) out.push_back(c);
    return out;
  }

  bool is_acyclic() const {
    // Kahn's algorithm
    std::vector<int> indeg(size(), 0);
    for (const auto& succ : dag)
      for (int k : succ) ++indeg[k];
    std::vector<int> ready;
    for (int c = 0; c < size(); ++c)
      if (indeg[c] == 0) ready.push_back(c);
    int seen = 0;
    while (!ready.empty()) {
      int c = ready.back();
      ready.pop_back();
      ++seen;
      for (int k : dag[c])
        if (--indeg[k] == 0) ready.push_back(k);
    }
    return seen == size();
  }

  /// Connected when edge directions are ignored.
  bool is_weakly_connected() const {
    if (size() <= 1) return true;
    std::vector<std::vector<int>> undirected(size());
    for (int c = 0; c < size(); ++c)
      for (int k : dag[c]) {
        undirected[c].push_back(k);
        undirected[k].push_back(c);
      }
    std::vector<char> seen(size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int c = stack.back();
      stack.pop_back();
      for (int k : undirected[c])
        if (!seen[k]) {
          seen[k] = 1;
          ++count;
          stack.push_back(k);
        }
    }
    return count == size();
  }

  /// Every pair of components is ordered by reachability (u reaches v or v
  /// reaches u). Strictly stronger than weak connectivity.
  bool is_pairwise_connected() const {
    const int s = size();
    std::vector<std::vector<char>> reach(s, std::vector<char>(s, 0));
    for (int c = 0; c < s; ++c) {
      std::vector<int> stack{c};
      reach[c][c] = 1;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int k : dag[u])
          if (!reach[c][k]) {
            reach[c][k] = 1;
            stack.push_back(k);
          }
      }
    }
    for (int u = 0; u < s; ++u)
      for (int v = u + 1; v < s; ++v)
        if (!reach[u][v] && !reach[v][u]) return false;
    return true;
  }
};

namespace detail {

/// Iterative Tarjan over an adjacency list.
inline Condensation condense(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), tarjan_comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> found;
  int counter = 0;

  struct Frame {
    int v;
    std::size_t next;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.next < adj[f.v].size()) {
        int w = adj[f.v][f.next++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      int v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<int> comp;
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          tarjan_comp[w] = static_cast<int>(found.size());
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        found.push_back(std::move(comp));
      }
    }
  }

  // renumber by smallest member
  std::vector<int> order(found.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return found[a].front() < found[b].front(); });
  std::vector<int> rename(found.size());
  for (std::size_t k = 0; k < order.size(); ++k) rename[order[k]] = static_cast<int>(k);

  Condensation out;
  out.component_of.resize(n);
  out.components.resize(found.size());
  out.dag.resize(found.size());
  for (std::size_t k = 0; k < found.size(); ++k) out.components[rename[k]] = found[k];
  for (int v = 0; v < n; ++v) out.component_of[v] = rename[tarjan_comp[v]];
  for (int v = 0; v < n; ++v)
    for (int w : adj[v]) {
      int h = out.component_of[v], k = out.component_of[w];
      if (h != k) out.dag[h].push_back(k);
    }
  for (auto& succ : out.dag) {
    std::sort(succ.begin(), succ.end());
    succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
  }
  if (!out.is_acyclic()) throw std::logic_error("condensation contains a cycle");
  return out;
}

template <typename Scalar>
std::vector<std::vector<int>> adjacency_lists(const WeightedDigraph<Scalar>& g) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.size()));
  for (Index i = 0; i < g.size(); ++i)
    for (Index j = 0; j < g.size(); ++j)
      if (g.has_edge(i, j)) adj[i].push_back(static_cast<int>(j));
  return adj;
}

} // namespace detail

template <typename Scalar>
Condensation strongly_connected_components(const WeightedDigraph<Scalar>& g) {
  return detail::condense(detail::adjacency_lists(g));
}

struct GlobalReachability {
  bool reachable = false;
  /// Smallest agent of the sink component when reachable.
  std::optional<int> witness;
};

/// A node reachable from every other node exists iff the condensation is
/// connected with a single sink; the witness is taken from that sink.
inline GlobalReachability globally_reachable(const Condensation& c) {
  if (c.size() == 0) return {};
  const auto sinks = c.sinks();
  if (sinks.size() != 1 || !c.is_weakly_connected()) return {};
  return {true, c.components[sinks.front()].front()};
}

template <typename Scalar>
GlobalReachability has_globally_reachable_node(const WeightedDigraph<Scalar>& g) {
  return globally_reachable(strongly_connected_components(g));
}

// ---------------------------------------------------------------------------
// Piecewise-constant schedules.

template <typename Scalar>
struct ScheduleSegment {
  Scalar start;
  WeightedDigraph<Scalar> graph;
};

/// Position inside a schedule: cycle counts completed periods (always 0 for
/// a finite schedule), segment indexes into segments().
struct SchedulePosition {
  long long cycle = 0;
  std::size_t segment = 0;
  bool operator==(const SchedulePosition&) const = default;
};

/// Piecewise-constant time-varying adjacency. Without a period the final
/// segment holds forever; with one the segment list repeats.
template <typename Scalar>
class GraphSchedule {
public:
  using Segment = ScheduleSegment<Scalar>;

  GraphSchedule() = default;

  GraphSchedule(std::vector<Segment> segments, std::optional<Scalar> period, Scalar a_low,
                Scalar a_high)
      : segments_(std::move(segments)), period_(period), a_low_(a_low), a_high_(a_high) {
    using std::isfinite;
    if (segments_.empty()) throw InputError("schedule needs at least one segment");
    if (!(a_low_ > Scalar(0)) || !(a_low_ <= a_high_) || !isfinite(a_high_))
      throw InputError("weight bounds must satisfy 0 < a_low <= a_high");
    if (segments_.front().start != Scalar(0)) throw InputError("first segment must start at t = 0");
    const Index n = segments_.front().graph.size();
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      const auto& s = segments_[k];
      if (!isfinite(s.start)) throw InputError("segment start must be finite");
      if (k > 0 && !(s.start > segments_[k - 1].start))
        throw InputError("segment start times must be strictly increasing");
      if (s.graph.size() != n) throw InputError("all segment graphs must share the agent count");
      if (auto r = s.graph.weight_range())
        if (r->first < a_low_ || r->second > a_high_)
          throw InputError("segment " + std::to_string(k) + " has a weight outside [a_low, a_high]");
    }
    if (period_) {
      if (!isfinite(*period_) || !(*period_ > segments_.back().start))
        throw InputError("period must exceed the last segment start");
    }
  }

  static GraphSchedule constant(WeightedDigraph<Scalar> g, Scalar a_low, Scalar a_high) {
    return GraphSchedule({{Scalar(0), std::move(g)}}, std::nullopt, a_low, a_high);
  }

  Index n() const { return segments_.front().graph.size(); }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::optional<Scalar>& period() const { return period_; }
  bool is_periodic() const { return period_.has_value(); }
  Scalar a_low() const { return a_low_; }
  Scalar a_high() const { return a_high_; }

  /// Every segment carries the same weights.
  bool is_time_invariant() const {
    return std::all_of(segments_.begin(), segments_.end(),
                       [&](const Segment& s) { return s.graph == segments_.front().graph; });
  }

  /// Every segment has the same edge set (weights may differ within bounds).
  bool has_time_invariant_topology() const {
    return std::all_of(segments_.begin(), segments_.end(), [&](const Segment& s) {
      return s.graph.same_edges(segments_.front().graph);
    });
  }

  SchedulePosition locate(Scalar t) const {
    SchedulePosition pos;
    Scalar local = t;
    if (period_) {
      using std::floor;
      pos.cycle = static_cast<long long>(floor(t / *period_));
      local = t - Scalar(pos.cycle) * *period_;
      if (local < Scalar(0)) {
        --pos.cycle;
        local += *period_;
      } else if (local >= *period_) {
        ++pos.cycle;
        local -= *period_;
      }
    }
    auto it = std::upper_bound(segments_.begin(), segments_.end(), local,
                               [](Scalar v, const Segment& s) { return v < s.start; });
    pos.segment = it == segments_.begin() ? 0 : static_cast<std::size_t>(it - segments_.begin() - 1);
    return pos;
  }

  Scalar start_time(const SchedulePosition& pos) const {
    Scalar base = period_ ? Scalar(pos.cycle) * *period_ : Scalar(0);
    return base + segments_[pos.segment].start;
  }

  std::optional<SchedulePosition> next(const SchedulePosition& pos) const {
    if (pos.segment + 1 < segments_.size()) return SchedulePosition{pos.cycle, pos.segment + 1};
    if (period_) return SchedulePosition{pos.cycle + 1, 0};
    return std::nullopt;
  }

  std::optional<Scalar> next_switch_time(const SchedulePosition& pos) const {
    auto nx = next(pos);
    if (!nx) return std::nullopt;
    return start_time(*nx);
  }

  const WeightedDigraph<Scalar>& graph(const SchedulePosition& pos) const {
    return segments_[pos.segment].graph;
  }
  const WeightedDigraph<Scalar>& graph_at(Scalar t) const { return graph(locate(t)); }

  /// Graphs that can still act at or after pos (deduplicated by value).
  std::vector<const WeightedDigraph<Scalar>*> remaining_graphs(const SchedulePosition& pos) const {
    std::vector<const WeightedDigraph<Scalar>*> out;
    const std::size_t first = period_ ? 0 : pos.segment;
    for (std::size_t k = first; k < segments_.size(); ++k) {
      const auto* g = &segments_[k].graph;
      if (std::none_of(out.begin(), out.end(), [&](const auto* h) { return *h == *g; }))
        out.push_back(g);
    }
    return out;
  }

private:
  std::vector<Segment> segments_;
  std::optional<Scalar> period_;
  Scalar a_low_{1};
  Scalar a_high_{1};
};

/// Edges whose weight integral diverges. Periodic: active on some segment of
/// the period (every segment has positive length). Finite: active on the
/// final, forever-holding segment.
template <typename Scalar>
WeightedDigraph<Scalar> unbounded_interactions_graph(const GraphSchedule<Scalar>& s) {
  const Index n = s.n();
  WeightedDigraph<Scalar> out(n);
  auto mark = [&](const WeightedDigraph<Scalar>& g) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (g.has_edge(i, j)) out.set_weight(i, j, Scalar(1));
  };
  if (s.is_periodic()) {
    for (const auto& seg : s.segments()) mark(seg.graph);
  } else {
    mark(s.segments().back().graph);
  }
  return out;
}

template <typename Scalar>
bool is_weight_balanced(const GraphSchedule<Scalar>& s, Scalar tol = Scalar(1e-12)) {
  return std::all_of(s.segments().begin(), s.segments().end(),
                     [&](const auto& seg) { return is_weight_balanced(seg.graph, tol); });
}

/// Finite-time quantized consensus hypothesis: the limit graph has a
/// globally reachable node.
template <typename Scalar>
bool satisfies_consensus_hypothesis(const GraphSchedule<Scalar>& s) {
  return has_globally_reachable_node(unbounded_interactions_graph(s)).reachable;
}

} // namespace qcl
