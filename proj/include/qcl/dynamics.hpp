#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qcl/errors.hpp"
#include "qcl/graphkit.hpp"
#include "qcl/quantizer.hpp"

namespace qcl {

// ---------------------------------------------------------------------------
// State

/// Agent pinned to a quantizer threshold. alpha selects
/// z = level(k) * (1 - alpha) + level(k + 1) * alpha inside Kq.
template <typename Scalar>
struct SurfaceMode {
  std::int64_t threshold_index;
  Scalar threshold;
  Scalar alpha;
};

template <typename Scalar>
using AgentMode = std::optional<SurfaceMode<Scalar>>;

template <typename Scalar>
struct NetworkState {
  Scalar t{0};
  VectorX<Scalar> x;
  std::vector<AgentMode<Scalar>> mode;

  Index size() const { return x.size(); }
  bool on_surface(Index i) const { return mode[static_cast<std::size_t>(i)].has_value(); }
};

/// Builds a state whose surface modes match x exactly (alpha starts at 0).
template <typename Scalar>
NetworkState<Scalar> make_state(Scalar t, VectorX<Scalar> x, const Quantizer<Scalar>& q) {
  NetworkState<Scalar> s{t, std::move(x), {}};
  s.mode.resize(static_cast<std::size_t>(s.x.size()));
  for (Index i = 0; i < s.x.size(); ++i)
    if (auto k = q.threshold_index(s.x(i))) s.mode[i] = SurfaceMode<Scalar>{*k, s.x(i), Scalar(0)};
  return s;
}

// ---------------------------------------------------------------------------
// Selection policies

/// Hold every surface agent whose hold is feasible.
struct SlidingPolicy {};

/// Sliding holds, but free hold values are chosen to stall listeners and
/// release ties favour the neighbour of the agent that stopped last.
struct SequentialSlowPolicy {};

/// Prescribed convexification coefficients for selected agents while they sit
/// on a surface. Agents without an override are resolved by sliding.
template <typename Scalar>
struct FixedAlphaPolicy {
  std::map<Index, Scalar> alpha;
};

template <typename Scalar>
using SelectionPolicy = std::variant<SlidingPolicy, SequentialSlowPolicy, FixedAlphaPolicy<Scalar>>;

enum class AgentRole { off_surface, held, departing_up, departing_down };

template <typename Scalar>
struct Selection {
  VectorX<Scalar> z;
  VectorX<Scalar> velocity;
  std::vector<AgentRole> role;
  /// Convexification coefficient per agent, NaN off the surfaces.
  VectorX<Scalar> alpha;
  bool used_iterative = false;

  std::vector<Index> departing() const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < role.size(); ++i)
      if (role[i] == AgentRole::departing_up || role[i] == AgentRole::departing_down)
        out.push_back(static_cast<Index>(i));
    return out;
  }
  bool full_hold() const { return departing().empty(); }
  bool at_rest() const { return (velocity.array() == Scalar(0)).all(); }
};

struct ResolverOptions {
  /// Dense active-set solve up to this many agents, projected Gauss-Seidel above.
  Index dense_cutoff = 64;
  double tolerance = 1e-12;
  long max_sweeps = 100000;
  /// Agent that most recently stopped on a surface (sequential policy only).
  std::optional<Index> last_stopped;
};

// ---------------------------------------------------------------------------
// Velocity of a selection

/// v_i = sum_j a_ij (z_j - z_i), i.e. v = -L z.
template <typename Scalar, typename Derived>
VectorX<Scalar> selection_velocity(const WeightedDigraph<Scalar>& g,
                                   const Eigen::MatrixBase<Derived>& z) {
  const auto& a = g.weights();
  VectorX<Scalar> v = VectorX<Scalar>::Zero(g.size());
  for (Index i = 0; i < g.size(); ++i)
    for (Index j = 0; j < g.size(); ++j)
      if (a(i, j) > Scalar(0)) v(i) += a(i, j) * (z(j) - z(i));
  return v;
}

/// Same as above, after checking z_i is in Kq(x_i) for every agent.
template <typename Scalar, typename Derived>
VectorX<Scalar> selection_velocity(const NetworkState<Scalar>& state, const Quantizer<Scalar>& q,
                                   const WeightedDigraph<Scalar>& g,
                                   const Eigen::MatrixBase<Derived>& z) {
  if (z.size() != state.size() || g.size() != state.size())
    throw ContractError("selection, state and graph sizes differ");
  for (Index i = 0; i < state.size(); ++i) {
    const auto box = q.krasovskii_set(state.x(i));
    if (!box.contains(z(i)))
      throw ContractError("selection for agent " + std::to_string(i) + " lies outside Kq(x_i)");
  }
  return selection_velocity(g, z);
}

// ---------------------------------------------------------------------------
// Sliding resolution

namespace detail {

enum class FreeValueRule { midpoint, stall_listeners };

template <typename Scalar>
struct HoldProblem {
  const MatrixX<Scalar>& a;
  Index n;
  std::vector<char> surface;
  VectorX<Scalar> lo, hi;
  VectorX<Scalar> out_weight;
  Scalar tol;
  FreeValueRule free_rule = FreeValueRule::midpoint;
  std::optional<Index> last_stopped;

  Scalar velocity(const VectorX<Scalar>& z, Index i) const {
    Scalar v(0);
    for (Index j = 0; j < n; ++j)
      if (a(i, j) > Scalar(0)) v += a(i, j) * (z(j) - z(i));
    return v;
  }

  bool adjacent(Index i, Index j) const { return a(i, j) > Scalar(0) || a(j, i) > Scalar(0); }

  /// True when candidate i should be preferred over j on a tie.
  bool prefer(Index i, Index j) const {
    if (last_stopped) {
      const bool ai = adjacent(i, *last_stopped), aj = adjacent(j, *last_stopped);
      if (ai != aj) return ai;
    }
    return i < j;
  }
};

struct Release {
  Index agent;
  bool up;
};

/// Solves the hold equations v_i = 0 for agents with held[i] set, all other
/// entries of z fixed. Closed groups of held agents (no path to a fixed value)
/// get one shared value inside the intersection of their boxes; when that
/// intersection is empty the returned Release names the agent to let go.
template <typename Scalar>
std::optional<Release> solve_hold(const HoldProblem<Scalar>& p, const std::vector<char>& held,
                                  VectorX<Scalar>& z) {
  const Index n = p.n;
  std::vector<char> grounded(n, 0), fixed(n, 0);
  std::vector<Index> queue;
  for (Index i = 0; i < n; ++i) {
    if (!held[i]) continue;
    for (Index j = 0; j < n; ++j)
      if (p.a(i, j) > Scalar(0) && !held[j]) {
        grounded[i] = 1;
        queue.push_back(i);
        break;
      }
  }
  auto spread_grounding = [&]() {
    while (!queue.empty()) {
      Index g = queue.back();
      queue.pop_back();
      for (Index i = 0; i < n; ++i)
        if (held[i] && !grounded[i] && !fixed[i] && p.a(i, g) > Scalar(0)) {
          grounded[i] = 1;
          queue.push_back(i);
        }
    }
  };
  spread_grounding();

  std::vector<int> ungrounded;
  for (Index i = 0; i < n; ++i)
    if (held[i] && !grounded[i]) ungrounded.push_back(static_cast<int>(i));

  if (!ungrounded.empty()) {
    std::vector<int> local(n, -1);
    for (std::size_t k = 0; k < ungrounded.size(); ++k) local[ungrounded[k]] = static_cast<int>(k);
    std::vector<std::vector<int>> adj(ungrounded.size());
    for (std::size_t k = 0; k < ungrounded.size(); ++k)
      for (Index j = 0; j < n; ++j)
        if (p.a(ungrounded[k], j) > Scalar(0) && local[j] >= 0) adj[k].push_back(local[j]);
    const Condensation cond = condense(adj);

    for (int c : cond.sinks()) {
      std::vector<Index> members;
      for (int k : cond.components[c]) members.push_back(ungrounded[k]);
      Scalar box_lo = p.lo(members.front()), box_hi = p.hi(members.front());
      for (Index i : members) {
        box_lo = std::max(box_lo, p.lo(i));
        box_hi = std::min(box_hi, p.hi(i));
      }
      if (box_lo > box_hi + p.tol) {
        Scalar center(0);
        for (Index i : members) center += (p.lo(i) + p.hi(i)) / Scalar(2);
        center /= Scalar(members.size());
        std::optional<Release> pick;
        Scalar worst(-1);
        for (Index i : members) {
          const Scalar dist = std::max({p.lo(i) - center, center - p.hi(i), Scalar(0)});
          if (dist > worst + p.tol || (dist >= worst - p.tol && pick && p.prefer(i, pick->agent))) {
            worst = dist;
            pick = Release{i, center > p.hi(i)};
          }
        }
        return pick;
      }
      if (box_hi < box_lo) box_hi = box_lo;

      Scalar value = (box_lo + box_hi) / Scalar(2);
      if (p.free_rule == FreeValueRule::stall_listeners) {
        Scalar num(0), den(0);
        for (Index k = 0; k < n; ++k) {
          if (held[k] || std::find(members.begin(), members.end(), k) != members.end()) continue;
          for (Index j : members)
            if (p.a(k, j) > Scalar(0) && !p.surface[k]) {
              num += p.a(k, j) * z(k);
              den += p.a(k, j);
            }
        }
        if (den > Scalar(0)) value = std::clamp(num / den, box_lo, box_hi);
      }
      for (Index i : members) {
        z(i) = value;
        fixed[i] = 1;
        queue.push_back(i);
      }
    }
    spread_grounding();
  }

  std::vector<Index> unknown;
  std::vector<int> slot(n, -1);
  for (Index i = 0; i < n; ++i)
    if (held[i] && !fixed[i]) {
      slot[i] = static_cast<int>(unknown.size());
      unknown.push_back(i);
    }
  if (unknown.empty()) return std::nullopt;

  const Index m = static_cast<Index>(unknown.size());
  MatrixX<Scalar> mat = MatrixX<Scalar>::Zero(m, m);
  VectorX<Scalar> rhs = VectorX<Scalar>::Zero(m);
  for (Index r = 0; r < m; ++r) {
    const Index i = unknown[r];
    mat(r, r) = p.out_weight(i);
    for (Index j = 0; j < n; ++j) {
      const Scalar w = p.a(i, j);
      if (!(w > Scalar(0))) continue;
      if (slot[j] >= 0)
        mat(r, slot[j]) -= w;
      else
        rhs(r) += w * z(j);
    }
  }
  const VectorX<Scalar> sol = mat.partialPivLu().solve(rhs);
  for (Index r = 0; r < m; ++r) z(unknown[r]) = sol(r);
  return std::nullopt;
}

template <typename Scalar>
void release(const Release& r, const HoldProblem<Scalar>& p, std::vector<char>& held,
             std::vector<AgentRole>& role, VectorX<Scalar>& z) {
  held[r.agent] = 0;
  role[r.agent] = r.up ? AgentRole::departing_up : AgentRole::departing_down;
  z(r.agent) = r.up ? p.hi(r.agent) : p.lo(r.agent);
}

/// Active-set solve of the box complementarity problem
///   lo < z_i < hi  =>  v_i = 0,   z_i = hi  =>  v_i >= 0,   z_i = lo  =>  v_i <= 0
/// over the surface agents. Returns false when the release sequence does not
/// settle (caller falls back to the iterative solver).
template <typename Scalar>
bool active_set(const HoldProblem<Scalar>& p, std::vector<AgentRole>& role, VectorX<Scalar>& z) {
  const Index n = p.n;
  std::vector<char> held(n, 0), readded(n, 0);
  for (Index i = 0; i < n; ++i)
    if (role[i] == AgentRole::held) held[i] = 1;

  const long limit = 4 * static_cast<long>(n) + 8;
  for (long iter = 0; iter < limit; ++iter) {
    if (auto conflict = solve_hold(p, held, z)) {
      release(*conflict, p, held, role, z);
      continue;
    }
    std::optional<Release> worst;
    Scalar worst_violation(0);
    for (Index i = 0; i < n; ++i) {
      if (!held[i]) continue;
      Scalar violation(0);
      bool up = false;
      if (z(i) > p.hi(i) + p.tol) {
        violation = z(i) - p.hi(i);
        up = true;
      } else if (z(i) < p.lo(i) - p.tol) {
        violation = p.lo(i) - z(i);
      } else {
        continue;
      }
      const bool tie = worst && std::abs(violation - worst_violation) <= p.tol;
      if (!worst || violation > worst_violation + p.tol || (tie && p.prefer(i, worst->agent))) {
        worst = Release{i, up};
        worst_violation = violation;
      }
    }
    if (worst) {
      release(*worst, p, held, role, z);
      continue;
    }
    for (Index i = 0; i < n; ++i)
      if (held[i]) z(i) = std::clamp(z(i), p.lo(i), p.hi(i));

    // released agents must actually leave in the direction they were released
    std::optional<Index> back;
    Scalar back_score(-1);
    for (Index i = 0; i < n; ++i) {
      if (role[i] != AgentRole::departing_up && role[i] != AgentRole::departing_down) continue;
      const Scalar v = p.velocity(z, i);
      const Scalar wrong = role[i] == AgentRole::departing_up ? -v : v;
      if (wrong + p.tol >= Scalar(0) && wrong > back_score) {
        back = i;
        back_score = wrong;
      }
    }
    if (!back) return true;
    if (readded[*back]) return false;
    readded[*back] = 1;
    held[*back] = 1;
    role[*back] = AgentRole::held;
  }
  return false;
}

/// Projected Gauss-Seidel on the same complementarity problem, followed by an
/// exact re-solve on the identified hold set.
template <typename Scalar>
bool projected_gauss_seidel(const HoldProblem<Scalar>& p, long max_sweeps, Scalar sweep_tol,
                            std::vector<AgentRole>& role, VectorX<Scalar>& z) {
  const Index n = p.n;
  for (Index i = 0; i < n; ++i)
    if (p.surface[i]) z(i) = (p.lo(i) + p.hi(i)) / Scalar(2);
  bool converged = false;
  for (long sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    Scalar change(0);
    for (Index i = 0; i < n; ++i) {
      if (!p.surface[i] || !(p.out_weight(i) > Scalar(0))) continue;
      Scalar acc(0);
      for (Index j = 0; j < n; ++j)
        if (p.a(i, j) > Scalar(0)) acc += p.a(i, j) * z(j);
      const Scalar next = std::clamp(acc / p.out_weight(i), p.lo(i), p.hi(i));
      change = std::max(change, std::abs(next - z(i)));
      z(i) = next;
    }
    converged = change <= sweep_tol;
  }
  if (!converged) return false;

  std::vector<char> held(n, 0);
  for (Index i = 0; i < n; ++i) {
    if (!p.surface[i]) continue;
    const Scalar v = p.velocity(z, i);
    if (z(i) >= p.hi(i) - p.tol && v > p.tol) {
      role[i] = AgentRole::departing_up;
      z(i) = p.hi(i);
    } else if (z(i) <= p.lo(i) + p.tol && v < -p.tol) {
      role[i] = AgentRole::departing_down;
      z(i) = p.lo(i);
    } else {
      role[i] = AgentRole::held;
      held[i] = 1;
    }
  }
  VectorX<Scalar> polished = z;
  if (!solve_hold(p, held, polished)) {
    bool inside = true;
    for (Index i = 0; i < n && inside; ++i)
      if (held[i]) inside = polished(i) >= p.lo(i) - p.tol && polished(i) <= p.hi(i) + p.tol;
    if (inside) {
      for (Index i = 0; i < n; ++i)
        if (held[i]) polished(i) = std::clamp(polished(i), p.lo(i), p.hi(i));
      z = polished;
    }
  }
  return true;
}

template <typename Scalar>
Scalar resolver_tolerance(const WeightedDigraph<Scalar>& g, const VectorX<Scalar>& lo,
                          const VectorX<Scalar>& hi, double rel) {
  Scalar mag(1), deg(1);
  for (Index i = 0; i < g.size(); ++i) {
    using std::abs;
    mag = std::max({mag, abs(lo(i)), abs(hi(i))});
    deg = std::max(deg, g.out_weight(i));
  }
  return Scalar(rel) * mag * deg;
}

} // namespace detail

/// Picks a Krasovskii selection z for the current state and classifies each
/// surface agent as held (zero velocity) or departing (velocity pointing off
/// its surface).
///
/// Held agents get velocity exactly zero; off-surface velocities below the
/// resolver tolerance are flushed to zero. Throws NoSlidingSelection when no
/// consistent hold set exists and ContractError when a fixed-alpha override
/// is inadmissible.
template <typename Scalar>
Selection<Scalar> resolve_sliding(const NetworkState<Scalar>& state, const Quantizer<Scalar>& q,
                                  const WeightedDigraph<Scalar>& g,
                                  const SelectionPolicy<Scalar>& policy,
                                  const ResolverOptions& options = {}) {
  const Index n = state.size();
  if (g.size() != n) throw ContractError("graph and state sizes differ");

  detail::HoldProblem<Scalar> p{g.weights(), n, std::vector<char>(n, 0), VectorX<Scalar>(n),
                                VectorX<Scalar>(n), g.weights().rowwise().sum(), Scalar(0),
                                detail::FreeValueRule::midpoint, std::nullopt};
  if (std::holds_alternative<SequentialSlowPolicy>(policy)) {
    p.free_rule = detail::FreeValueRule::stall_listeners;
    p.last_stopped = options.last_stopped;
  }

  Selection<Scalar> sel;
  sel.z.resize(n);
  sel.role.assign(static_cast<std::size_t>(n), AgentRole::off_surface);
  for (Index i = 0; i < n; ++i) {
    const auto box = q.krasovskii_set(state.x(i));
    p.lo(i) = box.lo;
    p.hi(i) = box.hi;
    if (!box.is_point()) {
      p.surface[i] = 1;
      sel.role[i] = AgentRole::held;
      sel.z(i) = (box.lo + box.hi) / Scalar(2);
    } else {
      sel.z(i) = box.lo;
    }
  }
  p.tol = detail::resolver_tolerance(g, p.lo, p.hi, options.tolerance);

  // fixed-alpha overrides leave the hold problem; they are checked afterwards
  std::vector<Index> overridden;
  if (const auto* fixed = std::get_if<FixedAlphaPolicy<Scalar>>(&policy)) {
    for (const auto& [agent, alpha] : fixed->alpha) {
      if (agent < 0 || agent >= n) throw ContractError("fixed alpha names an unknown agent");
      if (!p.surface[agent]) continue;
      if (!(alpha >= Scalar(0) && alpha <= Scalar(1)))
        throw ContractError("fixed alpha for agent " + std::to_string(agent) + " is outside [0, 1]");
      sel.z(agent) = p.lo(agent) * (Scalar(1) - alpha) + p.hi(agent) * alpha;
      sel.role[agent] = AgentRole::off_surface;
      p.surface[agent] = 0;
      overridden.push_back(agent);
    }
  }

  const bool dense = n <= options.dense_cutoff;
  bool solved = false;
  if (dense) {
    auto role = sel.role;
    VectorX<Scalar> z = sel.z;
    if (detail::active_set(p, role, z)) {
      sel.role = std::move(role);
      sel.z = std::move(z);
      solved = true;
    }
  }
  if (!solved) {
    sel.used_iterative = true;
    if (!detail::projected_gauss_seidel(p, options.max_sweeps, p.tol, sel.role, sel.z))
      throw NoSlidingSelection("no consistent hold set for the surface agents");
  }

  for (Index agent : overridden) {
    p.surface[agent] = 1;
    const Scalar v = p.velocity(sel.z, agent);
    const Scalar alpha = (sel.z(agent) - p.lo(agent)) / (p.hi(agent) - p.lo(agent));
    if (std::abs(v) <= p.tol)
      sel.role[agent] = AgentRole::held;
    else if (alpha == Scalar(1) && v > Scalar(0))
      sel.role[agent] = AgentRole::departing_up;
    else if (alpha == Scalar(0) && v < Scalar(0))
      sel.role[agent] = AgentRole::departing_down;
    else
      throw ContractError("fixed alpha for agent " + std::to_string(agent) +
                          " neither holds nor leaves its surface consistently");
  }

  sel.velocity = selection_velocity(g, sel.z);
  sel.alpha = VectorX<Scalar>::Constant(n, std::numeric_limits<Scalar>::quiet_NaN());
  for (Index i = 0; i < n; ++i) {
    if (sel.role[i] == AgentRole::held) {
      sel.velocity(i) = Scalar(0);
    } else if (sel.role[i] == AgentRole::off_surface && std::abs(sel.velocity(i)) <= p.tol) {
      sel.velocity(i) = Scalar(0);
    }
    if (p.surface[i]) sel.alpha(i) = (sel.z(i) - p.lo(i)) / (p.hi(i) - p.lo(i));
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Events

enum class EventKind { start, threshold_hit, surface_departure, topology_switch, equilibrium, horizon };

inline const char* to_string(EventKind k) {
  switch (k) {
  case EventKind::start: return "start";
  case EventKind::threshold_hit: return "threshold-hit";
  case EventKind::surface_departure: return "surface-departure";
  case EventKind::topology_switch: return "topology-switch";
  case EventKind::equilibrium: return "equilibrium";
  case EventKind::horizon: return "horizon";
  }
  return "?";
}

inline std::optional<EventKind> event_kind_from_string(const std::string& s) {
  for (auto k : {EventKind::start, EventKind::threshold_hit, EventKind::surface_departure,
                 EventKind::topology_switch, EventKind::equilibrium, EventKind::horizon})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

template <typename Scalar>
struct EventForecast {
  /// Time until the next event; infinity when nothing will ever change.
  Scalar dt = std::numeric_limits<Scalar>::infinity();
  EventKind kind = EventKind::equilibrium;
  std::vector<Index> hitting;
  /// Threshold each moving agent is heading for (nullopt when at rest or unbounded).
  std::vector<std::optional<Scalar>> target;
  bool topology_switch = false;
};

/// Earliest threshold crossing or schedule switch under constant velocity.
template <typename Scalar>
EventForecast<Scalar> next_event(const NetworkState<Scalar>& state, const Quantizer<Scalar>& q,
                                 std::optional<Scalar> next_switch_time,
                                 const VectorX<Scalar>& velocity) {
  EventForecast<Scalar> f;
  const Index n = state.size();
  f.target.resize(static_cast<std::size_t>(n));
  Scalar best = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> times(static_cast<std::size_t>(n), best);
  for (Index i = 0; i < n; ++i) {
    const Scalar v = velocity(i);
    if (v == Scalar(0)) continue;
    auto th = q.next_threshold(state.x(i), v > Scalar(0) ? 1 : -1);
    if (!th) continue;
    f.target[i] = th;
    times[i] = (*th - state.x(i)) / v;
    best = std::min(best, times[i]);
  }
  // hits whose closed-form times differ only by rounding are one event: the
  // agent is within a few ulps of its threshold when the first one lands
  auto arrives = [&](Index i, Scalar dt) {
    if (times[i] == dt) return true;
    if (!f.target[i]) return false;
    using std::abs;
    const Scalar th = *f.target[i];
    const Scalar gap = abs(th - (state.x(i) + velocity(i) * dt));
    const Scalar scale = std::max({abs(th), abs(state.x(i)), Scalar(1)});
    return gap <= Scalar(8) * std::numeric_limits<Scalar>::epsilon() * scale;
  };
  if (next_switch_time && *next_switch_time - state.t <= best) {
    f.dt = *next_switch_time - state.t;
    f.kind = EventKind::topology_switch;
    f.topology_switch = true;
    for (Index i = 0; i < n; ++i)
      if (arrives(i, f.dt)) f.hitting.push_back(i);
    return f;
  }
  if (best == std::numeric_limits<Scalar>::infinity()) return f;
  f.dt = best;
  f.kind = EventKind::threshold_hit;
  for (Index i = 0; i < n; ++i)
    if (arrives(i, best)) f.hitting.push_back(i);
  return f;
}

// ---------------------------------------------------------------------------
// Trajectories

template <typename Scalar>
struct TrajectoryEvent {
  Scalar t;
  std::vector<EventKind> kinds;
  VectorX<Scalar> x;
  std::vector<AgentMode<Scalar>> mode;
  /// Selection and velocity in force from this event to the next one.
  VectorX<Scalar> z;
  VectorX<Scalar> velocity;
  std::vector<AgentRole> role;
  /// Agents that reached a threshold or left a surface here.
  std::vector<Index> agents;

  bool has(EventKind k) const { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); }
};

enum class Termination { equilibrium, horizon, stopped };

/// Ordered events; x is affine between consecutive events with the earlier
/// event's velocity.
template <typename Scalar>
struct Trajectory {
  std::vector<TrajectoryEvent<Scalar>> events;
  Termination termination = Termination::horizon;

  Index n() const { return events.empty() ? 0 : events.front().x.size(); }
  bool certified_equilibrium() const { return termination == Termination::equilibrium; }
  Scalar end_time() const { return events.back().t; }

  VectorX<Scalar> state_at(Scalar t) const {
    auto it = std::upper_bound(events.begin(), events.end(), t,
                               [](Scalar v, const TrajectoryEvent<Scalar>& e) { return v < e.t; });
    if (it == events.begin()) return events.front().x;
    const auto& e = *(it - 1);
    if (it == events.end()) return e.x;
    return e.x + e.velocity * (t - e.t);
  }
};

/// Thrown when a run exceeds its event budget; carries what was computed.
template <typename Scalar>
class EventLimitExceeded : public std::runtime_error {
public:
  EventLimitExceeded(std::size_t limit, Trajectory<Scalar> partial)
      : std::runtime_error("event limit of " + std::to_string(limit) + " exceeded at t = " +
                           std::to_string(static_cast<double>(partial.end_time()))),
        partial_(std::move(partial)) {}
  const Trajectory<Scalar>& partial() const { return partial_; }

private:
  Trajectory<Scalar> partial_;
};

template <typename Scalar>
struct SimulationConfig {
  GraphSchedule<Scalar> schedule;
  Quantizer<Scalar> quantizer = Quantizer<Scalar>::uniform(Scalar(1));
  VectorX<Scalar> x0;
  SelectionPolicy<Scalar> policy = SlidingPolicy{};
  Scalar horizon = Scalar(1e6);
  std::size_t max_events = 100000;
  ResolverOptions resolver;
  /// Optional early stop, evaluated after each recorded event.
  std::function<bool(const NetworkState<Scalar>&)> stop_when;
};

/// True when the state rests under every graph the schedule can still apply.
template <typename Scalar>
bool is_certified_equilibrium(const NetworkState<Scalar>& state, const Quantizer<Scalar>& q,
                              const GraphSchedule<Scalar>& schedule, const SchedulePosition& pos,
                              const ResolverOptions& options = {}) {
  for (const auto* g : schedule.remaining_graphs(pos)) {
    const auto sel = resolve_sliding(state, q, *g, SelectionPolicy<Scalar>{SlidingPolicy{}}, options);
    if (!sel.full_hold() || !sel.at_rest()) return false;
  }
  return true;
}

/// Exact event-driven Krasovskii solution under the configured policy.
template <typename Scalar>
Trajectory<Scalar> simulate(const SimulationConfig<Scalar>& cfg) {
  using std::isfinite;
  const auto& q = cfg.quantizer;
  const Index n = cfg.schedule.n();
  if (cfg.x0.size() != n) throw InputError("initial state length differs from the agent count");
  for (Index i = 0; i < n; ++i)
    if (!isfinite(cfg.x0(i))) throw InputError("initial state must be finite");
  if (!(cfg.horizon > Scalar(0))) throw InputError("horizon must be positive");

  Trajectory<Scalar> traj;
  ResolverOptions options = cfg.resolver;
  SchedulePosition pos = cfg.schedule.locate(Scalar(0));
  VectorX<Scalar> x = cfg.x0;
  Scalar t(0);
  std::vector<EventKind> kinds{EventKind::start};
  std::vector<Index> hits;
  std::vector<AgentRole> previous_role(static_cast<std::size_t>(n), AgentRole::off_surface);

  for (;;) {
    NetworkState<Scalar> state = make_state(t, x, q);
    const auto& g = cfg.schedule.graph(pos);
    const SelectionPolicy<Scalar> sliding_policy{SlidingPolicy{}};
    Selection<Scalar> sliding = resolve_sliding(state, q, g, sliding_policy, options);
    bool terminal = sliding.full_hold() && sliding.at_rest() &&
                    is_certified_equilibrium(state, q, cfg.schedule, pos, options);
    Selection<Scalar> sel = terminal || std::holds_alternative<SlidingPolicy>(cfg.policy)
                                ? std::move(sliding)
                                : resolve_sliding(state, q, g, cfg.policy, options);

    std::vector<Index> agents = hits;
    for (Index i = 0; i < n; ++i) {
      const auto r = sel.role[i];
      const bool leaving = r == AgentRole::departing_up || r == AgentRole::departing_down;
      if (!leaving) continue;
      if (previous_role[i] == AgentRole::held &&
          std::find(kinds.begin(), kinds.end(), EventKind::surface_departure) == kinds.end())
        kinds.push_back(EventKind::surface_departure);
      if (std::find(agents.begin(), agents.end(), i) == agents.end()) agents.push_back(i);
    }
    for (Index i : hits)
      if (sel.role[i] == AgentRole::held) options.last_stopped = i;

    if (terminal) kinds.push_back(EventKind::equilibrium);
    const bool at_horizon = !terminal && t >= cfg.horizon;
    if (at_horizon) kinds.push_back(EventKind::horizon);

    TrajectoryEvent<Scalar> ev{t, kinds, x, state.mode, sel.z, sel.velocity, sel.role, agents};
    for (Index i = 0; i < n; ++i)
      if (ev.mode[i]) ev.mode[i]->alpha = sel.alpha(i);
    traj.events.push_back(std::move(ev));
    previous_role = sel.role;

    if (terminal) {
      traj.termination = Termination::equilibrium;
      return traj;
    }
    if (at_horizon) {
      traj.termination = Termination::horizon;
      return traj;
    }
    if (cfg.stop_when && cfg.stop_when(state)) {
      traj.termination = Termination::stopped;
      return traj;
    }
    if (traj.events.size() >= cfg.max_events) throw EventLimitExceeded<Scalar>(cfg.max_events, traj);

    const auto next_switch = cfg.schedule.next_switch_time(pos);
    const auto fc = next_event(state, q, next_switch, sel.velocity);
    if (fc.dt == std::numeric_limits<Scalar>::infinity()) {
      // nothing moves and nothing switches; the selection is a rest point
      traj.events.back().kinds.push_back(EventKind::equilibrium);
      traj.termination = Termination::equilibrium;
      return traj;
    }

    Scalar t_next = fc.topology_switch ? *next_switch : t + fc.dt;
    hits.clear();
    if (t_next > cfg.horizon) {
      const Scalar dt = cfg.horizon - t;
      for (Index i = 0; i < n; ++i) {
        if (sel.velocity(i) == Scalar(0)) continue;
        x(i) += sel.velocity(i) * dt;
        // rounding must not carry an agent past a threshold
        if (const auto& th = fc.target[i]) {
          if ((sel.velocity(i) > Scalar(0) && x(i) >= *th) || (sel.velocity(i) < Scalar(0) && x(i) <= *th)) {
            x(i) = *th;
            hits.push_back(i);
          }
        }
      }
      t = cfg.horizon;
      kinds = hits.empty() ? std::vector<EventKind>{} : std::vector<EventKind>{EventKind::threshold_hit};
      continue;
    }

    const Scalar dt = t_next - t;
    for (Index i = 0; i < n; ++i) {
      if (sel.velocity(i) == Scalar(0)) continue;
      const bool hit_now = std::find(fc.hitting.begin(), fc.hitting.end(), i) != fc.hitting.end();
      const auto& th = fc.target[i];
      if (hit_now && th) {
        x(i) = *th;
        hits.push_back(i);
        continue;
      }
      x(i) += sel.velocity(i) * dt;
      if (th && ((sel.velocity(i) > Scalar(0) && x(i) >= *th) ||
                 (sel.velocity(i) < Scalar(0) && x(i) <= *th))) {
        x(i) = *th;
        hits.push_back(i);
      }
    }
    std::sort(hits.begin(), hits.end());
    kinds.clear();
    if (!hits.empty()) kinds.push_back(EventKind::threshold_hit);
    if (fc.topology_switch) {
      kinds.push_back(EventKind::topology_switch);
      pos = *cfg.schedule.next(pos);
    }
    t = t_next;
  }
}

} // namespace qcl
