#include "qcl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qcl {

namespace {

struct LevelWindow {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  void narrow(const Interval<double>& box) {
    lo = std::max(lo, box.lo);
    hi = std::min(hi, box.hi);
  }
  bool empty() const { return lo > hi; }
};

LevelWindow window_of(const VectorX<double>& x, const Quantizer<double>& q) {
  LevelWindow w;
  for (Index i = 0; i < x.size(); ++i) w.narrow(q.krasovskii_set(x(i)));
  return w;
}

/// Kq sets inside the open segment that starts at event e: moving agents are
/// strictly inside a cell there.
LevelWindow segment_window(const TrajectoryEvent<double>& e, const TrajectoryEvent<double>& next,
                           const Quantizer<double>& q) {
  LevelWindow w;
  const double mid = 0.5 * (next.t - e.t);
  for (Index i = 0; i < e.x.size(); ++i) {
    const double v = e.velocity(i);
    w.narrow(q.krasovskii_set(v == 0.0 ? e.x(i) : e.x(i) + v * mid));
  }
  return w;
}

std::string agent_label(Index i) { return "agent " + std::to_string(i + 1); }

} // namespace

std::optional<ConsensusLevel> consensus_level(const VectorX<double>& x, const Quantizer<double>& q) {
  if (x.size() == 0) return std::nullopt;
  const LevelWindow w = window_of(x, q);
  if (w.empty()) return std::nullopt;
  return ConsensusLevel{w.lo, w.hi};
}

std::optional<ConvergencePoint> convergence_time(const Trajectory<double>& traj,
                                                 const Quantizer<double>& q) {
  if (traj.events.empty() || !traj.certified_equilibrium()) return std::nullopt;
  const auto& ev = traj.events;
  LevelWindow suffix = window_of(ev.back().x, q);
  if (suffix.empty()) return std::nullopt;
  std::size_t first = ev.size() - 1;
  LevelWindow found = suffix;
  for (std::size_t k = ev.size() - 1; k-- > 0;) {
    LevelWindow w = suffix;
    const LevelWindow at = window_of(ev[k].x, q);
    const LevelWindow seg = segment_window(ev[k], ev[k + 1], q);
    w.lo = std::max({w.lo, at.lo, seg.lo});
    w.hi = std::min({w.hi, at.hi, seg.hi});
    if (w.empty()) break;
    suffix = w;
    found = w;
    first = k;
  }
  return ConvergencePoint{ev[first].t, found.lo, found.hi};
}

double quantized_spread(const VectorX<double>& x0, const Quantizer<double>& q) {
  if (x0.size() == 0) return 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Index i = 0; i < x0.size(); ++i) {
    const double v = q.quantize(x0(i));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

double tcon_bound(Index n, double a_low, double a_high, const VectorX<double>& x0,
                  const Quantizer<double>& q) {
  if (!q.is_uniform()) throw UnsupportedError("the convergence-time bound needs a uniform quantizer");
  if (!(a_low > 0.0) || !(a_low <= a_high)) throw InputError("bound needs 0 < a_low <= a_high");
  const double nn = static_cast<double>(n);
  return (1.0 / q.delta()) * (nn / a_low) * std::pow(nn * a_high / a_low, nn) *
         quantized_spread(x0, q);
}

EnvelopeReport envelopes(const Trajectory<double>& traj, const Quantizer<double>& q) {
  EnvelopeReport rep;
  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    const auto& x = traj.events[k].x;
    double m = std::numeric_limits<double>::infinity(), big_m = -m;
    for (Index i = 0; i < x.size(); ++i) {
      const auto box = q.krasovskii_set(x(i));
      m = std::min(m, box.lo);
      big_m = std::max(big_m, box.hi);
    }
    if (!rep.samples.empty()) {
      const auto& prev = rep.samples.back();
      const bool down = m < prev.m, up = big_m > prev.M;
      if (down) rep.min_nondecreasing = false;
      if (up) rep.max_nonincreasing = false;
      if (down || up) {
        ++rep.violations;
        if (!rep.first_violation) rep.first_violation = k;
      }
    }
    rep.samples.push_back({traj.events[k].t, m, big_m});
  }
  return rep;
}

double average_conservation(const Trajectory<double>& traj) {
  if (traj.events.empty()) return 0.0;
  const double base = traj.events.front().x.mean();
  double drift = 0.0;
  for (const auto& e : traj.events) drift = std::max(drift, std::abs(e.x.mean() - base));
  return drift;
}

const char* to_string(Verdict v) {
  switch (v) {
  case Verdict::pass: return "pass";
  case Verdict::fail: return "fail";
  case Verdict::not_applicable: return "not applicable";
  }
  return "?";
}

LimitCheck limit_value_check(const Trajectory<double>& traj, const GraphSchedule<double>& schedule,
                             const Quantizer<double>& q, double tol) {
  if (!q.is_uniform()) return {Verdict::not_applicable, "quantizer is not uniform"};
  if (!is_weight_balanced(schedule)) return {Verdict::not_applicable, "schedule is not weight-balanced"};
  if (traj.events.empty()) return {Verdict::fail, "empty trajectory"};
  const auto conv = convergence_time(traj, q);
  if (!conv) return {Verdict::fail, "trajectory did not reach a certified consensus"};

  const double delta = q.delta();
  const double mean0 = traj.events.front().x.mean();
  const double offset = mean0 / delta - 0.5;
  const bool half_level = std::abs(offset - std::round(offset)) <= tol * std::max(1.0, std::abs(offset));
  std::ostringstream msg;
  msg.precision(17);
  if (half_level) {
    const VectorX<double> at = traj.state_at(conv->t_con);
    const double gap = (at.array() - mean0).abs().maxCoeff();
    msg << "mean " << mean0 << " on a threshold; max |x_i(Tcon) - mean| = " << gap;
    return {gap <= tol ? Verdict::pass : Verdict::fail, msg.str()};
  }
  const double expected = q.quantize(mean0);
  msg << "q(mean) = " << expected << ", limit level = " << conv->s_star;
  const bool match = conv->s_star == expected || conv->s_star_upper == expected;
  return {match ? Verdict::pass : Verdict::fail, msg.str()};
}

ConvergenceReport analyze(const SimulationConfig<double>& cfg, const Trajectory<double>& traj) {
  ConvergenceReport rep;
  const auto& q = cfg.quantizer;
  if (auto conv = convergence_time(traj, q)) {
    rep.converged = true;
    rep.t_con = conv->t_con;
    rep.s_star = conv->s_star;
    rep.s_star_upper = conv->s_star_upper;
    if (q.is_uniform()) rep.q_infinity = conv->s_star;
  }
  if (q.is_uniform() && cfg.schedule.has_time_invariant_topology())
    rep.bound = tcon_bound(cfg.schedule.n(), cfg.schedule.a_low(), cfg.schedule.a_high(), cfg.x0, q);
  rep.average_drift = average_conservation(traj);
  const auto env = envelopes(traj, q);
  rep.envelope_violations = env.violations;
  rep.envelope_ok = env.ok();
  return rep;
}

AuditReport audit_trajectory(const Trajectory<double>& traj, const SimulationConfig<double>& cfg) {
  AuditReport rep;
  const auto& q = cfg.quantizer;
  auto fail = [&](std::size_t k, const std::string& what) {
    std::ostringstream s;
    s.precision(17);
    s << "event " << k << " (t = " << traj.events[k].t << "): " << what;
    rep.violations.push_back(s.str());
  };
  if (traj.events.empty()) {
    rep.violations.push_back("trajectory has no events");
    return rep;
  }

  double m0 = std::numeric_limits<double>::infinity(), big_m0 = -m0, scale = 1.0;
  for (Index i = 0; i < traj.n(); ++i) {
    const auto box = q.krasovskii_set(traj.events.front().x(i));
    m0 = std::min(m0, box.lo);
    big_m0 = std::max(big_m0, box.hi);
    scale = std::max({scale, std::abs(box.lo), std::abs(box.hi)});
  }
  scale *= std::max(1.0, cfg.schedule.a_high() * static_cast<double>(traj.n()));
  const double tol = 1e-9 * scale;

  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    const auto& e = traj.events[k];
    const auto& g = cfg.schedule.graph_at(e.t);
    for (Index i = 0; i < e.x.size(); ++i) {
      const auto box = q.krasovskii_set(e.x(i));
      if (!box.contains(e.z(i))) fail(k, "selection of " + agent_label(i) + " outside Kq");
      if (box.lo < m0 || box.hi > big_m0) fail(k, agent_label(i) + " left the initial level range");
      switch (e.role[i]) {
      case AgentRole::held:
        if (e.velocity(i) != 0.0) fail(k, "held " + agent_label(i) + " has nonzero velocity");
        if (box.is_point()) fail(k, "held " + agent_label(i) + " is not on a threshold");
        break;
      case AgentRole::departing_up:
        if (!(e.velocity(i) > 0.0) || e.z(i) != box.hi)
          fail(k, agent_label(i) + " departs upward inconsistently");
        break;
      case AgentRole::departing_down:
        if (!(e.velocity(i) < 0.0) || e.z(i) != box.lo)
          fail(k, agent_label(i) + " departs downward inconsistently");
        break;
      case AgentRole::off_surface:
        if (!box.is_point()) fail(k, agent_label(i) + " on a threshold without a surface role");
        break;
      }
    }
    const VectorX<double> v = selection_velocity(g, e.z);
    for (Index i = 0; i < e.x.size(); ++i)
      if (e.role[i] != AgentRole::held && std::abs(v(i) - e.velocity(i)) > tol)
        fail(k, "recorded velocity of " + agent_label(i) + " differs from -L z");
      else if (e.role[i] == AgentRole::held && std::abs(v(i)) > tol)
        fail(k, "hold residual of " + agent_label(i) + " is not zero");

    if (k + 1 == traj.events.size()) break;
    const auto& nx = traj.events[k + 1];
    if (!(nx.t > e.t)) fail(k + 1, "event times are not strictly increasing");
    const VectorX<double> predicted = e.x + e.velocity * (nx.t - e.t);
    for (Index i = 0; i < e.x.size(); ++i) {
      if (std::abs(predicted(i) - nx.x(i)) > tol) fail(k + 1, "state of " + agent_label(i) + " jumps");
      if (e.velocity(i) == 0.0) continue;
      // the open segment stays in one cell whose level both endpoints admit
      const double mid = e.x(i) + e.velocity(i) * (0.5 * (nx.t - e.t));
      const double level = q.level(q.cell(mid));
      const bool ok = !q.threshold_index(mid) && q.krasovskii_set(e.x(i)).contains(level) &&
                      q.krasovskii_set(nx.x(i)).contains(level);
      if (!ok) fail(k + 1, agent_label(i) + " crossed a threshold inside a segment");
    }
  }
  return rep;
}

} // namespace qcl
