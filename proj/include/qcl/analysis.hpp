#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qcl/dynamics.hpp"

namespace qcl {

/// Levels shared by every Kq(x_i). At most two; they differ only when all
/// agents sit on one common threshold.
struct ConsensusLevel {
  double lower;
  double upper;
};

std::optional<ConsensusLevel> consensus_level(const VectorX<double>& x, const Quantizer<double>& q);

struct ConvergencePoint {
  double t_con;
  double s_star;
  double s_star_upper;
};

/// Earliest event time from which one level stays in every Kq(x_i) up to the
/// certified terminal equilibrium. nullopt when the run ended without one.
std::optional<ConvergencePoint> convergence_time(const Trajectory<double>& traj,
                                                 const Quantizer<double>& q);

/// max_ij |q(x_i(0)) - q(x_j(0))|
double quantized_spread(const VectorX<double>& x0, const Quantizer<double>& q);

/// Upper bound on the convergence time for time-invariant topologies and
/// uniform quantizers: (1/delta) (n/a_low) (n a_high/a_low)^n spread.
double tcon_bound(Index n, double a_low, double a_high, const VectorX<double>& x0,
                  const Quantizer<double>& q);

struct EnvelopeSample {
  double t;
  double m;
  double M;
};

struct EnvelopeReport {
  std::vector<EnvelopeSample> samples;
  bool min_nondecreasing = true;
  bool max_nonincreasing = true;
  std::size_t violations = 0;
  /// Index of the first event where either envelope moved the wrong way.
  std::optional<std::size_t> first_violation;

  bool ok() const { return min_nondecreasing && max_nonincreasing; }
};

/// m(t) = min_i min Kq(x_i(t)), M(t) = max_i max Kq(x_i(t)) at every event.
EnvelopeReport envelopes(const Trajectory<double>& traj, const Quantizer<double>& q);

/// max over events of |mean x(t) - mean x(0)|
double average_conservation(const Trajectory<double>& traj);

enum class Verdict { pass, fail, not_applicable };
const char* to_string(Verdict v);

struct LimitCheck {
  Verdict verdict;
  std::string detail;
};

/// For balanced schedules and uniform quantizers: the limit level equals
/// q(mean x(0)), or, when the mean sits on a threshold, every agent ends
/// exactly at the mean.
LimitCheck limit_value_check(const Trajectory<double>& traj, const GraphSchedule<double>& schedule,
                             const Quantizer<double>& q, double tol = 1e-9);

struct ConvergenceReport {
  bool converged = false;
  std::optional<double> t_con;
  std::optional<double> s_star;
  std::optional<double> s_star_upper;
  std::optional<double> q_infinity;
  std::optional<double> bound;
  double average_drift = 0;
  std::size_t envelope_violations = 0;
  bool envelope_ok = true;
};

ConvergenceReport analyze(const SimulationConfig<double>& cfg, const Trajectory<double>& traj);

/// Structural checks of an emitted trajectory: ordering, continuity, Kq
/// membership of selections, hold/departure consistency, v = -L z, and no
/// agent crossing a threshold inside a segment.
struct AuditReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

AuditReport audit_trajectory(const Trajectory<double>& traj, const SimulationConfig<double>& cfg);

} // namespace qcl
