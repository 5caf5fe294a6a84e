#pragma once

#include <cmath>
#include <vector>

#include "qcl/dynamics.hpp"

namespace qcl {

/// Continuous piecewise-linear surrogate of q: equal to q outside
/// eps-neighbourhoods of thresholds, linear across each neighbourhood.
template <typename Scalar>
Scalar regularized_quantize(const Quantizer<Scalar>& q, Scalar z, Scalar eps) {
  const std::int64_t k = q.cell(z);
  for (std::int64_t idx : {k - 1, k}) {
    const auto th = q.threshold(idx);
    if (!th) continue;
    using std::abs;
    if (abs(z - *th) < eps) {
      const Scalar lo = q.level(idx), hi = q.level(idx + 1);
      return lo + (hi - lo) * (z - *th + eps) / (Scalar(2) * eps);
    }
  }
  return q.level(k);
}

template <typename Scalar>
struct SampledTrajectory {
  std::vector<Scalar> t;
  std::vector<VectorX<Scalar>> x;
};

/// Fixed-step RK4 on x' = -L(t) q_eps(x), sampled every `stride` time units.
///
/// Requires eps < min_gap/4 and h < eps / (4 n a_high range), where range is
/// the initial spread of the Kq envelope. Throws NumericalInstability when the
/// state leaves a generous bounding box.
template <typename Scalar>
SampledTrajectory<Scalar> simulate_regularized(const SimulationConfig<Scalar>& cfg, Scalar eps,
                                               Scalar h, Scalar t_end, Scalar stride) {
  const auto& q = cfg.quantizer;
  const Index n = cfg.schedule.n();
  if (cfg.x0.size() != n) throw InputError("initial state length differs from the agent count");
  if (!(eps > Scalar(0)) || !(eps < q.min_gap() / Scalar(4)))
    throw InputError("eps must lie in (0, min_gap/4)");

  Scalar m0 = std::numeric_limits<Scalar>::infinity(), big_m0 = -m0, xmax(0);
  for (Index i = 0; i < n; ++i) {
    const auto box = q.krasovskii_set(cfg.x0(i));
    m0 = std::min(m0, box.lo);
    big_m0 = std::max(big_m0, box.hi);
    using std::abs;
    xmax = std::max(xmax, abs(cfg.x0(i)));
  }
  const Scalar range = std::max(big_m0 - m0, q.min_gap());
  if (!(h > Scalar(0)) || !(h < eps / (Scalar(4) * Scalar(n) * cfg.schedule.a_high() * range)))
    throw InputError("step h violates the stability guard h < eps / (4 n a_high range)");
  if (!(stride >= h)) throw InputError("sampling stride must be at least one step");

  auto rhs = [&](Scalar t, const VectorX<Scalar>& x) {
    VectorX<Scalar> z(n);
    for (Index i = 0; i < n; ++i) z(i) = regularized_quantize(q, x(i), eps);
    return selection_velocity(cfg.schedule.graph_at(t), z);
  };

  using std::llround;
  const long long steps = llround(t_end / h);
  const long long every = std::max<long long>(1, llround(stride / h));
  const Scalar bound = xmax + Scalar(10) * (range + q.min_gap());

  SampledTrajectory<Scalar> out;
  VectorX<Scalar> x = cfg.x0;
  out.t.push_back(Scalar(0));
  out.x.push_back(x);
  for (long long s = 0; s < steps; ++s) {
    const Scalar t = Scalar(s) * h;
    const VectorX<Scalar> k1 = rhs(t, x);
    const VectorX<Scalar> k2 = rhs(t + h / 2, x + (h / 2) * k1);
    const VectorX<Scalar> k3 = rhs(t + h / 2, x + (h / 2) * k2);
    const VectorX<Scalar> k4 = rhs(t + h, x + h * k3);
    x += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > bound)
      throw NumericalInstability("regularized integration diverged; use a smaller step h");
    if ((s + 1) % every == 0) {
      out.t.push_back(Scalar(s + 1) * h);
      out.x.push_back(x);
    }
  }
  return out;
}

/// Largest sup-norm gap between an exact trajectory and oracle samples.
template <typename Scalar>
Scalar max_deviation(const Trajectory<Scalar>& exact, const SampledTrajectory<Scalar>& samples) {
  Scalar worst(0);
  for (std::size_t k = 0; k < samples.t.size(); ++k)
    worst = std::max(worst, (exact.state_at(samples.t[k]) - samples.x[k]).cwiseAbs().maxCoeff());
  return worst;
}

} // namespace qcl
