#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "qcl/errors.hpp"

namespace qcl {

template <typename Scalar>
struct Interval {
  Scalar lo;
  Scalar hi;

  bool contains(Scalar v) const { return lo <= v && v <= hi; }
  bool is_point() const { return lo == hi; }
};

/// Non-decreasing step map into a discrete level set.
///
/// Levels are indexed by consecutive integers; threshold k separates level k
/// from level k + 1. Uniform quantizers have level k = k*delta and threshold
/// k = (k + 1/2)*delta for every integer k. General quantizers carry a finite
/// list and clamp to the extreme levels outside it.
///
/// A value is on a threshold iff it is bit-identical to threshold(k). At a
/// threshold quantize() returns the upper level; the dynamics never rely on
/// that value and use krasovskii_set() instead.
template <typename Scalar>
class Quantizer {
public:
  static Quantizer uniform(Scalar delta) {
    using std::isfinite;
    if (!(delta > Scalar(0)) || !isfinite(delta))
      throw InputError("uniform quantizer needs a finite positive delta");
    Quantizer q;
    q.delta_ = delta;
    return q;
  }

  static Quantizer general(std::vector<Scalar> levels, std::vector<Scalar> thresholds) {
    using std::isfinite;
    if (levels.empty()) throw InputError("general quantizer needs at least one level");
    if (thresholds.size() + 1 != levels.size())
      throw InputError("general quantizer needs exactly one threshold between consecutive levels");
    for (std::size_t k = 0; k < levels.size(); ++k) {
      if (!isfinite(levels[k])) throw InputError("levels must be finite");
      if (k > 0 && !(levels[k] > levels[k - 1]))
        throw InputError("levels must be strictly increasing");
    }
    for (std::size_t k = 0; k < thresholds.size(); ++k)
      if (!(levels[k] < thresholds[k] && thresholds[k] < levels[k + 1]))
        throw InputError("thresholds must interleave levels");
    Quantizer q;
    q.levels_ = std::move(levels);
    q.thresholds_ = std::move(thresholds);
    return q;
  }

  bool is_uniform() const { return delta_ > Scalar(0); }
  Scalar delta() const {
    if (!is_uniform()) throw UnsupportedError("delta is defined for uniform quantizers only");
    return delta_;
  }
  const std::vector<Scalar>& levels() const { return levels_; }
  const std::vector<Scalar>& thresholds() const { return thresholds_; }

  /// Minimal distance between distinct levels.
  Scalar min_gap() const {
    if (is_uniform()) return delta_;
    if (levels_.size() < 2) return Scalar(1);
    Scalar gap = levels_[1] - levels_[0];
    for (std::size_t k = 2; k < levels_.size(); ++k) gap = std::min(gap, levels_[k] - levels_[k - 1]);
    return gap;
  }

  /// Index of the level quantize(z) returns.
  std::int64_t cell(Scalar z) const {
    check_finite(z);
    if (!is_uniform()) {
      auto it = std::upper_bound(thresholds_.begin(), thresholds_.end(), z);
      return static_cast<std::int64_t>(it - thresholds_.begin());
    }
    using std::floor;
    auto k = static_cast<std::int64_t>(floor(z / delta_ + Scalar(0.5)));
    // agree with the stored threshold values, not the rounded quotient
    while (z >= uniform_threshold(k)) ++k;
    while (z < uniform_threshold(k - 1)) --k;
    return k;
  }

  Scalar level(std::int64_t k) const {
    if (is_uniform()) return Scalar(k) * delta_;
    return levels_.at(static_cast<std::size_t>(k));
  }

  bool has_threshold(std::int64_t k) const {
    return is_uniform() || (k >= 0 && k < static_cast<std::int64_t>(thresholds_.size()));
  }

  std::optional<Scalar> threshold(std::int64_t k) const {
    if (!has_threshold(k)) return std::nullopt;
    return is_uniform() ? uniform_threshold(k) : thresholds_[static_cast<std::size_t>(k)];
  }

  Scalar quantize(Scalar z) const { return level(cell(z)); }

  /// Threshold index when z sits exactly on a discontinuity of q.
  std::optional<std::int64_t> threshold_index(Scalar z) const {
    const std::int64_t k = cell(z) - 1;
    if (has_threshold(k) && *threshold(k) == z) return k;
    return std::nullopt;
  }

  /// Krasovskii convexification of q at z: the hull of both one-sided limits.
  Interval<Scalar> krasovskii_set(Scalar z) const {
    if (auto k = threshold_index(z)) return {level(*k), level(*k + 1)};
    const Scalar v = quantize(z);
    return {v, v};
  }

  /// Nearest threshold strictly above (direction > 0) or below x.
  std::optional<Scalar> next_threshold(Scalar x, int direction) const {
    if (direction == 0) throw InputError("direction must be +1 or -1");
    const std::int64_t k = cell(x);
    if (direction > 0) return threshold(k);
    return threshold(threshold_index(x) ? k - 2 : k - 1);
  }

private:
  Quantizer() = default;

  Scalar uniform_threshold(std::int64_t k) const { return (Scalar(k) + Scalar(0.5)) * delta_; }

  static void check_finite(Scalar z) {
    using std::isfinite;
    if (!isfinite(z)) throw InputError("quantizer input must be finite");
  }

  Scalar delta_{0};
  std::vector<Scalar> levels_;
  std::vector<Scalar> thresholds_;
};

} // namespace qcl
