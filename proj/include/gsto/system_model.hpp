#pragma once

// Plant class: N subsystems with a cascaded measured channel
//
//   x_i1' = f_i1(y, u, x_12..x_(i-1)2, t) + g_i(y, u, t) x_i2
//   x_i2' = f_i2(x, u, t) + delta_i(x, u, w, t)
//   y     = (x_11, ..., x_N1)
//
// States are stored flat as [x_11, x_12, x_21, x_22, ...].

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsto/errors.hpp"

namespace gsto {

using Vec = Eigen::VectorXd;

struct StateLayout {
  std::size_t n = 0;  // number of subsystems

  std::size_t dim() const noexcept { return 2 * n; }
  /// Zero-based (subsystem, channel) -> flat index; channel 0 is measured.
  static constexpr std::size_t flat(std::size_t i, std::size_t j) noexcept { return 2 * i + j; }
  static constexpr std::pair<std::size_t, std::size_t> unflat(std::size_t k) noexcept {
    return {k / 2, k % 2};
  }
};

struct GainBounds {
  double lo = 0.0;
  double hi = 0.0;
};

using F1 = std::function<double(const Vec& y, const Vec& u, std::span<const double> upstream_x2, double t)>;
using F2 = std::function<double(const Vec& x, const Vec& u, double t)>;
using GainFn = std::function<double(const Vec& y, const Vec& u, double t)>;
using PerturbationFn = std::function<double(const Vec& x, const Vec& u, const Vec& w, double t)>;

/// The parts of one subsystem that an observer is allowed to know.
struct KnownDynamics {
  F1 f1;
  F2 f2;
  GainFn g;
  GainBounds g_bounds;
};

struct SubsystemModel {
  KnownDynamics known;
  PerturbationFn delta;  // empty means delta == 0
};

/// Evaluator for the known (observer-visible) parts of an interconnected system.
class KnownModel {
 public:
  KnownModel() = default;
  KnownModel(std::vector<KnownDynamics> subsystems, std::size_t input_dim)
      : subs_(std::move(subsystems)), m_(input_dim) {
    if (subs_.empty()) throw DomainError("system needs at least one subsystem");
    for (std::size_t i = 0; i < subs_.size(); ++i) {
      const auto& s = subs_[i];
      if (!s.f1 || !s.f2 || !s.g) {
        throw DomainError("subsystem " + std::to_string(i + 1) + ": f1, f2 and g are required");
      }
      if (!(s.g_bounds.lo > 0.0) || !(s.g_bounds.hi >= s.g_bounds.lo) || !std::isfinite(s.g_bounds.hi)) {
        throw DomainError("subsystem " + std::to_string(i + 1) + ": need 0 < g_m <= g_M < inf");
      }
    }
  }

  std::size_t size() const noexcept { return subs_.size(); }
  std::size_t input_dim() const noexcept { return m_; }
  StateLayout layout() const noexcept { return {subs_.size()}; }
  const KnownDynamics& subsystem(std::size_t i) const { return subs_.at(i); }

  /// g_i with the declared-bounds check applied.
  double g(std::size_t i, const Vec& y, const Vec& u, double t) const {
    const auto& s = subs_[i];
    const double v = s.g(y, u, t);
    if (!(v >= s.g_bounds.lo && v <= s.g_bounds.hi)) {
      throw BoundViolation(i, v, s.g_bounds.lo, s.g_bounds.hi);
    }
    return v;
  }

  /// f_i1 fed with the upstream second states taken from `second_states` (length N).
  double f1(std::size_t i, const Vec& y, const Vec& u, std::span<const double> second_states,
            double t) const {
    return subs_[i].f1(y, u, second_states.first(i), t);
  }

  double f2(std::size_t i, const Vec& x, const Vec& u, double t) const { return subs_[i].f2(x, u, t); }

  void check_state(const Vec& x) const {
    if (static_cast<std::size_t>(x.size()) != 2 * size()) {
      throw DomainError("state has dimension " + std::to_string(x.size()) + ", expected " +
                        std::to_string(2 * size()));
    }
  }
  void check_output(const Vec& y) const {
    if (static_cast<std::size_t>(y.size()) != size()) {
      throw DomainError("output has dimension " + std::to_string(y.size()) + ", expected " +
                        std::to_string(size()));
    }
  }
  void check_input(const Vec& u) const {
    if (static_cast<std::size_t>(u.size()) != m_) {
      throw DomainError("input has dimension " + std::to_string(u.size()) + ", expected " +
                        std::to_string(m_));
    }
  }

 private:
  std::vector<KnownDynamics> subs_;
  std::size_t m_ = 0;
};

/// Measured channels of a flat state.
inline Vec measured(const Vec& x) {
  const Eigen::Index n = x.size() / 2;
  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = x[2 * i];
  return y;
}

/// Second (unmeasured) channels of a flat state.
inline std::vector<double> second_channels(const Vec& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size() / 2));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[static_cast<Eigen::Index>(2 * i + 1)];
  return out;
}

namespace detail {
inline void require_finite_vec(const Vec& v, const char* what) {
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v[k])) {
      throw NumericError(std::string(what) + ": non-finite component " + std::to_string(k),
                         static_cast<std::size_t>(k));
    }
  }
}
}  // namespace detail

/// Truth-side plant: known dynamics plus the unknown perturbations.
class InterconnectedSystem {
 public:
  InterconnectedSystem() = default;  // empty placeholder; size() == 0
  InterconnectedSystem(std::vector<SubsystemModel> subsystems, std::size_t input_dim) {
    std::vector<KnownDynamics> known;
    known.reserve(subsystems.size());
    for (auto& s : subsystems) {
      known.push_back(std::move(s.known));
      deltas_.push_back(std::move(s.delta));
    }
    known_ = KnownModel(std::move(known), input_dim);
  }

  std::size_t size() const noexcept { return known_.size(); }
  std::size_t state_dim() const noexcept { return 2 * size(); }
  std::size_t input_dim() const noexcept { return known_.input_dim(); }
  StateLayout layout() const noexcept { return known_.layout(); }
  const KnownModel& known() const noexcept { return known_; }

  double delta(std::size_t i, const Vec& x, const Vec& u, const Vec& w, double t) const {
    return deltas_[i] ? deltas_[i](x, u, w, t) : 0.0;
  }

 private:
  KnownModel known_;
  std::vector<PerturbationFn> deltas_;
};

inline Vec eval_plant_rhs(const InterconnectedSystem& sys, const Vec& x, const Vec& u, const Vec& w,
                          double t) {
  const auto& km = sys.known();
  km.check_state(x);
  km.check_input(u);
  if (static_cast<std::size_t>(w.size()) != sys.size()) {
    throw DomainError("unknown input w has wrong dimension");
  }
  const Vec y = measured(x);
  const auto x2 = second_channels(x);
  Vec dx(x.size());
  for (std::size_t i = 0; i < sys.size(); ++i) {
    const double gi = km.g(i, y, u, t);
    const auto k = static_cast<Eigen::Index>(2 * i);
    dx[k] = km.f1(i, y, u, x2, t) + gi * x2[i];
    dx[k + 1] = km.f2(i, x, u, t) + sys.delta(i, x, u, w, t);
  }
  detail::require_finite_vec(dx, "plant rhs");
  return dx;
}

struct ObservabilityImage {
  Vec y;
  Vec ydot;
};

/// (y, y') as a function of the state; independent of delta and w.
inline ObservabilityImage observability_map(const KnownModel& km, const Vec& x, const Vec& u, double t) {
  km.check_state(x);
  km.check_input(u);
  ObservabilityImage out{measured(x), Vec(static_cast<Eigen::Index>(km.size()))};
  const auto x2 = second_channels(x);
  for (std::size_t i = 0; i < km.size(); ++i) {
    const double gi = km.g(i, out.y, u, t);
    out.ydot[static_cast<Eigen::Index>(i)] = km.f1(i, out.y, u, x2, t) + gi * x2[i];
  }
  detail::require_finite_vec(out.ydot, "observability map");
  return out;
}

inline ObservabilityImage observability_map(const InterconnectedSystem& sys, const Vec& x, const Vec& u,
                                            double t) {
  return observability_map(sys.known(), x, u, t);
}

/// Reconstructs the state from (y, y'), solving the cascade in ascending subsystem order.
inline Vec invert_observability(const KnownModel& km, const Vec& y, const Vec& ydot, const Vec& u,
                                double t) {
  km.check_output(y);
  km.check_output(ydot);
  km.check_input(u);
  const std::size_t n = km.size();
  Vec x(static_cast<Eigen::Index>(2 * n));
  std::vector<double> x2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double gi = km.g(i, y, u, t);  // throws below g_m, so the division is guarded
    x2[i] = (ydot[k] - km.f1(i, y, u, x2, t)) / gi;
    x[2 * k] = y[k];
    x[2 * k + 1] = x2[i];
  }
  detail::require_finite_vec(x, "observability inverse");
  return x;
}

inline Vec invert_observability(const InterconnectedSystem& sys, const Vec& y, const Vec& ydot,
                                const Vec& u, double t) {
  return invert_observability(sys.known(), y, ydot, u, t);
}

struct ProbePoint {
  Vec y;
  Vec u;
  double t = 0.0;
};

/// Positive-gain prerequisites of the observer; only the fields checked here.
struct GainPrerequisites {
  std::vector<double> l1, l2, gamma;
};

struct ValidationReport {
  std::size_t subsystems = 0;
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  std::size_t probes = 0;
  double g_min_observed = 0.0;
  double g_max_observed = 0.0;
  std::vector<std::string> violations;
  std::optional<bool> gains_positive;

  bool ok() const noexcept { return violations.empty() && gains_positive.value_or(true); }
};

inline ValidationReport validate_system(const KnownModel& km, std::span<const ProbePoint> grid,
                                        const std::optional<GainPrerequisites>& gains = std::nullopt) {
  ValidationReport r;
  r.subsystems = km.size();
  r.state_dim = 2 * km.size();
  r.input_dim = km.input_dim();
  r.probes = grid.size();
  r.g_min_observed = std::numeric_limits<double>::infinity();
  r.g_max_observed = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto& pt = grid[p];
    if (static_cast<std::size_t>(pt.y.size()) != km.size() ||
        static_cast<std::size_t>(pt.u.size()) != km.input_dim()) {
      r.violations.push_back("probe " + std::to_string(p) + ": dimension mismatch");
      continue;
    }
    for (std::size_t i = 0; i < km.size(); ++i) {
      const auto& s = km.subsystem(i);
      const double v = s.g(pt.y, pt.u, pt.t);
      if (std::isfinite(v)) {
        r.g_min_observed = std::min(r.g_min_observed, v);
        r.g_max_observed = std::max(r.g_max_observed, v);
      }
      if (!(v >= s.g_bounds.lo && v <= s.g_bounds.hi)) {
        r.violations.push_back("probe " + std::to_string(p) + ": g_" + std::to_string(i + 1) + " = " +
                               std::to_string(v) + " outside [" + std::to_string(s.g_bounds.lo) + ", " +
                               std::to_string(s.g_bounds.hi) + "]");
      }
    }
  }
  if (gains) {
    bool ok = gains->l1.size() == km.size() && gains->l2.size() == km.size() &&
              gains->gamma.size() == km.size();
    for (std::size_t i = 0; ok && i < km.size(); ++i) {
      ok = gains->l1[i] > 0.0 && gains->l2[i] > 0.0 && gains->gamma[i] > 0.0;
    }
    r.gains_positive = ok;
  }
  return r;
}

inline ValidationReport validate_system(const InterconnectedSystem& sys, std::span<const ProbePoint> grid,
                                        const std::optional<GainPrerequisites>& gains = std::nullopt) {
  return validate_system(sys.known(), grid, gains);
}

}  // namespace gsto
