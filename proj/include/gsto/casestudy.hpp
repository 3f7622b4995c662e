#pragma once

// Interconnected larvae production units. Per unit i: x_i1 = C_i (CO2),
// x_i2 = B_i (dry biomass per larva). Larvae crawl from unit i to unit i+1
// through the valve, so biomass flows downstream.
//
// Known input vector u = (u_v, u_o, C_o).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gsto/errors.hpp"
#include "gsto/observer.hpp"
#include "gsto/simulator.hpp"
#include "gsto/system_model.hpp"

namespace gsto::larvae {

inline constexpr double kDay = 86400.0;
inline constexpr std::size_t kInputDim = 3;
enum InputIndex : Eigen::Index { kValve = 0, kVent = 1, kOutsideCO2 = 2 };

/// Aeration rate O / (O + C).
inline double r_A(double O, double C) {
  if (!std::isfinite(O) || !std::isfinite(C)) throw DomainError("r_A: non-finite argument");
  if (!(O > 0.0)) throw DomainError("r_A: O must be positive");
  if (O + C == 0.0) throw DomainError("r_A: O + C = 0");
  return O / (O + C);
}

/// Default temperature response: log10(1 + 36 s (1 - s)), s = clamp((T - 15) / 50, 0, 1).
inline double default_r_T(double T) {
  const double s = std::clamp((T - 15.0) / 50.0, 0.0, 1.0);
  return std::log10(1.0 + 36.0 * s * (1.0 - s));
}

struct LarvaeParams {
  // Growth and exchange coefficients. The literature values are not reproduced
  // here; these defaults keep the states positive over the two-week horizon.
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double alpha7 = 1e-4;
  double alpha9 = 1.5e-4;
  double alpha15 = 1e-6;
  double alpha17 = 1.5;
  double alpha20 = 2e-3;
  double alpha21 = 2.5e-6;
  double kappa = 1e-6;
  std::vector<double> L{160.0, 120.0};
  std::vector<double> T{35.0, 40.0};

  std::function<double(double)> C_o_fn = [](double t) { return 9.1167e-4 * std::sin(t / 900.0); };
  std::function<double(std::size_t, double)> O_fn = [](std::size_t, double) { return 20.95; };
  std::function<double(double)> u_v_fn = [](double t) { return t <= 7.0 * kDay ? 0.4 : 0.0; };
  std::function<double(double)> u_o_fn = [](double) { return 0.4; };
  std::function<double(double)> r_T_fn = default_r_T;  // truth side only

  // CO2 range over which g is probed to derive its bounds; must cover the
  // measured signal including noise.
  double C_probe_lo = -0.2;
  double C_probe_hi = 0.2;
  double t_probe_end = 14.0 * kDay;
  double g_margin = 0.05;  // relative widening of the probed g range
};

inline Vec known_input(const LarvaeParams& p, double t) {
  Vec u(static_cast<Eigen::Index>(kInputDim));
  u << p.u_v_fn(t), p.u_o_fn(t), p.C_o_fn(t);
  return u;
}

inline void validate(const LarvaeParams& p, std::size_t n) {
  if (n < 2) throw DomainError("larvae system needs N >= 2");
  if (p.L.size() != n || p.T.size() != n) throw DomainError("L and T need one entry per unit");
  if (!(p.kappa >= 0.0)) throw DomainError("kappa must be nonnegative");
  for (double l : p.L)
    if (!(l > 0.0)) throw DomainError("larvae counts must be positive");
  if (!p.C_o_fn || !p.O_fn || !p.u_v_fn || !p.u_o_fn || !p.r_T_fn) throw DomainError("missing signal function");
  if (!(p.C_probe_hi > p.C_probe_lo)) throw DomainError("empty CO2 probe range");
}

namespace detail {

/// Coefficient of B_i in the C_i equation. The last unit carries the extra
/// crawl term kappa u_v alpha15 r_A.
inline double gain(const LarvaeParams& p, std::size_t i, std::size_t n, double C, double u_v, double t) {
  const double ra = r_A(p.O_fn(i, t), C);
  double g = p.L[i] * p.alpha15 * ra;
  if (i + 1 == n) g += p.kappa * u_v * p.alpha15 * ra;
  return g;
}

inline GainBounds probe_gain_bounds(const LarvaeParams& p, std::size_t i, std::size_t n) {
  constexpr int kC = 41;
  constexpr int kT = 97;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int a = 0; a < kT; ++a) {
    const double t = p.t_probe_end * a / (kT - 1);
    for (double uv : {0.0, p.u_v_fn(t)}) {
      for (int b = 0; b < kC; ++b) {
        const double C = p.C_probe_lo + (p.C_probe_hi - p.C_probe_lo) * b / (kC - 1);
        const double g = gain(p, i, n, C, uv, t);
        if (!(g > 0.0) || !std::isfinite(g)) {
          throw DomainError("g_" + std::to_string(i + 1) + " not positive at C = " + std::to_string(C) +
                            ", t = " + std::to_string(t));
        }
        lo = std::min(lo, g);
        hi = std::max(hi, g);
      }
    }
  }
  return {lo * (1.0 - p.g_margin), hi * (1.0 + p.g_margin)};
}

}  // namespace detail

/// Truth-side plant. The observer-facing part holds f_i1, g_i and f_i2 = 0;
/// the whole biomass rate goes into delta_i.
inline InterconnectedSystem build_larvae_system(const LarvaeParams& p, std::size_t n = 2) {
  validate(p, n);
  std::vector<SubsystemModel> subs;
  for (std::size_t i = 0; i < n; ++i) {
    SubsystemModel s;
    const auto ii = static_cast<Eigen::Index>(i);
    const double a7 = p.alpha7, a9 = p.alpha9;
    s.known.f1 = [=](const Vec& y, const Vec& u, std::span<const double>, double) {
      double exch = 0.0;
      if (i > 0) exch += y[ii - 1] - y[ii];
      if (i + 1 < n) exch += y[ii + 1] - y[ii];
      return a7 * u[kValve] * exch + a9 * u[kVent] * (u[kOutsideCO2] - y[ii]);
    };
    s.known.f2 = [](const Vec&, const Vec&, double) { return 0.0; };
    s.known.g = [p, i, n, ii](const Vec& y, const Vec& u, double t) {
      return detail::gain(p, i, n, y[ii], u[kValve], t);
    };
    s.known.g_bounds = detail::probe_gain_bounds(p, i, n);
    s.delta = [p, i, n, ii](const Vec& x, const Vec& u, const Vec&, double t) {
      const double C = x[2 * ii];
      const double B = x[2 * ii + 1];
      const double ra = r_A(p.O_fn(i, t), C);
      double d = p.alpha20 * p.alpha1 * (1.0 - p.alpha17) * ra * B * B +
                 p.alpha2 * p.alpha21 * ra * p.r_T_fn(p.T[i]) * B;
      if (i + 1 < n) d -= p.kappa * u[kValve] * B;
      if (i > 0) d += p.kappa * u[kValve] * x[2 * ii - 1];
      return d;
    };
    subs.push_back(std::move(s));
  }
  return InterconnectedSystem(std::move(subs), kInputDim);
}

/// Reference initial condition, in the order (C_1, C_2, B_1, B_2).
inline constexpr double kReferenceX0[4] = {7.37e-4, 6.9e-4, 3.69e-4, 3.45e-4};

/// Maps (C_1..C_N, B_1..B_N) to the flat layout (C_1, B_1, C_2, B_2, ...).
inline Vec flat_from_grouped(const Vec& grouped) {
  const Eigen::Index n = grouped.size() / 2;
  Vec x(grouped.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    x[2 * i] = grouped[i];
    x[2 * i + 1] = grouped[n + i];
  }
  return x;
}

inline ObserverGains reference_gains() {
  ObserverGains g;
  g.sub.push_back({1.1, 3.0, 0.1, {0.03, 1.0}});
  g.sub.push_back({1.1, 3.0, 0.5, {0.01, 1.0}});
  return g;
}

inline NoiseModel reference_noise() { return NoiseModel::sinusoidal({0.03, 0.1}, 1.0); }

struct CaseConfig {
  LarvaeParams params;
  ObserverGains gains;
  SimConfig sim;
};

/// Two-unit reproduction setup: 14 days at dt = 10 s, estimate started at 5x the truth.
inline CaseConfig reference_config(bool noisy = false) {
  CaseConfig c;
  c.gains = reference_gains();
  c.sim.t0 = 0.0;
  c.sim.t_end = 14.0 * kDay;
  c.sim.dt = 10.0;
  c.sim.x0 = flat_from_grouped(Vec::Map(kReferenceX0, 4));
  c.sim.xhat0 = 5.0 * c.sim.x0;
  c.sim.method = Method::Euler;
  c.sim.record_stride = 6;
  LarvaeParams p = c.params;
  c.sim.known_input = [p](double t) { return known_input(p, t); };
  if (noisy) c.sim.noise = reference_noise();
  return c;
}

}  // namespace gsto::larvae
