#pragma once

// Small reference systems used by the tests and the CLI.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "gsto/observer.hpp"
#include "gsto/simulator.hpp"
#include "gsto/system_model.hpp"

namespace gsto::bench {

struct Benchmark {
  InterconnectedSystem system;
  ObserverGains gains;
  SimConfig sim;
};

// ---------------------------------------------------------------------------
// Linear two-unit cascade: every drift is zero except f_21 = x_12, and g = 1.
//
//   x11' = x12          x12' = w1
//   x21' = x12 + x22    x22' = w2

inline InterconnectedSystem linear_system(bool perturbed = false) {
  std::vector<SubsystemModel> subs(2);
  subs[0].known.f1 = [](const Vec&, const Vec&, std::span<const double>, double) { return 0.0; };
  subs[1].known.f1 = [](const Vec&, const Vec&, std::span<const double> up, double) { return up[0]; };
  for (std::size_t i = 0; i < 2; ++i) {
    subs[i].known.f2 = [](const Vec&, const Vec&, double) { return 0.0; };
    subs[i].known.g = [](const Vec&, const Vec&, double) { return 1.0; };
    subs[i].known.g_bounds = {1.0, 1.0};
    if (perturbed) {
      subs[i].delta = [i](const Vec&, const Vec&, const Vec& w, double) { return w[static_cast<Eigen::Index>(i)]; };
    }
  }
  return InterconnectedSystem(std::move(subs), 0);
}

inline Benchmark linear_benchmark(double t_end = 20.0, double dt = 1e-3) {
  ObserverGains g;
  g.sub.assign(2, SubsystemGains{2.0, 1.0, 4.0, {1.0, 1.0}});
  SimConfig s;
  s.t_end = t_end;
  s.dt = dt;
  s.x0 = Vec(4);
  s.x0 << 1.0, -0.5, 0.8, 0.3;
  s.xhat0 = Vec::Zero(4);
  return {linear_system(false), g, s};
}

// ---------------------------------------------------------------------------
// Synthetic two-unit benchmark with bounded, non-vanishing perturbations
//
//   delta_i(t) = 0.5 sin(t + a_i) + 0.3 sign(sin(3t + b_i))
//
// and time/output-varying gains g_i in [0.5, 2]. The operating point sits at
// `scale` in every state so that the relative-error tolerance is well above
// the Euler chatter floor.

struct SyntheticParams {
  double scale = 1e4;
  std::uint64_t seed = 0;  // 0 keeps all phases at zero
  double gamma = 6.0;
  double l1 = 2.0;
  double l2 = 1.0;
  MuPair mu{1.0, 1.0};
  double t_end = 200.0;
  double dt = 1e-3;
};

struct Phases {
  std::vector<double> sine;
  std::vector<double> square;
};

inline Phases synthetic_phases(std::uint64_t seed, std::size_t n = 2) {
  Phases p{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (seed == 0) return p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    p.sine[i] = u(rng);
    p.square[i] = u(rng);
  }
  return p;
}

inline double square_sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

inline std::function<Vec(double)> synthetic_disturbance(const Phases& ph) {
  return [ph](double t) {
    Vec w(static_cast<Eigen::Index>(ph.sine.size()));
    for (std::size_t i = 0; i < ph.sine.size(); ++i) {
      w[static_cast<Eigen::Index>(i)] = 0.5 * std::sin(t + ph.sine[i]) + 0.3 * square_sign(std::sin(3.0 * t + ph.square[i]));
    }
    return w;
  };
}

inline InterconnectedSystem synthetic_system(double scale, bool perturbed = true) {
  const double S = scale;
  std::vector<SubsystemModel> subs(2);
  subs[0].known.f1 = [S](const Vec& y, const Vec&, std::span<const double>, double) { return -0.5 * (y[0] - S); };
  subs[0].known.f2 = [S](const Vec& x, const Vec&, double) { return -0.05 * (x[1] - S); };
  subs[0].known.g = [](const Vec&, const Vec&, double t) { return 1.25 + 0.75 * std::sin(0.5 * t); };
  subs[1].known.f1 = [S](const Vec& y, const Vec&, std::span<const double> up, double) {
    return up[0] - 0.5 * (y[1] - S);
  };
  subs[1].known.f2 = [S](const Vec& x, const Vec&, double) { return -0.05 * (x[3] - S) + 0.02 * (x[1] - S); };
  subs[1].known.g = [S](const Vec& y, const Vec&, double t) { return 1.25 + 0.75 * std::sin(0.3 * t + y[0] / S); };
  for (std::size_t i = 0; i < 2; ++i) {
    subs[i].known.g_bounds = {0.5, 2.0};
    if (perturbed) {
      subs[i].delta = [i](const Vec&, const Vec&, const Vec& w, double) { return w[static_cast<Eigen::Index>(i)]; };
    }
  }
  return InterconnectedSystem(std::move(subs), 0);
}

inline Benchmark synthetic_benchmark(const SyntheticParams& p = {}, bool perturbed = true) {
  ObserverGains g;
  g.sub.assign(2, SubsystemGains{p.l1, p.l2, p.gamma, p.mu});
  SimConfig s;
  s.t_end = p.t_end;
  s.dt = p.dt;
  s.x0 = Vec::Constant(4, p.scale);
  s.xhat0 = 1.5 * s.x0;
  if (perturbed) s.unknown_input = synthetic_disturbance(synthetic_phases(p.seed));
  return {synthetic_system(p.scale, perturbed), g, s};
}

}  // namespace gsto::bench
