#pragma once

// Fixed-step co-integration of a plant and an observer. The observer sees
// y_meas = C x + n(t), held constant over each step.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsto/errors.hpp"
#include "gsto/observer.hpp"
#include "gsto/system_model.hpp"

namespace gsto {

using Mat = Eigen::MatrixXd;

/// Additive measurement noise, one function of time per output channel.
struct NoiseModel {
  std::vector<std::function<double(double)>> channels;
  std::vector<double> bound;  // optional declared sup |n_i|; empty = only finiteness is probed

  static NoiseModel sinusoidal(std::vector<double> amplitudes, double frequency = 1.0, double phase = 0.0) {
    NoiseModel n;
    for (double a : amplitudes) {
      n.channels.emplace_back([a, frequency, phase](double t) { return a * std::sin(frequency * t + phase); });
      n.bound.push_back(std::abs(a));
    }
    return n;
  }
};

inline Vec apply_noise(const Vec& y, double t, const NoiseModel& noise) {
  if (static_cast<std::size_t>(y.size()) != noise.channels.size()) {
    throw DomainError("noise model has " + std::to_string(noise.channels.size()) + " channels, output has " +
                      std::to_string(y.size()));
  }
  Vec out = y;
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] += noise.channels[static_cast<std::size_t>(i)](t);
  return out;
}

enum class Method { Euler, RK4 };

struct SimConfig {
  double t0 = 0.0;
  double t_end = 1.0;
  double dt = 1e-3;
  Vec x0;
  Vec xhat0;
  Method method = Method::Euler;
  std::optional<NoiseModel> noise;
  std::function<Vec(double)> known_input;    // u(t); empty = zero vector of the system's input dim
  std::function<Vec(double)> unknown_input;  // w(t); truth side only, empty = zero
  std::size_t record_stride = 1;
  double divergence_limit = 1e12;
};

struct Trajectory {
  std::vector<double> times;
  Mat x;        // samples x 2N
  Mat xhat;     // samples x 2N
  Mat y_clean;  // samples x N
  Mat y_meas;   // samples x N
  Mat u;        // samples x m
  Mat w;        // samples x N

  std::size_t samples() const noexcept { return times.size(); }
  std::size_t subsystems() const noexcept { return static_cast<std::size_t>(y_clean.cols()); }
  Vec x_at(std::size_t k) const { return x.row(static_cast<Eigen::Index>(k)).transpose(); }
  Vec xhat_at(std::size_t k) const { return xhat.row(static_cast<Eigen::Index>(k)).transpose(); }
  Vec u_at(std::size_t k) const { return u.row(static_cast<Eigen::Index>(k)).transpose(); }
  Vec w_at(std::size_t k) const { return w.row(static_cast<Eigen::Index>(k)).transpose(); }
  Mat error() const { return xhat - x; }
};

/// Model failure during integration, stamped with the simulation time.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, double time)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

inline void validate(const SimConfig& cfg, std::size_t n, std::size_t m) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw DomainError("dt must be positive");
  if (!(cfg.t_end > cfg.t0)) throw DomainError("t_end must exceed t0");
  if (cfg.record_stride < 1) throw DomainError("record_stride must be >= 1");
  if (static_cast<std::size_t>(cfg.x0.size()) != 2 * n || static_cast<std::size_t>(cfg.xhat0.size()) != 2 * n) {
    throw DomainError("initial states must have dimension 2N = " + std::to_string(2 * n));
  }
  if (cfg.noise) {
    const auto& nm = *cfg.noise;
    if (nm.channels.size() != n) throw DomainError("noise model needs one channel per output");
    constexpr int kProbe = 1000;
    for (std::size_t i = 0; i < n; ++i) {
      for (int p = 0; p <= kProbe; ++p) {
        const double t = cfg.t0 + (cfg.t_end - cfg.t0) * p / kProbe;
        const double v = nm.channels[i](t);
        if (!std::isfinite(v) || (i < nm.bound.size() && std::abs(v) > nm.bound[i] * (1 + 1e-12))) {
          throw DomainError("noise channel " + std::to_string(i + 1) + " unbounded at t = " + std::to_string(t));
        }
      }
    }
  }
  (void)m;
}

namespace detail {

struct Sampler {
  const SimConfig& cfg;
  std::size_t n;
  std::size_t m;

  Vec u(double t) const {
    if (!cfg.known_input) return Vec::Zero(static_cast<Eigen::Index>(m));
    Vec v = cfg.known_input(t);
    if (static_cast<std::size_t>(v.size()) != m) throw DomainError("u(t) has wrong dimension");
    return v;
  }
  Vec w(double t) const {
    if (!cfg.unknown_input) return Vec::Zero(static_cast<Eigen::Index>(n));
    Vec v = cfg.unknown_input(t);
    if (static_cast<std::size_t>(v.size()) != n) throw DomainError("w(t) has wrong dimension");
    return v;
  }
  Vec y_meas(const Vec& y, double t) const { return cfg.noise ? apply_noise(y, t, *cfg.noise) : y; }
};

inline void check_divergence(const Vec& v, double limit, double t, const char* who) {
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v[k]) || std::abs(v[k]) > limit) {
      throw DivergenceError(std::string(who) + " state component " + std::to_string(k) + " diverged at t = " +
                                std::to_string(t),
                            t);
    }
  }
}

}  // namespace detail

/// Advances plant and observer together on a shared fixed grid.
/// Deterministic: identical inputs give bit-identical trajectories.
inline Trajectory integrate(const InterconnectedSystem& sys, const ObserverPlant& obs, const SimConfig& cfg) {
  const std::size_t n = sys.size();
  const std::size_t m = sys.input_dim();
  if (obs.size() != n) throw DomainError("observer and plant sizes differ");
  validate(cfg, n, m);

  const double span = cfg.t_end - cfg.t0;
  auto steps = static_cast<std::size_t>(std::ceil(span / cfg.dt - 1e-9));
  if (steps == 0) steps = 1;
  const std::size_t stride = cfg.record_stride;
  const std::size_t rows = steps / stride + 1 + (steps % stride ? 1 : 0);

  const auto N = static_cast<Eigen::Index>(n);
  Trajectory tr;
  tr.times.reserve(rows);
  tr.x.resize(static_cast<Eigen::Index>(rows), 2 * N);
  tr.xhat.resize(static_cast<Eigen::Index>(rows), 2 * N);
  tr.y_clean.resize(static_cast<Eigen::Index>(rows), N);
  tr.y_meas.resize(static_cast<Eigen::Index>(rows), N);
  tr.u.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m));
  tr.w.resize(static_cast<Eigen::Index>(rows), N);

  detail::Sampler sample{cfg, n, m};
  auto record = [&](double t, const Vec& x, const Vec& xh) {
    const auto r = static_cast<Eigen::Index>(tr.times.size());
    const Vec y = measured(x);
    tr.times.push_back(t);
    tr.x.row(r) = x.transpose();
    tr.xhat.row(r) = xh.transpose();
    tr.y_clean.row(r) = y.transpose();
    tr.y_meas.row(r) = sample.y_meas(y, t).transpose();
    tr.u.row(r) = sample.u(t).transpose();
    tr.w.row(r) = sample.w(t).transpose();
  };

  Vec x = cfg.x0;
  Vec xh = cfg.xhat0;
  double t = cfg.t0;
  record(t, x, xh);

  for (std::size_t k = 0; k < steps; ++k) {
    t = cfg.t0 + static_cast<double>(k) * cfg.dt;
    const double t_next = (k + 1 == steps) ? cfg.t_end : cfg.t0 + static_cast<double>(k + 1) * cfg.dt;
    const double h = t_next - t;
    try {
      const Vec ym = sample.y_meas(measured(x), t);
      if (cfg.method == Method::Euler) {
        const Vec dx = eval_plant_rhs(sys, x, sample.u(t), sample.w(t), t);
        const Vec dxh = eval_observer_rhs(obs, xh, ym, sample.u(t), t);
        x += h * dx;
        xh += h * dxh;
      } else {
        auto stage = [&](const Vec& xs, const Vec& xhs, double ts, Vec& kx, Vec& kxh) {
          const Vec us = sample.u(ts);
          kx = eval_plant_rhs(sys, xs, us, sample.w(ts), ts);
          kxh = eval_observer_rhs(obs, xhs, ym, us, ts);
        };
        Vec k1, k2, k3, k4, l1, l2, l3, l4;
        stage(x, xh, t, k1, l1);
        stage(x + 0.5 * h * k1, xh + 0.5 * h * l1, t + 0.5 * h, k2, l2);
        stage(x + 0.5 * h * k2, xh + 0.5 * h * l2, t + 0.5 * h, k3, l3);
        stage(x + h * k3, xh + h * l3, t + h, k4, l4);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        xh += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
      }
    } catch (const NumericError& e) {
      throw DivergenceError(std::string(e.what()) + " at t = " + std::to_string(t), t);
    } catch (const DivergenceError&) {
      throw;
    } catch (const Error& e) {
      throw SimulationError(e.what(), t);
    }
    detail::check_divergence(x, cfg.divergence_limit, t_next, "plant");
    detail::check_divergence(xh, cfg.divergence_limit, t_next, "observer");
    if ((k + 1) % stride == 0 || k + 1 == steps) record(t_next, x, xh);
  }
  return tr;
}

inline constexpr double kRelativeErrorGuard = 1e-12;

/// |xhat - x| / max(|x|, 1e-12), per sample and state component.
inline Mat relative_error(const Trajectory& tr) {
  if (tr.samples() == 0) throw DomainError("relative_error: empty trajectory");
  return (tr.xhat - tr.x).cwiseAbs().cwiseQuotient(tr.x.cwiseAbs().cwiseMax(kRelativeErrorGuard));
}

/// Row-wise maximum of the relative error.
inline Vec max_relative_error(const Trajectory& tr) { return relative_error(tr).rowwise().maxCoeff(); }

namespace detail {
inline std::optional<double> first_settled(const std::vector<double>& times, const Vec& err, double tol,
                                           std::optional<double> hold) {
  const std::size_t n = times.size();
  // next_bad[k]: first index >= k whose error exceeds tol (n if none).
  std::vector<std::size_t> next_bad(n + 1, n);
  for (std::size_t k = n; k-- > 0;) {
    next_bad[k] = err[static_cast<Eigen::Index>(k)] > tol ? k : next_bad[k + 1];
  }
  const double t_last = times.back();
  for (std::size_t k = 0; k < n; ++k) {
    if (hold && times[k] + *hold > t_last * (1 + 1e-15) + 1e-15) break;
    const std::size_t b = next_bad[k];
    if (b == k) continue;
    if (b == n) return times[k];
    if (hold && times[b] > times[k] + *hold) return times[k];
  }
  return std::nullopt;
}
}  // namespace detail

/// Earliest sample time t with max relative error <= tol on every sample in [t, t + hold].
inline std::optional<double> convergence_time(const Trajectory& tr, double tol, double hold) {
  if (!(tol > 0.0)) throw DomainError("convergence_time: tol must be positive");
  if (tr.samples() == 0) throw DomainError("convergence_time: empty trajectory");
  if (hold < 0.0 || hold > tr.times.back() - tr.times.front()) {
    throw DomainError("convergence_time: hold exceeds the recorded horizon");
  }
  return detail::first_settled(tr.times, max_relative_error(tr), tol, hold);
}

/// Earliest sample time after which the max relative error stays <= tol until the end.
inline std::optional<double> settling_time(const Trajectory& tr, double tol) {
  if (!(tol > 0.0)) throw DomainError("settling_time: tol must be positive");
  if (tr.samples() == 0) throw DomainError("settling_time: empty trajectory");
  return detail::first_settled(tr.times, max_relative_error(tr), tol, std::nullopt);
}

}  // namespace gsto
