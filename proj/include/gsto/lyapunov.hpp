#pragma once

// Quadratic certificates for the GSTO error dynamics, gain-feasibility
// coefficients, and an empirical fit of the interconnection constants.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsto/errors.hpp"
#include "gsto/observer.hpp"
#include "gsto/simulator.hpp"
#include "gsto/sta_core.hpp"
#include "gsto/system_model.hpp"

namespace gsto {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

inline Mat2 observer_matrix(double l1, double l2) {
  Mat2 a;
  a << -l1, 1.0, -l2, 0.0;
  return a;
}

/// (A0 - L C0)^T P + P (A0 - L C0) + Q, Frobenius norm.
inline double ale_residual(double l1, double l2, const Mat2& P, const Mat2& Q) {
  const Mat2 a = observer_matrix(l1, l2);
  return (a.transpose() * P + P * a + Q).norm();
}

/// Solves (A0 - L C0)^T P + P (A0 - L C0) = -Q for symmetric P.
inline Mat2 solve_ale_2x2(double l1, double l2, const Mat2& Q = Mat2::Identity()) {
  if (!std::isfinite(l1) || !std::isfinite(l2) || !(l1 > 0.0) || !(l2 > 0.0)) {
    throw InfeasibleError("A0 - L C0 is not Hurwitz: need l1 > 0 and l2 > 0 (got " + std::to_string(l1) + ", " +
                          std::to_string(l2) + ")");
  }
  if (!Q.allFinite() || std::abs(Q(0, 1) - Q(1, 0)) > 1e-14 * std::max(1.0, Q.norm())) {
    throw DomainError("Q must be finite and symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat2> qe(Q);
  if (!(qe.eigenvalues().minCoeff() > 0.0)) throw DomainError("Q must be positive definite");

  // Unknowns (p11, p12, p22); rows are the (1,1), (1,2), (2,2) entries.
  Eigen::Matrix3d m;
  m << -2.0 * l1, -2.0 * l2, 0.0,  //
      1.0, -l1, -l2,               //
      0.0, 2.0, 0.0;
  const Eigen::Vector3d rhs(-Q(0, 0), -Q(0, 1), -Q(1, 1));
  Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
  if (!lu.isInvertible()) throw NumericError("ALE linear system is singular", 0);
  const Eigen::Vector3d p = lu.solve(rhs);
  Mat2 P;
  P << p[0], p[1], p[1], p[2];
  if (!P.allFinite()) throw NumericError("ALE solution is not finite", 0);
  return P;
}

struct LyapunovCertificate {
  double l1 = 0.0;
  double l2 = 0.0;
  Mat2 Q = Mat2::Identity();
  Mat2 P = Mat2::Identity();
  double lambda_min_Q = 1.0;
  double lambda_max_P = 1.0;
  double lambda_min_P = 1.0;

  double residual() const { return ale_residual(l1, l2, P, Q); }
};

inline LyapunovCertificate make_certificate(double l1, double l2, const Mat2& Q = Mat2::Identity()) {
  LyapunovCertificate c;
  c.l1 = l1;
  c.l2 = l2;
  c.Q = Q;
  c.P = solve_ale_2x2(l1, l2, Q);
  const Eigen::Vector2d eq = Eigen::SelfAdjointEigenSolver<Mat2>(Q).eigenvalues();
  const Eigen::Vector2d ep = Eigen::SelfAdjointEigenSolver<Mat2>(c.P).eigenvalues();
  c.lambda_min_Q = eq.minCoeff();
  c.lambda_min_P = ep.minCoeff();
  c.lambda_max_P = ep.maxCoeff();
  if (!(c.lambda_min_P > 0.0)) throw InfeasibleError("ALE solution is not positive definite");
  return c;
}

inline std::vector<LyapunovCertificate> make_certificates(const ObserverGains& gains,
                                                          std::span<const Mat2> Q = {}) {
  std::vector<LyapunovCertificate> out;
  out.reserve(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const Mat2 q = i < Q.size() ? Q[i] : Mat2::Identity();
    out.push_back(make_certificate(gains.sub[i].l1, gains.sub[i].l2, q));
  }
  return out;
}

struct SpectrumCheck {
  std::vector<std::complex<double>> base;    // eig(A0 - L C0)
  std::vector<std::complex<double>> scaled;  // eig(A0 - Gamma L C0)
  double max_relative_error = 0.0;
  bool ok = false;
};

namespace detail {
inline std::vector<std::complex<double>> sorted_eigs(const Mat2& a) {
  Eigen::EigenSolver<Mat2> es(a, false);
  std::vector<std::complex<double>> v{es.eigenvalues()[0], es.eigenvalues()[1]};
  std::sort(v.begin(), v.end(), [](const auto& p, const auto& q) {
    return p.real() != q.real() ? p.real() < q.real() : p.imag() < q.imag();
  });
  return v;
}
}  // namespace detail

/// Checks eig(A0 - Gamma L C0) = gamma * eig(A0 - L C0), Gamma = diag(gamma, gamma^2).
inline SpectrumCheck eigenvalue_scaling_check(double l1, double l2, double gamma, double rel_tol = 1e-10) {
  if (!(l1 > 0.0) || !(l2 > 0.0) || !(gamma > 0.0)) throw DomainError("need l1, l2, gamma > 0");
  SpectrumCheck r;
  r.base = detail::sorted_eigs(observer_matrix(l1, l2));
  r.scaled = detail::sorted_eigs(observer_matrix(gamma * l1, gamma * gamma * l2));
  for (std::size_t k = 0; k < 2; ++k) {
    const auto expect = gamma * r.base[k];
    const double err = std::abs(r.scaled[k] - expect) / std::max(std::abs(expect), 1e-300);
    r.max_relative_error = std::max(r.max_relative_error, err);
  }
  r.ok = r.max_relative_error <= rel_tol;
  return r;
}

/// epsilon = (phi1(e1), e2).
inline Vec2 epsilon_vec(const Vec2& e, const MuPair& mu) { return {phi1(e[0], mu), e[1]}; }

/// xi = (eps1, eps2 / gamma).
inline Vec2 xi_vec(const Vec2& eps, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("xi_vec: gamma must be positive");
  return {eps[0], eps[1] / gamma};
}

inline Vec2 epsilon_from_xi(const Vec2& xi, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("epsilon_from_xi: gamma must be positive");
  return {xi[0], xi[1] * gamma};
}

inline double lyap_value(const LyapunovCertificate& c, const Vec2& xi) { return xi.dot(c.P * xi); }

inline double lyap_total(std::span<const LyapunovCertificate> certs, std::span<const Vec2> xi) {
  if (certs.size() != xi.size()) throw DomainError("lyap_total: size mismatch");
  double v = 0.0;
  for (std::size_t i = 0; i < certs.size(); ++i) v += lyap_value(certs[i], xi[i]);
  return v;
}

/// xi_i for every subsystem from a flat error vector.
inline std::vector<Vec2> xi_from_error(const Vec& e, const ObserverGains& gains) {
  std::vector<Vec2> out(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(2 * i);
    out[i] = xi_vec(epsilon_vec(Vec2(e[k], e[k + 1]), gains.sub[i].mu), gains.sub[i].gamma);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interconnection constants

struct InterconnectionBounds {
  double alpha0 = 0.0;
  Vec alpha0_sub;  // per-subsystem constant terms; alpha0 is their maximum
  Mat alpha, beta, alpha_tilde, beta_tilde;

  static InterconnectionBounds zero(std::size_t n) {
    const auto N = static_cast<Eigen::Index>(n);
    return {0.0, Vec::Zero(N), Mat::Zero(N, N), Mat::Zero(N, N), Mat::Zero(N, N), Mat::Zero(N, N)};
  }
  std::size_t size() const noexcept { return static_cast<std::size_t>(alpha.rows()); }
};

namespace detail {

/// Lawson-Hanson nonnegative least squares: min ||A x - b||, x >= 0.
inline Vec nnls(const Mat& A, const Vec& b, int max_iter = 0) {
  const Eigen::Index n = A.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 10);
  Vec x = Vec::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff());

  auto solve_passive = [&](Vec& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    z = Vec::Zero(n);
    if (idx.empty()) return;
    Mat sub(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
    const Vec zs = sub.colPivHouseholderQr().solve(b);
    for (std::size_t c = 0; c < idx.size(); ++c) z[idx[c]] = zs[static_cast<Eigen::Index>(c)];
  };

  for (int outer = 0; outer < max_iter; ++outer) {
    const Vec w = A.transpose() * (b - A * x);
    Eigen::Index jmax = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
        wmax = w[j];
        jmax = j;
      }
    }
    if (jmax < 0) break;
    passive[static_cast<std::size_t>(jmax)] = true;
    Vec z;
    for (int inner = 0; inner < max_iter; ++inner) {
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) feasible = false;
      if (feasible) break;
      double step = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) step = std::min(step, x[j] / (x[j] - z[j]));
      }
      x += step * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
    x = z.cwiseMax(0.0);
  }
  return x;
}

/// Smallest-ish nonnegative theta with |target_t| <= theta . feature_t for every row.
/// An NNLS fit fixes the shape of theta; it is then scaled up until it covers every sample.
inline Vec fit_envelope(const Mat& features, const Vec& target) {
  const Eigen::Index rows = features.rows();
  const Eigen::Index cols = features.cols();
  if (cols == 0) return Vec();

  Mat a(rows, cols);
  Vec b(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    const double s = features.row(t).cwiseAbs().maxCoeff();
    const double k = s > 0.0 ? 1.0 / s : 0.0;
    a.row(t) = features.row(t) * k;
    b[t] = target[t] * k;
  }
  Vec theta = b.cwiseAbs().maxCoeff() > 0.0 ? nnls(a, b) : Vec::Zero(cols);

  double scale = 0.0;
  Vec extra = Vec::Zero(cols);
  for (Eigen::Index t = 0; t < rows; ++t) {
    const double r = target[t];
    if (r <= 0.0) continue;
    const double pred = theta.dot(features.row(t).transpose());
    if (pred > 0.0) {
      scale = std::max(scale, r / pred);
    } else {
      // Shape gives nothing here: split |rho| over the active terms by magnitude.
      const double sum = features.row(t).sum();
      if (sum <= 0.0) continue;
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (features(t, j) > 0.0) extra[j] = std::max(extra[j], r / sum);
      }
    }
  }
  return (theta * scale + extra) * (1.0 + 1e-9);
}

struct ResidualSamples {
  Mat e_abs;  // samples x 2N, |e| in flat layout
  Mat rho1;   // samples x N, |rho_i1|
  Mat rho2;   // samples x N, |rho_i2|
};

inline ResidualSamples residual_samples(const Trajectory& tr, const InterconnectedSystem& sys) {
  const auto S = static_cast<Eigen::Index>(tr.samples());
  const auto N = static_cast<Eigen::Index>(sys.size());
  ResidualSamples r{(tr.xhat - tr.x).cwiseAbs(), Mat(S, N), Mat(S, N)};
  for (Eigen::Index k = 0; k < S; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const auto rho = interconnection_residuals(sys, tr.x_at(kk), tr.xhat_at(kk), tr.u_at(kk), tr.w_at(kk), tr.times[kk]);
    r.rho1.row(k) = rho.rho1.cwiseAbs().transpose();
    r.rho2.row(k) = rho.rho2.cwiseAbs().transpose();
  }
  return r;
}

}  // namespace detail

inline constexpr std::size_t kMinBoundSamples = 10;

/// Fits nonnegative constants satisfying
///   |rho_i1| <= sum_j at_ij |e_j1| + bt_ij |e_j2|           (j < i only)
///   |rho_i2| <= alpha0 + sum_j a_ij |e_j1| + b_ij |e_j2|
/// at every sample of the trajectory.
inline InterconnectionBounds estimate_interconnection_bounds(const Trajectory& tr, const InterconnectedSystem& sys) {
  if (tr.samples() < kMinBoundSamples) {
    throw InsufficientDataError("bound estimation needs at least " + std::to_string(kMinBoundSamples) +
                                " samples, got " + std::to_string(tr.samples()));
  }
  if (static_cast<std::size_t>(tr.x.cols()) != sys.state_dim()) throw DomainError("trajectory/system mismatch");
  const std::size_t n = sys.size();
  const auto N = static_cast<Eigen::Index>(n);
  const auto S = static_cast<Eigen::Index>(tr.samples());
  const auto rs = detail::residual_samples(tr, sys);
  auto b = InterconnectionBounds::zero(n);

  for (Eigen::Index i = 0; i < N; ++i) {
    // second channel: [1, |e_11|..|e_N1|, |e_12|..|e_N2|]
    Mat f2(S, 1 + 2 * N);
    f2.col(0).setOnes();
    for (Eigen::Index j = 0; j < N; ++j) {
      f2.col(1 + j) = rs.e_abs.col(2 * j);
      f2.col(1 + N + j) = rs.e_abs.col(2 * j + 1);
    }
    const Vec th2 = detail::fit_envelope(f2, rs.rho2.col(i));
    b.alpha0_sub[i] = th2[0];
    for (Eigen::Index j = 0; j < N; ++j) {
      b.alpha(i, j) = th2[1 + j];
      b.beta(i, j) = th2[1 + N + j];
    }
    // first channel: upstream errors only
    if (i == 0) continue;
    Mat f1(S, 2 * i);
    for (Eigen::Index j = 0; j < i; ++j) {
      f1.col(j) = rs.e_abs.col(2 * j);
      f1.col(i + j) = rs.e_abs.col(2 * j + 1);
    }
    const Vec th1 = detail::fit_envelope(f1, rs.rho1.col(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      b.alpha_tilde(i, j) = th1[j];
      b.beta_tilde(i, j) = th1[i + j];
    }
  }
  b.alpha0 = N > 0 ? b.alpha0_sub.maxCoeff() : 0.0;
  return b;
}

struct BoundCheck {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_excess = 0.0;  // max of |rho| - bound, <= 0 when all hold
  bool cascade_zero = true;
};

/// Re-evaluates the bound inequalities at every sample of `tr`.
inline BoundCheck check_bounds(const InterconnectionBounds& b, const Trajectory& tr, const InterconnectedSystem& sys,
                               double rel_tol = 1e-12) {
  const auto rs = detail::residual_samples(tr, sys);
  const auto N = static_cast<Eigen::Index>(sys.size());
  BoundCheck c;
  c.samples = tr.samples();
  c.worst_excess = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = i; j < N; ++j)
      if (b.alpha_tilde(i, j) != 0.0 || b.beta_tilde(i, j) != 0.0) c.cascade_zero = false;

  for (Eigen::Index k = 0; k < rs.e_abs.rows(); ++k) {
    bool bad = false;
    for (Eigen::Index i = 0; i < N; ++i) {
      double bound1 = 0.0;
      double bound2 = b.alpha0;
      for (Eigen::Index j = 0; j < N; ++j) {
        bound1 += b.alpha_tilde(i, j) * rs.e_abs(k, 2 * j) + b.beta_tilde(i, j) * rs.e_abs(k, 2 * j + 1);
        bound2 += b.alpha(i, j) * rs.e_abs(k, 2 * j) + b.beta(i, j) * rs.e_abs(k, 2 * j + 1);
      }
      const double x1 = rs.rho1(k, i) - bound1;
      const double x2 = rs.rho2(k, i) - bound2;
      c.worst_excess = std::max({c.worst_excess, x1, x2});
      if (x1 > rel_tol * std::max(1.0, rs.rho1(k, i)) || x2 > rel_tol * std::max(1.0, rs.rho2(k, i))) bad = true;
    }
    c.violations += bad ? 1 : 0;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Gain feasibility

inline constexpr double kDefaultEta = 0.5;

struct FeasibilityOptions {
  double eta = kDefaultEta;
  double gamma_lo = 1e-3;
  double gamma_hi = 1e6;
  int bisection_iters = 60;
  std::vector<double> grid;  // empty = 25 log-spaced points over [gamma_lo, gamma_hi]
};

struct SubsystemFeasibility {
  double gamma = 0.0;
  double c = 0.0;        // coefficient of ||xi_i||
  double c_tilde = 0.0;  // curly-bracket coefficient of ||xi_i||^2
  bool c_positive = false;
  bool c_tilde_positive = false;
};

struct GridPoint {
  double gamma = 0.0;
  bool feasible = false;
  std::vector<double> c;
};

struct FeasibilityReport {
  double eta = kDefaultEta;
  std::vector<SubsystemFeasibility> sub;  // evaluated at the configured gammas
  bool feasible = false;
  std::optional<double> gamma_min;  // common gamma, bisection
  std::vector<GridPoint> grid;
  bool grid_monotone = true;
  Mat omega_radius;  // r_ij: ||xi_i|| >= sum_{j != i} r_ij ||xi_j|| defines Omega
};

namespace detail {
inline double ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}
}  // namespace detail

/// c_i(gamma): coefficient of ||xi_i|| in the decrease inequality.
inline double coefficient_c(const LyapunovCertificate& cert, double g_min, const MuPair& mu, double alpha0,
                            double gamma, double eta) {
  return 0.5 * gamma * eta * g_min * cert.lambda_min_Q * mu.mu1 * mu.mu1 -
         2.0 * cert.lambda_max_P * alpha0 / gamma;
}

/// c~_i(gamma): bracketed coefficient of ||xi_i||^2, implemented exactly as displayed.
inline double coefficient_c_tilde(std::span<const LyapunovCertificate> certs, std::span<const double> g_min,
                                  std::span<const MuPair> mu, const InterconnectionBounds& b, std::size_t i,
                                  double gamma, double eta) {
  const auto I = static_cast<Eigen::Index>(i);
  const double g2 = gamma * gamma;
  double cross = 0.0;
  for (std::size_t j = 0; j < certs.size(); ++j) {
    const auto J = static_cast<Eigen::Index>(j);
    cross += certs[i].lambda_max_P / g2 * (detail::ratio(b.alpha(I, J), mu[j].mu2) + b.beta(I, J) * gamma);
    cross += certs[j].lambda_max_P / g2 * (detail::ratio(b.alpha(I, I), mu[i].mu2) + b.beta(I, I) * gamma);
  }
  return eta * g_min[i] * certs[i].lambda_min_Q * mu[i].mu2 - cross;
}

inline FeasibilityReport gain_feasibility(std::span<const LyapunovCertificate> certs, const InterconnectionBounds& b,
                                          const ObserverGains& gains, std::span<const double> g_min,
                                          const FeasibilityOptions& opt = {}) {
  const std::size_t n = gains.size();
  if (certs.size() != n || g_min.size() != n || b.size() != n) throw DomainError("gain_feasibility: size mismatch");
  if (!(opt.eta > 0.0 && opt.eta < 1.0)) throw DomainError("eta must lie in (0, 1)");
  std::vector<MuPair> mu;
  for (const auto& s : gains.sub) mu.push_back(s.mu);

  auto eval = [&](std::size_t i, double gamma) {
    SubsystemFeasibility s;
    s.gamma = gamma;
    s.c = coefficient_c(certs[i], g_min[i], mu[i], b.alpha0, gamma, opt.eta);
    s.c_tilde = coefficient_c_tilde(certs, g_min, mu, b, i, gamma, opt.eta);
    // With no perturbation constant the linear term may vanish without harm.
    s.c_positive = s.c > 0.0 || (b.alpha0 == 0.0 && s.c == 0.0);
    s.c_tilde_positive = s.c_tilde > 0.0;
    return s;
  };
  auto feasible_common = [&](double gamma) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = eval(i, gamma);
      if (!s.c_positive || !s.c_tilde_positive) return false;
    }
    return true;
  };

  FeasibilityReport r;
  r.eta = opt.eta;
  r.feasible = true;
  for (std::size_t i = 0; i < n; ++i) {
    r.sub.push_back(eval(i, gains.sub[i].gamma));
    r.feasible = r.feasible && r.sub.back().c_positive && r.sub.back().c_tilde_positive;
  }

  if (feasible_common(opt.gamma_lo)) {
    r.gamma_min = opt.gamma_lo;
  } else if (feasible_common(opt.gamma_hi)) {
    double lo = opt.gamma_lo, hi = opt.gamma_hi;
    for (int k = 0; k < opt.bisection_iters; ++k) {
      const double mid = std::sqrt(lo * hi);  // geometric midpoint over the wide bracket
      (feasible_common(mid) ? hi : lo) = mid;
    }
    r.gamma_min = hi;
  }

  std::vector<double> grid = opt.grid;
  if (grid.empty()) {
    constexpr int kPts = 25;
    for (int k = 0; k < kPts; ++k) {
      grid.push_back(opt.gamma_lo * std::pow(opt.gamma_hi / opt.gamma_lo, static_cast<double>(k) / (kPts - 1)));
    }
  }
  std::sort(grid.begin(), grid.end());
  bool seen_feasible = false;
  for (double g : grid) {
    GridPoint p{g, feasible_common(g), {}};
    for (std::size_t i = 0; i < n; ++i) p.c.push_back(eval(i, g).c);
    if (seen_feasible && !p.feasible) r.grid_monotone = false;
    seen_feasible = seen_feasible || p.feasible;
    r.grid.push_back(std::move(p));
  }

  const auto N = static_cast<Eigen::Index>(n);
  r.omega_radius = Mat::Zero(N, N);
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = gains.sub[i].gamma;
    const double lead = 2.0 * certs[i].lambda_max_P / ((1.0 - opt.eta) * g_min[i] * certs[i].lambda_min_Q) / gi;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto I = static_cast<Eigen::Index>(i);
      const auto J = static_cast<Eigen::Index>(j);
      r.omega_radius(I, J) =
          lead * (detail::ratio(b.alpha_tilde(I, J), mu[j].mu2) + b.beta_tilde(I, J) * gi);
    }
  }
  return r;
}

inline std::vector<double> lower_gain_bounds(const KnownModel& km) {
  std::vector<double> g;
  for (std::size_t i = 0; i < km.size(); ++i) g.push_back(km.subsystem(i).g_bounds.lo);
  return g;
}

/// Membership in Omega for given per-subsystem ||xi_i||.
inline bool in_omega(const Mat& radius, const Vec& xi_norm) {
  for (Eigen::Index i = 0; i < radius.rows(); ++i) {
    if (xi_norm[i] < radius.row(i).dot(xi_norm)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Decrease monitoring

struct DecreaseOptions {
  double eta = kDefaultEta;
  double abs_tol = 1e-9;
  double rel_tol = 1e-6;
};

struct DecreaseReport {
  std::vector<double> times;
  Vec V;          // total
  Mat V_sub;      // samples x N
  Mat xi_norm;    // samples x N
  std::vector<bool> in_omega;
  std::size_t steps_in_omega = 0;
  std::size_t violations = 0;
  std::vector<double> violation_times;
  double max_increase_in_omega = 0.0;

  double tol(double v, const DecreaseOptions& o) const { return o.abs_tol + o.rel_tol * v; }
};

/// V(t) along a trajectory (errors taken against the true state) with Omega flags.
/// A step k -> k+1 is a violation when sample k lies in Omega and V rises by more than tol_V.
inline DecreaseReport monitor_decrease(const Trajectory& tr, std::span<const LyapunovCertificate> certs,
                                       const ObserverGains& gains, const InterconnectionBounds& b,
                                       std::span<const double> g_min, const DecreaseOptions& opt = {}) {
  const std::size_t n = gains.size();
  if (certs.size() != n || g_min.size() != n) throw DomainError("monitor_decrease: size mismatch");
  FeasibilityOptions fo;
  fo.eta = opt.eta;
  fo.grid = {1.0};
  const Mat radius = gain_feasibility(certs, b, gains, g_min, fo).omega_radius;

  const auto S = static_cast<Eigen::Index>(tr.samples());
  const auto N = static_cast<Eigen::Index>(n);
  DecreaseReport r;
  r.times = tr.times;
  r.V = Vec::Zero(S);
  r.V_sub = Mat::Zero(S, N);
  r.xi_norm = Mat::Zero(S, N);
  r.in_omega.assign(static_cast<std::size_t>(S), false);
  const Mat e = tr.error();
  for (Eigen::Index k = 0; k < S; ++k) {
    const auto xi = xi_from_error(e.row(k).transpose(), gains);
    for (std::size_t i = 0; i < n; ++i) {
      const auto I = static_cast<Eigen::Index>(i);
      r.V_sub(k, I) = lyap_value(certs[i], xi[i]);
      r.xi_norm(k, I) = xi[i].norm();
    }
    r.V[k] = r.V_sub.row(k).sum();
    r.in_omega[static_cast<std::size_t>(k)] = in_omega(radius, r.xi_norm.row(k).transpose());
  }
  for (Eigen::Index k = 0; k + 1 < S; ++k) {
    if (!r.in_omega[static_cast<std::size_t>(k)]) continue;
    ++r.steps_in_omega;
    const double dv = r.V[k + 1] - r.V[k];
    r.max_increase_in_omega = std::max(r.max_increase_in_omega, dv);
    if (dv > r.tol(r.V[k], opt)) {
      ++r.violations;
      r.violation_times.push_back(tr.times[static_cast<std::size_t>(k)]);
    }
  }
  return r;
}

}  // namespace gsto
