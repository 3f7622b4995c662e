// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "gsto/benchmarks.hpp"
#include "gsto/casestudy.hpp"
#include "gsto/io/commands.hpp"
#include "gsto/io/csv.hpp"
#include "gsto/lyapunov.hpp"
#include "gsto/sta_core.hpp"

namespace fs = std::filesystem;
using namespace gsto;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

fs::path config_dir() {
  const char* d = std::getenv("GSTO_CONFIG_DIR");
  return d ? fs::path(d) : fs::path(GSTO_SOURCE_DIR) / "configs";
}

// ---------------------------------------------------------------------------

Outcome phi_identities() {
  Outcome o;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ex(-12.0, 6.0), half(0.0, 1.0), m(0.0, 5.0);
  auto z = [&] {
    const double v = std::pow(10.0, ex(rng));
    return half(rng) < 0.5 ? -v : v;
  };
  std::size_t bad_id = 0, bad_odd = 0, bad_mono = 0, bad_chain = 0;
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double a = z();
    const MuPair mu{m(rng) + 1e-3, m(rng)};
    const double p2 = phi2(a, mu);
    const double err = std::abs(p2 - phi1_prime(a, mu) * phi1(a, mu)) / (1.0 + std::abs(p2));
    worst = std::max(worst, err);
    bad_id += err > 1e-12;
    bad_odd += phi1(-a, mu) != -phi1(a, mu);
    const double b = z();
    if (a != b) bad_mono += (a < b) != (phi1(a, mu) < phi1(b, mu));
    // |e1|^(1/2) <= ||xi|| / mu1 <= V^(1/2) / (mu1 lambda_min(P)^(1/2))
    const double l1 = 10.0 * half(rng) + 1e-3, l2 = 10.0 * half(rng) + 1e-3, gamma = 0.1 + 10.0 * half(rng);
    const auto cert = make_certificate(l1, l2);
    const Vec2 xi = xi_vec(epsilon_vec(Vec2(a, b), mu), gamma);
    const double s = std::sqrt(std::abs(a));
    const double n = xi.norm() / mu.mu1;
    const double v = std::sqrt(lyap_value(cert, xi)) / (mu.mu1 * std::sqrt(cert.lambda_min_P));
    bad_chain += !(s <= n * (1 + 1e-12) && n <= v * (1 + 1e-12));
  }
  o.require(bad_id == 0, std::to_string(bad_id) + " identity failures");
  o.require(bad_odd == 0, std::to_string(bad_odd) + " symmetry failures");
  o.require(bad_mono == 0, std::to_string(bad_mono) + " monotonicity failures");
  o.require(bad_chain == 0, std::to_string(bad_chain) + " chain failures");
  o.note("worst identity error " + fmt(worst));
  return o;
}

Outcome ale_certificates() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 10.0), g(1e-2, 1e2);
  std::size_t bad = 0, bad_eig = 0;
  double worst_res = 0.0, worst_eig = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double l1 = 10.0 - u(rng), l2 = 10.0 - u(rng);  // (0, 10]
    const Mat2 Q = Mat2::Identity();
    const auto c = make_certificate(l1, l2, Q);
    const double res = c.residual();
    worst_res = std::max(worst_res, res / Q.norm());
    bad += !(c.lambda_min_P > 0.0) || c.P(0, 1) != c.P(1, 0) || res > 1e-10 * Q.norm();
    const auto s = eigenvalue_scaling_check(l1, l2, g(rng));
    worst_eig = std::max(worst_eig, s.max_relative_error);
    bad_eig += !s.ok;
  }
  o.require(bad == 0, std::to_string(bad) + " certificate failures");
  o.require(bad_eig == 0, std::to_string(bad_eig) + " scaling failures");
  o.note("worst residual " + fmt(worst_res) + ", worst scaling error " + fmt(worst_eig));
  return o;
}

Outcome observability_round_trip() {
  Outcome o;
  std::mt19937_64 rng(3);
  std::size_t bad = 0;
  double worst = 0.0;
  const auto lin = bench::linear_system();
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 1000; ++k) {
    Vec x(4);
    for (int c = 0; c < 4; ++c) x[c] = u(rng);
    const auto m = observability_map(lin, x, Vec(), 0.0);
    const Vec back = invert_observability(lin, m.y, m.ydot, Vec(), 0.0);
    const double e = (back - x).cwiseAbs().maxCoeff() / x.cwiseAbs().maxCoeff();
    worst = std::max(worst, e);
    bad += e > 1e-10;
  }
  const larvae::LarvaeParams p;
  const auto lar = larvae::build_larvae_system(p);
  std::uniform_real_distribution<double> c(1e-5, 5e-3), t(0.0, 14 * larvae::kDay);
  for (int k = 0; k < 1000; ++k) {
    Vec x(4);
    x << c(rng), c(rng), c(rng), c(rng);
    const double tt = t(rng);
    const Vec uu = larvae::known_input(p, tt);
    const auto m = observability_map(lar, x, uu, tt);
    const Vec back = invert_observability(lar, m.y, m.ydot, uu, tt);
    const double e = (back - x).cwiseAbs().cwiseQuotient(x.cwiseAbs()).maxCoeff();
    worst = std::max(worst, e);
    bad += e > 1e-10;
  }
  o.require(bad == 0, std::to_string(bad) + " round-trip failures");
  o.note("worst relative error " + fmt(worst));
  return o;
}

Outcome equilibrium_invariance() {
  Outcome o;
  auto check = [&](const std::string& name, const InterconnectedSystem& sys, const ObserverGains& g, SimConfig cfg) {
    cfg.xhat0 = cfg.x0;
    const auto tr = integrate(sys, make_observer(sys, g), cfg);
    const double e = tr.error().cwiseAbs().maxCoeff();
    o.require(e <= 1e-12, name + " max error " + fmt(e));
  };
  const auto s = bench::synthetic_benchmark({}, false);
  check("synthetic", s.system, s.gains, s.sim);
  const auto l = bench::linear_benchmark();
  check("linear", l.system, l.gains, l.sim);
  // Larvae with the unknown biomass dynamics switched off.
  auto c = larvae::reference_config();
  c.params.alpha1 = 0.0;
  c.params.alpha2 = 0.0;
  c.params.kappa = 0.0;
  check("larvae", larvae::build_larvae_system(c.params), c.gains, c.sim);
  if (o.pass) o.note("all errors exactly zero");
  return o;
}

// Shared by criteria 5 and 8: full-resolution synthetic run.
struct SyntheticRun {
  bench::Benchmark b;
  Trajectory tr;
  double wall = 0.0;
};

const SyntheticRun& synthetic_run() {
  static const SyntheticRun run = [] {
    SyntheticRun r{bench::synthetic_benchmark(), {}, 0.0};
    r.b.sim.record_stride = 1;
    const auto t0 = std::chrono::steady_clock::now();
    r.tr = integrate(r.b.system, make_observer(r.b.system, r.b.gains), r.b.sim);
    r.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }();
  return run;
}

Outcome finite_time_exactness() {
  Outcome o;
  // Gains come from the shipped config and must pass verify.
  const fs::path dir = fs::temp_directory_path() / ("gsto_acceptance_verify_" + std::to_string(::getpid()));
  std::ostringstream sink;
  io::CommandOptions opt{"verify", (config_dir() / "synthetic.json").string(), dir.string(), false, {}};
  const int code = io::run_command(opt, io::Logger(io::LogLevel::Error, sink));
  o.require(code == 0, "verify exit code " + std::to_string(code) + " " + sink.str());
  const auto e = io::load_experiment(opt.config_path);
  fs::remove_all(dir);

  const auto& r = synthetic_run();
  o.require(e.gains.sub[0].gamma == r.b.gains.sub[0].gamma && e.sim.t_end == 200.0 && e.sim.dt == 1e-3,
            "shipped config differs from the benchmark");
  const auto ts = settling_time(r.tr, 1e-4);
  o.require(ts.has_value() && *ts <= 100.0, "settling time " + (ts ? fmt(*ts) : std::string("none")));

  const auto obs = make_observer(r.b.system, r.b.gains);
  double worst = 0.0;
  for (std::size_t k = 0; k < r.tr.samples(); k += 97) {
    const Vec x = r.tr.x_at(k), xh = r.tr.xhat_at(k), w = r.tr.w_at(k);
    const double t = r.tr.times[k];
    const Vec de = eval_error_rhs(r.b.system, obs, x, xh, Vec(), w, t);
    const Vec dp = eval_plant_rhs(r.b.system, x, Vec(), w, t);
    const Vec dob = eval_observer_rhs(obs, xh, measured(x), Vec(), t);
    for (Eigen::Index c = 0; c < de.size(); ++c) {
      const double scale = std::max({1.0, std::abs(dob[c]), std::abs(dp[c])});
      worst = std::max(worst, std::abs(de[c] - (dob[c] - dp[c])) / scale);
    }
  }
  o.require(worst <= 1e-12, "error-rhs consistency " + fmt(worst));
  o.note("settles to 1e-4 at t = " + (ts ? fmt(*ts) : std::string("none")) + " s, final max rel err " +
         fmt(max_relative_error(r.tr).tail(1)[0]) + ", consistency " + fmt(worst));
  return o;
}

struct LarvaeRuns {
  Trajectory gsto_run, hgo_run;
};

LarvaeRuns larvae_runs(bool noisy, Outcome& o) {
  const auto c = larvae::reference_config(noisy);
  const auto sys = larvae::build_larvae_system(c.params);
  LarvaeRuns r;
  try {
    r.gsto_run = integrate(sys, make_observer(sys, c.gains), c.sim);
  } catch (const DivergenceError& e) {
    o.require(false, std::string("GSTO diverged: ") + e.what());
  }
  try {
    r.hgo_run = integrate(sys, make_observer(sys, c.gains.as_hgo()), c.sim);
  } catch (const DivergenceError& e) {
    o.require(false, std::string("HGO diverged: ") + e.what());
  }
  return r;
}

Outcome larvae_separation() {
  Outcome o;
  const auto r = larvae_runs(false, o);
  if (!o.pass) return o;
  const auto sg = io::steady_stats(r.gsto_run, larvae::kDay);
  const auto sh = io::steady_stats(r.hgo_run, larvae::kDay);
  const auto cg = settling_time(r.gsto_run, 1e-3);
  const auto ch = settling_time(r.hgo_run, 1e-3);
  o.require(sg.max <= 1e-3, "GSTO last-day max " + fmt(sg.max));
  o.require(sh.max > 10.0 * sg.max, "HGO last-day max " + fmt(sh.max) + " not above 10x GSTO");
  o.require(cg.has_value(), "GSTO never settles to 1e-3");
  o.require(!ch.has_value(), "HGO settles to 1e-3");
  o.note("last-day max rel err GSTO " + fmt(sg.max) + " vs HGO " + fmt(sh.max) + ", GSTO settles at day " +
         (cg ? fmt(*cg / larvae::kDay) : std::string("none")));
  return o;
}

Outcome noise_robustness() {
  Outcome o;
  const auto r = larvae_runs(true, o);
  if (!o.pass) return o;
  const auto sg = io::steady_stats(r.gsto_run, larvae::kDay);
  const auto sh = io::steady_stats(r.hgo_run, larvae::kDay);
  const double bg = max_relative_error(r.gsto_run).maxCoeff();
  const double bh = max_relative_error(r.hgo_run).maxCoeff();
  o.require(std::isfinite(bg) && std::isfinite(bh), "unbounded relative error");
  o.require(sg.mean < sh.mean, "GSTO last-day mean " + fmt(sg.mean) + " not below HGO " + fmt(sh.mean));
  o.note("last-day mean rel err GSTO " + fmt(sg.mean) + " vs HGO " + fmt(sh.mean) + ", sup GSTO " + fmt(bg) +
         ", sup HGO " + fmt(bh));
  return o;
}

Outcome lyapunov_monitoring() {
  Outcome o;
  const auto& r = synthetic_run();
  const auto certs = make_certificates(r.b.gains);
  const auto bounds = estimate_interconnection_bounds(r.tr, r.b.system);
  const auto g_min = lower_gain_bounds(r.b.system.known());
  const DecreaseOptions opt;
  const auto rep = monitor_decrease(r.tr, certs, r.b.gains, bounds, g_min, opt);
  o.require(rep.violations == 0, std::to_string(rep.violations) + " decrease violations in Omega");

  // Subsystem-1 error measured as in criterion 5: max relative error over its two states.
  const Mat rel = relative_error(r.tr);
  std::size_t reach = r.tr.samples();
  for (std::size_t k = 0; k < r.tr.samples(); ++k) {
    const auto K = static_cast<Eigen::Index>(k);
    if (std::max(rel(K, 0), rel(K, 1)) <= 1e-6) {
      reach = k;
      break;
    }
  }
  std::size_t increases = 0;
  for (std::size_t k = 0; k < reach && k + 1 < r.tr.samples(); ++k) {
    const auto K = static_cast<Eigen::Index>(k);
    if (rep.V_sub(K + 1, 0) - rep.V_sub(K, 0) > rep.tol(rep.V_sub(K, 0), opt)) ++increases;
  }
  o.require(reach < r.tr.samples(), "subsystem-1 error never reaches 1e-6");
  o.require(increases == 0, std::to_string(increases) + " increases of V_1 before the error reaches 1e-6");
  const auto R = static_cast<Eigen::Index>(std::min(reach, r.tr.samples() - 1));
  o.note(std::to_string(rep.steps_in_omega) + " steps in Omega; V_1 " + fmt(rep.V_sub(0, 0)) + " -> " +
         fmt(rep.V_sub(R, 0)) + " by t = " + fmt(r.tr.times[static_cast<std::size_t>(R)]) + " s");
  return o;
}

Outcome determinism_io() {
  Outcome o;
  const fs::path base = fs::temp_directory_path() / ("gsto_acceptance_det_" + std::to_string(::getpid()));
  std::ostringstream sink;
  const io::Logger log(io::LogLevel::Error, sink);
  const std::string cfg = (config_dir() / "synthetic.json").string();
  for (const char* cmd : {"simulate", "compare"}) {
    const fs::path a = base / (std::string(cmd) + "_a"), b = base / (std::string(cmd) + "_b");
    const int ca = io::run_command({cmd, cfg, a.string(), false, {}}, log);
    const int cb = io::run_command({cmd, cfg, b.string(), false, {}}, log);
    o.require(ca == 0 && cb == 0, std::string(cmd) + " exit codes " + std::to_string(ca) + "/" + std::to_string(cb));
    const auto fa = io::scan_artifacts(a), fb = io::scan_artifacts(b);
    bool same = fa.size() == fb.size() && !fa.empty();
    for (std::size_t k = 0; same && k < fa.size(); ++k) same = fa[k].path == fb[k].path && fa[k].sha256 == fb[k].sha256;
    o.require(same, std::string(cmd) + " artifacts differ between runs");
  }

  const auto& tr = synthetic_run().tr;
  std::stringstream csv;
  io::write_csv(csv, io::trajectory_table(tr, Mat::Zero(static_cast<Eigen::Index>(tr.samples()), 2)));
  const auto back = io::trajectory_from_table(io::read_csv(csv));
  double worst = back.samples() == tr.samples() ? 0.0 : 1.0;
  for (const auto& [p, q] : {std::pair{&back.x, &tr.x}, std::pair{&back.xhat, &tr.xhat}}) {
    if (worst > 0.0) break;
    worst = std::max(worst, ((*p - *q).cwiseAbs().cwiseQuotient(q->cwiseAbs().cwiseMax(1e-300))).maxCoeff());
  }
  worst = std::max(worst, std::abs(back.times.back() - tr.times.back()));
  o.require(worst <= 1e-15, "CSV round-trip error " + fmt(worst));
  o.note("CSV round-trip max relative error " + fmt(worst));
  fs::remove_all(base);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"phi identities", 1.0, phi_identities},
      {"ALE certificates", 5.0, ale_certificates},
      {"observability round-trip", 5.0, observability_round_trip},
      {"equilibrium invariance", 60.0, equilibrium_invariance},
      {"finite-time exactness", 30.0, finite_time_exactness},
      {"GSTO vs HGO separation", 60.0, larvae_separation},
      {"noise robustness", 60.0, noise_robustness},
      {"Lyapunov monitoring", 60.0, lyapunov_monitoring},
      {"determinism and I/O", 60.0, determinism_io},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(dt <= c.budget_s, "runtime " + fmt(dt) + " s over budget " + fmt(c.budget_s) + " s");
    failed += !o.pass;
    std::printf("%s %zu %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, dt, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
