#pragma once

// simulate / compare / verify: experiment orchestration behind the CLI.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsto/errors.hpp"
#include "gsto/io/config.hpp"
#include "gsto/io/csv.hpp"
#include "gsto/io/manifest.hpp"
#include "gsto/io/svg.hpp"
#include "gsto/lyapunov.hpp"
#include "gsto/simulator.hpp"

namespace gsto::io {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;  // I/O or unexpected error
inline constexpr int kConfig = 2;
inline constexpr int kDivergence = 3;
inline constexpr int kInfeasible = 4;
inline constexpr int kViolations = 5;
}  // namespace exit_code

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Reads GSTO_LOG_LEVEL (error|warn|info|debug); default warn.
inline LogLevel log_level_from_env() {
  const char* v = std::getenv("GSTO_LOG_LEVEL");
  if (!v) return LogLevel::Warn;
  const std::string s(v);
  if (s == "error") return LogLevel::Error;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

class Logger {
 public:
  explicit Logger(LogLevel level = log_level_from_env(), std::ostream& out = std::cerr) : level_(level), out_(out) {}
  void log(LogLevel l, const std::string& msg) const {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (static_cast<int>(l) <= static_cast<int>(level_)) out_ << "[" << names[static_cast<int>(l)] << "] " << msg << '\n';
  }
  void error(const std::string& m) const { log(LogLevel::Error, m); }
  void warn(const std::string& m) const { log(LogLevel::Warn, m); }
  void info(const std::string& m) const { log(LogLevel::Info, m); }
  void debug(const std::string& m) const { log(LogLevel::Debug, m); }

 private:
  LogLevel level_;
  std::ostream& out_;
};

struct CommandOptions {
  std::string command;  // simulate | compare | verify
  std::string config_path;
  std::string out_dir;
  bool svg = false;
  std::optional<ObserverMode> observer;
};

// ---------------------------------------------------------------------------
// Metrics

struct SteadyStats {
  double window_start = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Max and time-average (sample mean) of the per-sample max relative error over t >= t_end - window.
inline SteadyStats steady_stats(const Trajectory& tr, double window) {
  const Vec mr = max_relative_error(tr);
  SteadyStats s;
  s.window_start = tr.times.back() - window;
  std::size_t count = 0;
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    if (tr.times[k] < s.window_start) continue;
    const double v = mr[static_cast<Eigen::Index>(k)];
    s.max = std::max(s.max, v);
    s.mean += v;
    ++count;
  }
  if (count) s.mean /= static_cast<double>(count);
  return s;
}

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline nlohmann::json run_summary(const Trajectory& tr, const ObserverPlant& obs, const MetricsOptions& m) {
  nlohmann::json j;
  j["observer"] = to_string(obs.mode());
  j["samples"] = tr.samples();
  j["t_end"] = tr.times.back();
  j["tol"] = m.tol;
  j["convergence_time"] = optional_json(settling_time(tr, m.tol));
  const Mat rel = relative_error(tr);
  const auto last = static_cast<Eigen::Index>(tr.samples() - 1);
  std::vector<double> fr, fa;
  for (Eigen::Index c = 0; c < rel.cols(); ++c) {
    fr.push_back(rel(last, c));
    fa.push_back(std::abs(tr.xhat(last, c) - tr.x(last, c)));
  }
  j["final_relative_error"] = fr;
  j["final_abs_error"] = fa;
  const auto st = steady_stats(tr, m.steady_window);
  j["steady_state"] = {{"window", m.steady_window}, {"max_relative_error", st.max}, {"mean_relative_error", st.mean}};
  return j;
}

// ---------------------------------------------------------------------------
// Artifacts

inline Mat lyapunov_series(const Trajectory& tr, std::span<const LyapunovCertificate> certs, const ObserverGains& g) {
  const auto S = static_cast<Eigen::Index>(tr.samples());
  const auto N = static_cast<Eigen::Index>(g.size());
  Mat V(S, N);
  const Mat e = tr.error();
  for (Eigen::Index k = 0; k < S; ++k) {
    const auto xi = xi_from_error(e.row(k).transpose(), g);
    for (Eigen::Index i = 0; i < N; ++i) V(k, i) = lyap_value(certs[static_cast<std::size_t>(i)], xi[static_cast<std::size_t>(i)]);
  }
  return V;
}

inline CsvTable diagnostics_table(const Trajectory& tr, const InterconnectedSystem& sys, const ObserverGains& g) {
  const auto N = static_cast<Eigen::Index>(sys.size());
  CsvTable t;
  t.header = {"t", "max_rel_err"};
  for (Eigen::Index i = 1; i <= N; ++i)
    for (int j = 1; j <= 2; ++j) t.header.push_back("rel_" + std::to_string(i) + std::to_string(j));
  for (Eigen::Index i = 1; i <= N; ++i) t.header.push_back("xi_norm_" + std::to_string(i));
  for (Eigen::Index i = 1; i <= N; ++i) t.header.push_back("rho1_" + std::to_string(i));
  for (Eigen::Index i = 1; i <= N; ++i) t.header.push_back("rho2_" + std::to_string(i));
  const Mat rel = relative_error(tr);
  const Mat e = tr.error();
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    std::vector<double> row{tr.times[k], rel.row(r).maxCoeff()};
    for (Eigen::Index c = 0; c < 2 * N; ++c) row.push_back(rel(r, c));
    const auto xi = xi_from_error(e.row(r).transpose(), g);
    for (const auto& v : xi) row.push_back(v.norm());
    const auto rho = interconnection_residuals(sys, tr.x_at(k), tr.xhat_at(k), tr.u_at(k), tr.w_at(k), tr.times[k]);
    for (Eigen::Index i = 0; i < N; ++i) row.push_back(rho.rho1[i]);
    for (Eigen::Index i = 0; i < N; ++i) row.push_back(rho.rho2[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

inline void write_run_plots(const std::filesystem::path& dir, const std::string& tag, const Trajectory& tr,
                            double time_scale, const std::string& time_unit) {
  const auto N = static_cast<Eigen::Index>(tr.subsystems());
  std::vector<double> tx;
  for (double t : tr.times) tx.push_back(t / time_scale);
  const auto& pal = palette();
  Chart out{"Measured and estimated outputs" + tag, "t [" + time_unit + "]", "y", tx, {}, false};
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& col = pal[static_cast<std::size_t>(i) % pal.size()];
    Series m{"y" + std::to_string(i + 1), {}, col, false}, h{"yhat" + std::to_string(i + 1), {}, col, true};
    for (std::size_t k = 0; k < tr.samples(); ++k) {
      m.y.push_back(tr.y_meas(static_cast<Eigen::Index>(k), i));
      h.y.push_back(tr.xhat(static_cast<Eigen::Index>(k), 2 * i));
    }
    out.series.push_back(std::move(m));
    out.series.push_back(std::move(h));
  }
  write_svg((dir / ("outputs" + tag + ".svg")).string(), out);

  const Mat rel = relative_error(tr);
  Chart re{"Relative estimation errors" + tag, "t [" + time_unit + "]", "|xhat - x| / |x|", tx, {}, true};
  for (Eigen::Index c = 0; c < rel.cols(); ++c) {
    Series s{"x_" + std::to_string(c / 2 + 1) + std::to_string(c % 2 + 1), {}, pal[static_cast<std::size_t>(c) % pal.size()]};
    s.y.assign(rel.col(c).data(), rel.col(c).data() + rel.rows());
    re.series.push_back(std::move(s));
  }
  write_svg((dir / ("relative_errors" + tag + ".svg")).string(), re);
}

// ---------------------------------------------------------------------------
// Commands

struct CommandResult {
  int exit_code = exit_code::kOk;
  nlohmann::json summary;
};

namespace detail {

inline double time_scale(const Experiment& e) { return e.kind == SystemKind::Larvae ? larvae::kDay : 1.0; }
inline std::string time_unit(const Experiment& e) { return e.kind == SystemKind::Larvae ? "day" : "s"; }

struct RunOutcome {
  std::optional<Trajectory> traj;
  std::optional<double> diverged_at;
  std::string error;
};

inline RunOutcome guarded_integrate(const Experiment& e, const ObserverPlant& obs, const Logger& log) {
  RunOutcome r;
  try {
    r.traj = integrate(e.system, obs, e.sim);
  } catch (const DivergenceError& ex) {
    r.diverged_at = ex.time();
    r.error = ex.what();
    log.error(std::string(to_string(obs.mode())) + " run diverged: " + ex.what());
  }
  return r;
}

inline CommandResult simulate(const Experiment& e, const std::filesystem::path& dir, bool svg, const Logger& log) {
  CommandResult res;
  const auto obs = make_observer(e.system, e.gains);
  log.info("simulate: " + std::string(to_string(e.kind)) + " with " + to_string(obs.mode()));
  const auto out = guarded_integrate(e, obs, log);
  if (!out.traj) {
    res.exit_code = exit_code::kDivergence;
    res.summary = {{"command", "simulate"}, {"diverged_at", *out.diverged_at}, {"error", out.error}};
    write_json(dir / "summary.json", res.summary);
    return res;
  }
  const auto& tr = *out.traj;
  const auto certs = make_certificates(e.gains, e.Q);
  write_csv((dir / "trajectory.csv").string(), trajectory_table(tr, lyapunov_series(tr, certs, e.gains)));
  write_csv((dir / "diagnostics.csv").string(), diagnostics_table(tr, e.system, e.gains));
  if (svg) write_run_plots(dir, "", tr, time_scale(e), time_unit(e));
  res.summary = run_summary(tr, obs, e.metrics);
  res.summary["command"] = "simulate";
  res.summary["system"] = to_string(e.kind);
  write_json(dir / "summary.json", res.summary);
  return res;
}

inline CommandResult compare(const Experiment& e, const std::filesystem::path& dir, bool svg, const Logger& log) {
  for (std::size_t i = 0; i < e.gains.size(); ++i) {
    if (!(e.gains.sub[i].mu.mu1 > 0.0)) {
      throw ConfigError("/observer/gains/" + std::to_string(i) + "/mu", "compare needs GSTO gains (mu1 > 0)");
    }
  }
  CommandResult res;
  res.summary["command"] = "compare";
  res.summary["system"] = to_string(e.kind);
  const ObserverPlant gsto = make_observer(e.system, e.gains);
  const ObserverPlant hgo = make_observer(e.system, e.gains.as_hgo());
  const auto a = guarded_integrate(e, gsto, log);
  const auto b = guarded_integrate(e, hgo, log);
  const auto certs = make_certificates(e.gains, e.Q);

  auto record = [&](const char* tag, const RunOutcome& o, const ObserverPlant& obs) {
    if (!o.traj) {
      res.summary[tag] = {{"diverged_at", *o.diverged_at}, {"error", o.error}};
      res.exit_code = exit_code::kDivergence;
      return;
    }
    res.summary[tag] = run_summary(*o.traj, obs, e.metrics);
    write_csv((dir / (std::string("trajectory_") + tag + ".csv")).string(),
              trajectory_table(*o.traj, lyapunov_series(*o.traj, certs, obs.gains())));
    if (svg) write_run_plots(dir, std::string("_") + tag, *o.traj, time_scale(e), time_unit(e));
  };
  record("gsto", a, gsto);
  record("hgo", b, hgo);

  if (a.traj && b.traj) {
    const Mat ra = relative_error(*a.traj);
    const Mat rb = relative_error(*b.traj);
    CsvTable t;
    t.header = {"t", "max_rel_gsto", "max_rel_hgo"};
    for (Eigen::Index c = 0; c < ra.cols(); ++c) {
      const std::string s = std::to_string(c / 2 + 1) + std::to_string(c % 2 + 1);
      t.header.push_back("rel_gsto_" + s);
      t.header.push_back("rel_hgo_" + s);
    }
    for (Eigen::Index k = 0; k < ra.rows(); ++k) {
      std::vector<double> row{a.traj->times[static_cast<std::size_t>(k)], ra.row(k).maxCoeff(), rb.row(k).maxCoeff()};
      for (Eigen::Index c = 0; c < ra.cols(); ++c) {
        row.push_back(ra(k, c));
        row.push_back(rb(k, c));
      }
      t.rows.push_back(std::move(row));
    }
    write_csv((dir / "comparison.csv").string(), t);
    const auto sa = steady_stats(*a.traj, e.metrics.steady_window);
    const auto sb = steady_stats(*b.traj, e.metrics.steady_window);
    res.summary["steady_state_ratio_max"] = sa.max > 0.0 ? nlohmann::json(sb.max / sa.max) : nlohmann::json(nullptr);
    res.summary["steady_state_ratio_mean"] = sa.mean > 0.0 ? nlohmann::json(sb.mean / sa.mean) : nlohmann::json(nullptr);
    res.summary["gsto_better"] = sa.mean < sb.mean;
  }
  write_json(dir / "summary.json", res.summary);
  return res;
}

inline nlohmann::json matrix_json(const Mat& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    j.push_back(row);
  }
  return j;
}

inline CommandResult verify(const Experiment& e, const std::filesystem::path& dir, const Logger& log) {
  CommandResult res;
  nlohmann::json& R = res.summary;
  R["command"] = "verify";
  R["system"] = to_string(e.kind);

  // InfeasibleError escapes to the caller (exit code 4).
  const auto certs = make_certificates(e.gains, e.Q);
  R["certificates"] = nlohmann::json::array();
  for (const auto& c : certs) {
    R["certificates"].push_back({{"L", {c.l1, c.l2}},
                                 {"P", matrix_json(c.P)},
                                 {"Q", matrix_json(c.Q)},
                                 {"lambda_min_Q", c.lambda_min_Q},
                                 {"lambda_min_P", c.lambda_min_P},
                                 {"lambda_max_P", c.lambda_max_P},
                                 {"ale_residual", c.residual()}});
  }

  const auto obs = make_observer(e.system, e.gains);
  R["observer"] = to_string(obs.mode());
  const auto out = guarded_integrate(e, obs, log);
  if (!out.traj) {
    R["diverged_at"] = *out.diverged_at;
    R["error"] = out.error;
    res.exit_code = exit_code::kDivergence;
    write_json(dir / "report.json", R);
    return res;
  }
  const auto& tr = *out.traj;
  const auto bounds = estimate_interconnection_bounds(tr, e.system);
  const auto check = check_bounds(bounds, tr, e.system);
  R["bounds"] = {{"alpha0", bounds.alpha0},
                 {"alpha0_per_subsystem", std::vector<double>(bounds.alpha0_sub.data(), bounds.alpha0_sub.data() + bounds.alpha0_sub.size())},
                 {"alpha", matrix_json(bounds.alpha)},
                 {"beta", matrix_json(bounds.beta)},
                 {"alpha_tilde", matrix_json(bounds.alpha_tilde)},
                 {"beta_tilde", matrix_json(bounds.beta_tilde)},
                 {"pointwise_violations", check.violations},
                 {"worst_excess", check.worst_excess},
                 {"cascade_zero", check.cascade_zero}};

  const auto g_min = lower_gain_bounds(e.system.known());
  const auto fr = gain_feasibility(certs, bounds, e.gains, g_min, e.feasibility);
  nlohmann::json F;
  F["eta"] = fr.eta;
  F["feasible_at_configured_gamma"] = fr.feasible;
  F["gamma_min"] = optional_json(fr.gamma_min);
  F["subsystems"] = nlohmann::json::array();
  for (const auto& s : fr.sub) {
    F["subsystems"].push_back({{"gamma", s.gamma}, {"c", s.c}, {"c_tilde", s.c_tilde}, {"c_positive", s.c_positive},
                               {"c_tilde_positive", s.c_tilde_positive}});
  }
  F["grid"] = nlohmann::json::array();
  for (const auto& p : fr.grid) F["grid"].push_back({{"gamma", p.gamma}, {"feasible", p.feasible}, {"c", p.c}});
  F["grid_monotone"] = fr.grid_monotone;
  F["omega_radius"] = matrix_json(fr.omega_radius);
  R["feasibility"] = F;

  const auto dr = monitor_decrease(tr, certs, e.gains, bounds, g_min, e.decrease);
  std::vector<double> first(dr.violation_times.begin(),
                            dr.violation_times.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(20, dr.violation_times.size())));
  R["decrease"] = {{"samples", tr.samples()},
                   {"steps_in_omega", dr.steps_in_omega},
                   {"violations", dr.violations},
                   {"first_violation_times", first},
                   {"max_increase_in_omega", dr.max_increase_in_omega},
                   {"tol_abs", e.decrease.abs_tol},
                   {"tol_rel", e.decrease.rel_tol}};
  R["convergence_time"] = optional_json(settling_time(tr, e.metrics.tol));
  R["tol"] = e.metrics.tol;

  CsvTable t;
  t.header = {"t", "V", "in_omega"};
  for (std::size_t i = 1; i <= e.gains.size(); ++i) t.header.push_back("V_" + std::to_string(i));
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    std::vector<double> row{tr.times[k], dr.V[r], dr.in_omega[k] ? 1.0 : 0.0};
    for (Eigen::Index i = 0; i < dr.V_sub.cols(); ++i) row.push_back(dr.V_sub(r, i));
    t.rows.push_back(std::move(row));
  }
  write_csv((dir / "lyapunov.csv").string(), t);

  const bool ok = dr.violations == 0 && check.violations == 0;
  R["ok"] = ok;
  res.exit_code = ok ? exit_code::kOk : exit_code::kViolations;
  write_json(dir / "report.json", R);
  return res;
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Runs one command end to end, writing artifacts and a manifest into opt.out_dir.
/// Never throws; failures are reported on `log` and mapped to exit codes.
inline int run_command(const CommandOptions& opt, const Logger& log = Logger()) {
  namespace fs = std::filesystem;
  const auto started = std::chrono::steady_clock::now();
  RunInfo info;
  info.command = opt.command;
  info.config_path = opt.config_path;
  info.out_dir = opt.out_dir;
  info.started_utc = detail::utc_now();
  int code = exit_code::kOk;
  bool have_dir = false;
  try {
    const json doc = read_json_file(opt.config_path);
    Experiment e = parse_experiment(doc);
    if (opt.observer) apply_mode(e, *opt.observer);
    info.config_hash = sha256_hex(e.resolved.dump());
    fs::create_directories(opt.out_dir);
    have_dir = true;
    write_json(fs::path(opt.out_dir) / "resolved_config.json", e.resolved);
    CommandResult r;
    if (opt.command == "simulate") {
      r = detail::simulate(e, opt.out_dir, opt.svg, log);
    } else if (opt.command == "compare") {
      r = detail::compare(e, opt.out_dir, opt.svg, log);
    } else if (opt.command == "verify") {
      r = detail::verify(e, opt.out_dir, log);
    } else {
      throw Error("unknown command " + opt.command);
    }
    code = r.exit_code;
    if (r.summary.contains("diverged_at")) {
      log.error("divergence at t = " + r.summary["diverged_at"].dump());
    }
  } catch (const ConfigError& ex) {
    log.error(std::string("config error at ") + ex.path() + ": " + ex.what());
    code = exit_code::kConfig;
  } catch (const InfeasibleError& ex) {
    log.error(std::string("infeasible: ") + ex.what());
    code = exit_code::kInfeasible;
  } catch (const DivergenceError& ex) {
    log.error(std::string("divergence at t = ") + std::to_string(ex.time()) + ": " + ex.what());
    code = exit_code::kDivergence;
  } catch (const std::exception& ex) {
    log.error(ex.what());
    code = exit_code::kFailure;
  }
  if (have_dir) {
    info.exit_code = code;
    info.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    try {
      write_manifest(opt.out_dir, info);
    } catch (const std::exception& ex) {
      log.error(ex.what());
      if (code == exit_code::kOk) code = exit_code::kFailure;
    }
  }
  return code;
}

}  // namespace gsto::io
