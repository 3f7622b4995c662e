#pragma once

// JSON experiment configuration, schema id "gsto-config/1".
// Every field is optional except "system.kind"; defaults are written back into
// the resolved document so that its hash identifies the full experiment.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gsto/benchmarks.hpp"
#include "gsto/casestudy.hpp"
#include "gsto/errors.hpp"
#include "gsto/lyapunov.hpp"
#include "gsto/observer.hpp"
#include "gsto/simulator.hpp"

namespace gsto::io {

using json = nlohmann::json;

inline constexpr const char* kConfigSchema = "gsto-config/1";

enum class SystemKind { Larvae, Synthetic, Linear };

inline const char* to_string(SystemKind k) {
  switch (k) {
    case SystemKind::Larvae: return "larvae";
    case SystemKind::Synthetic: return "synthetic";
    case SystemKind::Linear: return "linear";
  }
  return "?";
}

struct MetricsOptions {
  double tol = 1e-3;
  double steady_window = 86400.0;  // trailing window for steady-state statistics
};

/// Fully resolved experiment: ready to build and run.
struct Experiment {
  SystemKind kind = SystemKind::Larvae;
  InterconnectedSystem system;
  ObserverGains gains;
  SimConfig sim;
  MetricsOptions metrics;
  FeasibilityOptions feasibility;
  DecreaseOptions decrease;
  std::vector<Mat2> Q;
  std::uint64_t seed = 0;
  json resolved;
};

namespace detail {

/// Typed access to one JSON object with path-carrying errors and unknown-key rejection.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }
  ~Section() = default;

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  std::string at(const std::string& key) const { return path_ + "/" + key; }
  const json& raw(const std::string& key) const { return j_.at(key); }

  double number(const std::string& key, double def, json& out) {
    used_.insert(key);
    double v = def;
    if (has(key)) {
      if (!j_.at(key).is_number()) throw ConfigError(at(key), "expected a number");
      v = j_.at(key).get<double>();
      if (!std::isfinite(v)) throw ConfigError(at(key), "must be finite");
    }
    out[key] = v;
    return v;
  }
  double positive(const std::string& key, double def, json& out) {
    const double v = number(key, def, out);
    if (!(v > 0.0)) throw ConfigError(at(key), "must be positive");
    return v;
  }
  double nonnegative(const std::string& key, double def, json& out) {
    const double v = number(key, def, out);
    if (!(v >= 0.0)) throw ConfigError(at(key), "must be nonnegative");
    return v;
  }
  std::uint64_t integer(const std::string& key, std::uint64_t def, json& out) {
    used_.insert(key);
    std::uint64_t v = def;
    if (has(key)) {
      if (!j_.at(key).is_number_unsigned() && !(j_.at(key).is_number_integer() && j_.at(key).get<long long>() >= 0)) {
        throw ConfigError(at(key), "expected a nonnegative integer");
      }
      v = j_.at(key).get<std::uint64_t>();
    }
    out[key] = v;
    return v;
  }
  bool boolean(const std::string& key, bool def, json& out) {
    used_.insert(key);
    bool v = def;
    if (has(key)) {
      if (!j_.at(key).is_boolean()) throw ConfigError(at(key), "expected true or false");
      v = j_.at(key).get<bool>();
    }
    out[key] = v;
    return v;
  }
  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed,
                     json& out) {
    used_.insert(key);
    std::string v = def;
    if (has(key)) {
      if (!j_.at(key).is_string()) throw ConfigError(at(key), "expected a string");
      v = j_.at(key).get<std::string>();
    }
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == v;
    if (!ok) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(at(key), "must be one of: " + list);
    }
    out[key] = v;
    return v;
  }
  std::optional<std::vector<double>> numbers(const std::string& key, std::optional<std::size_t> size, json& out) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    const auto& a = j_.at(key);
    if (!a.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    if (size && a.size() != *size) {
      throw ConfigError(at(key), "expected " + std::to_string(*size) + " entries, got " + std::to_string(a.size()));
    }
    std::vector<double> v;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!a[k].is_number()) throw ConfigError(at(key) + "/" + std::to_string(k), "expected a number");
      v.push_back(a[k].get<double>());
      if (!std::isfinite(v.back())) throw ConfigError(at(key) + "/" + std::to_string(k), "must be finite");
    }
    out[key] = v;
    return v;
  }
  std::optional<Section> object(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return Section(j_.at(key), at(key));
  }
  void mark(const std::string& key) { used_.insert(key); }

  /// Rejects keys that were never queried.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key()) && it.key().rfind("_", 0) != 0) throw ConfigError(at(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Vec to_vec(const std::vector<double>& v) { return Vec::Map(v.data(), static_cast<Eigen::Index>(v.size())); }

inline larvae::LarvaeParams parse_larvae(std::optional<Section> s, std::size_t n, json& out) {
  larvae::LarvaeParams p;
  if (n != 2) {
    p.L.assign(n, 160.0);
    p.T.assign(n, 35.0);
  }
  json dummy = json::object();
  Section empty(dummy, "/system/params");
  Section& r = s ? *s : empty;
  p.alpha1 = r.number("alpha1", p.alpha1, out);
  p.alpha2 = r.number("alpha2", p.alpha2, out);
  p.alpha7 = r.nonnegative("alpha7", p.alpha7, out);
  p.alpha9 = r.nonnegative("alpha9", p.alpha9, out);
  p.alpha15 = r.positive("alpha15", p.alpha15, out);
  p.alpha17 = r.number("alpha17", p.alpha17, out);
  p.alpha20 = r.number("alpha20", p.alpha20, out);
  p.alpha21 = r.number("alpha21", p.alpha21, out);
  p.kappa = r.nonnegative("kappa", p.kappa, out);
  if (auto v = r.numbers("L", n, out)) p.L = *v;
  out["L"] = p.L;
  for (std::size_t i = 0; i < n; ++i)
    if (!(p.L[i] > 0.0)) throw ConfigError(r.at("L") + "/" + std::to_string(i), "must be positive");
  if (auto v = r.numbers("T", n, out)) p.T = *v;
  out["T"] = p.T;

  const double O = r.positive("O", 20.95, out);
  const double uv = r.nonnegative("u_v", 0.4, out);
  const double uv_close = r.number("valve_close_day", 7.0, out);
  const double uo = r.nonnegative("u_o", 0.4, out);
  const double co_amp = r.number("C_o_amplitude", 9.1167e-4, out);
  const double co_period = r.positive("C_o_period", 900.0, out);
  p.O_fn = [O](std::size_t, double) { return O; };
  p.u_v_fn = [uv, uv_close](double t) { return t <= uv_close * larvae::kDay ? uv : 0.0; };
  p.u_o_fn = [uo](double) { return uo; };
  p.C_o_fn = [co_amp, co_period](double t) { return co_amp * std::sin(t / co_period); };
  if (auto v = r.numbers("C_probe_range", 2, out)) {
    p.C_probe_lo = (*v)[0];
    p.C_probe_hi = (*v)[1];
    if (!(p.C_probe_hi > p.C_probe_lo)) throw ConfigError(r.at("C_probe_range"), "need lo < hi");
  }
  out["C_probe_range"] = {p.C_probe_lo, p.C_probe_hi};
  p.g_margin = r.nonnegative("g_margin", p.g_margin, out);
  r.finish();
  return p;
}

inline ObserverGains parse_gains(Section& obs, const ObserverGains& def, json& out) {
  ObserverGains g = def;
  const std::size_t n = def.size();
  obs.mark("gains");
  if (obs.has("gains")) {
    const auto& a = obs.raw("gains");
    if (!a.is_array() || a.size() != n) {
      throw ConfigError(obs.at("gains"), "expected an array with one entry per subsystem (" + std::to_string(n) + ")");
    }
    for (std::size_t i = 0; i < n; ++i) {
      Section s(a[i], obs.at("gains") + "/" + std::to_string(i));
      json o = json::object();
      auto& gi = g.sub[i];
      gi.l1 = s.number("l1", gi.l1, o);
      gi.l2 = s.number("l2", gi.l2, o);
      gi.gamma = s.positive("gamma", gi.gamma, o);
      if (auto mu = s.numbers("mu", 2, o)) gi.mu = {(*mu)[0], (*mu)[1]};
      if (gi.mu.mu1 < 0.0 || gi.mu.mu2 < 0.0) throw ConfigError(s.at("mu"), "entries must be nonnegative");
      s.finish();
    }
  }
  out["gains"] = json::array();
  for (const auto& gi : g.sub) {
    out["gains"].push_back({{"l1", gi.l1}, {"l2", gi.l2}, {"gamma", gi.gamma}, {"mu", {gi.mu.mu1, gi.mu.mu2}}});
  }
  return g;
}

}  // namespace detail

/// Observer mode override from the command line, applied after parsing.
inline void apply_mode(Experiment& e, ObserverMode mode) {
  if (mode == ObserverMode::HGO) e.gains = e.gains.as_hgo();
  for (std::size_t i = 0; mode == ObserverMode::GSTO && i < e.gains.size(); ++i) {
    if (!(e.gains.sub[i].mu.mu1 > 0.0)) {
      throw ConfigError("/observer/gains/" + std::to_string(i) + "/mu", "gsto mode needs mu1 > 0");
    }
  }
  e.resolved["observer"]["mode"] = to_string(mode);
  e.resolved["observer"]["gains"] = json::array();
  for (const auto& gi : e.gains.sub) {
    e.resolved["observer"]["gains"].push_back(
        {{"l1", gi.l1}, {"l2", gi.l2}, {"gamma", gi.gamma}, {"mu", {gi.mu.mu1, gi.mu.mu2}}});
  }
}

inline Experiment parse_experiment(const json& doc) {
  using detail::Section;
  Experiment e;
  json& R = e.resolved;
  R = json::object();
  Section root(doc, "");
  {
    root.mark("schema");
    if (!root.has("schema") || !doc.at("schema").is_string() || doc.at("schema").get<std::string>() != kConfigSchema) {
      throw ConfigError("/schema", std::string("expected \"") + kConfigSchema + "\"");
    }
    R["schema"] = kConfigSchema;
  }
  e.seed = root.integer("seed", 0, R);

  auto sys = root.object("system");
  if (!sys) throw ConfigError("/system", "required");
  json& RS = R["system"];
  const std::string kind = sys->choice("kind", "larvae", {"larvae", "synthetic", "linear"}, RS);
  auto params = sys->object("params");
  json& RP = RS["params"];
  RP = json::object();

  bool noisy_default = false;
  if (kind == "larvae") {
    e.kind = SystemKind::Larvae;
    const auto n = static_cast<std::size_t>(sys->integer("units", 2, RS));
    if (n < 2) throw ConfigError("/system/units", "must be at least 2");
    const auto p = detail::parse_larvae(std::move(params), n, RP);
    e.system = larvae::build_larvae_system(p, n);
    auto c = larvae::reference_config(noisy_default);
    if (n != 2) {
      c.gains.sub.resize(n, c.gains.sub.back());
      c.sim.x0 = Vec(static_cast<Eigen::Index>(2 * n));
      for (std::size_t i = 0; i < n; ++i) {
        c.sim.x0[static_cast<Eigen::Index>(2 * i)] = larvae::kReferenceX0[std::min<std::size_t>(i, 1)];
        c.sim.x0[static_cast<Eigen::Index>(2 * i + 1)] = larvae::kReferenceX0[2 + std::min<std::size_t>(i, 1)];
      }
      c.sim.xhat0 = 5.0 * c.sim.x0;
    }
    c.sim.known_input = [p](double t) { return larvae::known_input(p, t); };
    e.gains = c.gains;
    e.sim = c.sim;
    e.metrics.steady_window = larvae::kDay;
  } else if (kind == "synthetic") {
    e.kind = SystemKind::Synthetic;
    bench::SyntheticParams sp;
    sp.seed = e.seed;
    bool perturbed = true;
    json dummy = json::object();
    Section empty(dummy, "/system/params");
    Section& r = params ? *params : empty;
    sp.scale = r.positive("scale", sp.scale, RP);
    perturbed = r.boolean("perturbed", perturbed, RP);
    r.finish();
    auto b = bench::synthetic_benchmark(sp, perturbed);
    e.system = std::move(b.system);
    e.gains = b.gains;
    e.sim = b.sim;
    e.sim.record_stride = 10;
    e.metrics.tol = 1e-4;
    e.metrics.steady_window = 10.0;
  } else {
    e.kind = SystemKind::Linear;
    bool perturbed = false;
    double amp = 0.0;
    json dummy = json::object();
    Section empty(dummy, "/system/params");
    Section& r = params ? *params : empty;
    perturbed = r.boolean("perturbed", perturbed, RP);
    amp = r.nonnegative("disturbance_amplitude", 0.5, RP);
    r.finish();
    auto b = bench::linear_benchmark();
    if (perturbed) {
      b.system = bench::linear_system(true);
      b.sim.unknown_input = [amp](double t) {
        Vec w(2);
        w << amp * std::sin(t), amp * std::cos(2.0 * t);
        return w;
      };
    }
    e.system = std::move(b.system);
    e.gains = b.gains;
    e.sim = b.sim;
    e.metrics.tol = 1e-4;
    e.metrics.steady_window = 2.0;
  }
  sys->finish();
  const std::size_t n = e.system.size();

  // observer
  {
    json dummy = json::object();
    auto obs = root.object("observer");
    Section empty(dummy, "/observer");
    Section& r = obs ? *obs : empty;
    json& RO = R["observer"];
    const std::string mode = r.choice("mode", "gsto", {"gsto", "hgo"}, RO);
    e.gains = detail::parse_gains(r, e.gains, RO);
    r.finish();
    if (mode == "hgo") e.gains = e.gains.as_hgo();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& gi = e.gains.sub[i];
      if (mode == "gsto" && !(gi.mu.mu1 > 0.0)) {
        throw ConfigError("/observer/gains/" + std::to_string(i) + "/mu", "gsto mode needs mu1 > 0");
      }
    }
    RO["gains"] = json::array();
    for (const auto& gi : e.gains.sub) {
      RO["gains"].push_back({{"l1", gi.l1}, {"l2", gi.l2}, {"gamma", gi.gamma}, {"mu", {gi.mu.mu1, gi.mu.mu2}}});
    }
  }

  // simulation
  {
    json dummy = json::object();
    auto sim = root.object("simulation");
    Section empty(dummy, "/simulation");
    Section& r = sim ? *sim : empty;
    json& RM = R["simulation"];
    e.sim.t0 = r.number("t0", e.sim.t0, RM);
    e.sim.t_end = r.number("t_end", e.sim.t_end, RM);
    if (!(e.sim.t_end > e.sim.t0)) throw ConfigError("/simulation/t_end", "must exceed t0");
    e.sim.dt = r.positive("dt", e.sim.dt, RM);
    const std::string method = r.choice("method", "euler", {"euler", "rk4"}, RM);
    e.sim.method = method == "rk4" ? Method::RK4 : Method::Euler;
    const auto stride = r.integer("record_stride", e.sim.record_stride, RM);
    if (stride < 1) throw ConfigError("/simulation/record_stride", "must be >= 1");
    e.sim.record_stride = static_cast<std::size_t>(stride);
    if (auto v = r.numbers("x0", 2 * n, RM)) e.sim.x0 = detail::to_vec(*v);
    if (auto v = r.numbers("xhat0", 2 * n, RM)) {
      if (r.has("xhat0_scale")) throw ConfigError("/simulation/xhat0_scale", "give either xhat0 or xhat0_scale");
      e.sim.xhat0 = detail::to_vec(*v);
      r.mark("xhat0_scale");
    } else if (r.has("xhat0_scale")) {
      const double s = r.number("xhat0_scale", 1.0, RM);
      e.sim.xhat0 = s * e.sim.x0;
    } else {
      r.mark("xhat0_scale");
    }
    RM["x0"] = std::vector<double>(e.sim.x0.data(), e.sim.x0.data() + e.sim.x0.size());
    RM["xhat0"] = std::vector<double>(e.sim.xhat0.data(), e.sim.xhat0.data() + e.sim.xhat0.size());
    RM.erase("xhat0_scale");
    r.finish();
  }

  // noise
  {
    json& RN = R["noise"];
    RN = nullptr;
    root.mark("noise");
    if (root.has("noise")) {
      Section r(doc.at("noise"), "/noise");
      RN = json::object();
      auto amps = r.numbers("amplitudes", n, RN);
      if (!amps) throw ConfigError("/noise/amplitudes", "required when noise is given");
      const double f = r.number("frequency", 1.0, RN);
      const double ph = r.number("phase", 0.0, RN);
      r.finish();
      e.sim.noise = NoiseModel::sinusoidal(*amps, f, ph);
    }
  }

  // lyapunov
  {
    json dummy = json::object();
    auto ly = root.object("lyapunov");
    Section empty(dummy, "/lyapunov");
    Section& r = ly ? *ly : empty;
    json& RL = R["lyapunov"];
    const double eta = r.number("eta", kDefaultEta, RL);
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("/lyapunov/eta", "must lie in (0, 1)");
    e.feasibility.eta = eta;
    e.decrease.eta = eta;
    e.decrease.abs_tol = r.nonnegative("tol_abs", e.decrease.abs_tol, RL);
    e.decrease.rel_tol = r.nonnegative("tol_rel", e.decrease.rel_tol, RL);
    if (auto g = r.numbers("gamma_grid", std::nullopt, RL)) {
      for (double v : *g)
        if (!(v > 0.0)) throw ConfigError("/lyapunov/gamma_grid", "entries must be positive");
      e.feasibility.grid = *g;
    }
    r.mark("Q");
    e.Q.assign(n, Mat2::Identity());
    if (r.has("Q")) {
      const auto& q = r.raw("Q");
      if (!q.is_array() || q.size() != n) throw ConfigError("/lyapunov/Q", "expected one 2x2 matrix per subsystem");
      for (std::size_t i = 0; i < n; ++i) {
        const std::string p = "/lyapunov/Q/" + std::to_string(i);
        const auto& m = q[i];
        if (!m.is_array() || m.size() != 2 || !m[0].is_array() || !m[1].is_array() || m[0].size() != 2 ||
            m[1].size() != 2) {
          throw ConfigError(p, "expected [[q11, q12], [q21, q22]]");
        }
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            if (!m[a][b].is_number()) throw ConfigError(p, "entries must be numbers");
            e.Q[i](a, b) = m[a][b].get<double>();
          }
        if (e.Q[i](0, 1) != e.Q[i](1, 0)) throw ConfigError(p, "must be symmetric");
        if (!(e.Q[i](0, 0) > 0.0 && e.Q[i].determinant() > 0.0)) throw ConfigError(p, "must be positive definite");
      }
    }
    RL["Q"] = json::array();
    for (const auto& q : e.Q) RL["Q"].push_back({{q(0, 0), q(0, 1)}, {q(1, 0), q(1, 1)}});
    r.finish();
  }

  // metrics
  {
    json dummy = json::object();
    auto me = root.object("metrics");
    Section empty(dummy, "/metrics");
    Section& r = me ? *me : empty;
    json& RX = R["metrics"];
    e.metrics.tol = r.positive("tol", e.metrics.tol, RX);
    e.metrics.steady_window = r.positive("steady_window", e.metrics.steady_window, RX);
    r.finish();
  }
  root.finish();
  return e;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("/", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& ex) {
    throw ConfigError("/", std::string("invalid JSON: ") + ex.what());
  }
}

inline Experiment load_experiment(const std::string& path) { return parse_experiment(read_json_file(path)); }

}  // namespace gsto::io
