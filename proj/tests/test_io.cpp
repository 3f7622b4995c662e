#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "gsto/benchmarks.hpp"
#include "gsto/io/commands.hpp"
#include "gsto/io/config.hpp"
#include "gsto/io/csv.hpp"
#include "gsto/io/manifest.hpp"

namespace fs = std::filesystem;
using gsto::io::json;

namespace {

fs::path config_dir() {
  const char* d = std::getenv("GSTO_CONFIG_DIR");
  return d ? fs::path(d) : fs::path(GSTO_SOURCE_DIR) / "configs";
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gsto_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

json base_config(const std::string& file) { return gsto::io::read_json_file((config_dir() / file).string()); }

fs::path write_config(const fs::path& dir, const json& j) {
  fs::create_directories(dir);
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

struct Quiet {
  std::ostringstream sink;
  gsto::io::Logger log{gsto::io::LogLevel::Error, sink};
};

int run(const std::string& cmd, const fs::path& cfg, const fs::path& out, Quiet& q,
        std::optional<gsto::ObserverMode> mode = std::nullopt) {
  gsto::io::CommandOptions o;
  o.command = cmd;
  o.config_path = cfg.string();
  o.out_dir = out.string();
  o.observer = mode;
  return gsto::io::run_command(o, q.log);
}

json read_json(const fs::path& p) { return json::parse(gsto::io::read_file(p)); }

}  // namespace

TEST(Csv, NumberRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int k = 0; k < 20000; ++k) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(gsto::io::parse_double(gsto::io::format_double(v)), v);
  }
  EXPECT_EQ(gsto::io::format_double(0.1), "0.1");
  EXPECT_EQ(gsto::io::format_double(1e-300), "1e-300");
  EXPECT_THROW(gsto::io::parse_double("1.0x"), gsto::Error);
}

TEST(Csv, TrajectoryRoundTrip) {
  const auto b = gsto::bench::synthetic_benchmark({.t_end = 2.0});
  const auto tr = gsto::integrate(b.system, gsto::make_observer(b.system, b.gains), b.sim);
  const gsto::Mat V = gsto::Mat::Zero(static_cast<Eigen::Index>(tr.samples()), 2);
  std::stringstream ss;
  gsto::io::write_csv(ss, gsto::io::trajectory_table(tr, V));
  EXPECT_EQ(ss.str().find('\r'), std::string::npos);
  const auto back = gsto::io::trajectory_from_table(gsto::io::read_csv(ss));
  EXPECT_EQ(back.times, tr.times);
  EXPECT_EQ(back.x, tr.x);
  EXPECT_EQ(back.xhat, tr.xhat);
  EXPECT_EQ(back.y_meas, tr.y_meas);
}

TEST(Csv, RejectsMalformed) {
  std::stringstream bad("a,b\n1,2\n3\n");
  EXPECT_THROW(gsto::io::read_csv(bad), gsto::Error);
  std::stringstream nan("a\nfoo\n");
  EXPECT_THROW(gsto::io::read_csv(nan), gsto::Error);
}

TEST(Manifest, Sha256KnownVectors) {
  EXPECT_EQ(gsto::io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(gsto::io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, DefaultsResolve) {
  const auto e = gsto::io::parse_experiment(base_config("linear.json"));
  EXPECT_EQ(e.kind, gsto::io::SystemKind::Linear);
  EXPECT_EQ(e.sim.t_end, 20.0);
  EXPECT_EQ(e.sim.record_stride, 10u);
  EXPECT_EQ(e.metrics.tol, 1e-4);
  EXPECT_EQ(e.resolved["schema"], "gsto-config/1");
  EXPECT_TRUE(e.resolved["observer"].contains("gains"));
  // Resolved config parses to the same experiment.
  const auto again = gsto::io::parse_experiment(e.resolved);
  EXPECT_EQ(again.resolved, e.resolved);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* f : {"larvae.json", "larvae_noisy.json", "synthetic.json", "linear.json"}) {
    EXPECT_NO_THROW(gsto::io::load_experiment((config_dir() / f).string())) << f;
  }
  const auto e = gsto::io::load_experiment((config_dir() / "larvae.json").string());
  const auto c = gsto::larvae::reference_config();
  EXPECT_EQ(e.sim.x0, c.sim.x0);
  EXPECT_EQ(e.sim.xhat0, c.sim.xhat0);
  EXPECT_EQ(e.sim.dt, c.sim.dt);
  EXPECT_EQ(e.sim.t_end, c.sim.t_end);
  EXPECT_EQ(e.gains.sub[1].gamma, 0.5);
  EXPECT_TRUE(gsto::io::load_experiment((config_dir() / "larvae_noisy.json").string()).sim.noise.has_value());
}

TEST(Config, ErrorsCarryPath) {
  auto expect_path = [](json j, const std::string& path) {
    try {
      gsto::io::parse_experiment(j);
      FAIL() << "expected ConfigError at " << path;
    } catch (const gsto::ConfigError& e) {
      EXPECT_EQ(e.path(), path);
    }
  };
  const json base = base_config("linear.json");
  json j = base;
  j["schema"] = "other/1";
  expect_path(j, "/schema");
  j = base;
  j["simulation"]["dt"] = -1.0;
  expect_path(j, "/simulation/dt");
  j = base;
  j["simulation"]["bogus"] = 1;
  expect_path(j, "/simulation/bogus");
  j = base;
  j["system"]["kind"] = "reactor";
  expect_path(j, "/system/kind");
  j = base;
  j["simulation"]["x0"] = {1, 2, 3};
  expect_path(j, "/simulation/x0");
  j = base;
  j["observer"] = {{"gains", {{{"l1", 1}, {"l2", 1}, {"gamma", 1}, {"mu", {1, 1}}}}}};
  expect_path(j, "/observer/gains");
}

TEST(Config, ModeOverride) {
  auto e = gsto::io::parse_experiment(base_config("linear.json"));
  gsto::io::apply_mode(e, gsto::ObserverMode::HGO);
  for (const auto& s : e.gains.sub) EXPECT_EQ(s.mu.mu1, 0.0);
  EXPECT_EQ(e.resolved["observer"]["mode"], "hgo");
  EXPECT_THROW(gsto::io::apply_mode(e, gsto::ObserverMode::GSTO), gsto::ConfigError);
}

TEST(Commands, SimulateWritesManifestAndIsReproducible) {
  Quiet q;
  const fs::path d = fresh_dir("sim");
  const fs::path a = d / "a", b = d / "b";
  const fs::path cfg = (config_dir() / "linear.json");
  ASSERT_EQ(run("simulate", cfg, a, q), 0) << q.sink.str();
  ASSERT_EQ(run("simulate", cfg, b, q), 0) << q.sink.str();

  const json m = read_json(a / "manifest.json");
  EXPECT_EQ(m["schema"], "gsto-manifest/1");
  EXPECT_EQ(m["exit_code"], 0);
  std::set<std::string> listed;
  for (const auto& f : m["files"]) {
    const std::string p = f["path"];
    listed.insert(p);
    EXPECT_EQ(gsto::io::sha256_hex(gsto::io::read_file(a / p)), f["sha256"]) << p;
    EXPECT_EQ(gsto::io::read_file(a / p), gsto::io::read_file(b / p)) << p;
  }
  for (const char* f : {"resolved_config.json", "trajectory.csv", "diagnostics.csv", "summary.json"}) {
    EXPECT_TRUE(listed.count(f)) << f;
  }
  EXPECT_FALSE(listed.count("manifest.json"));
  EXPECT_EQ(m["config_sha256"], read_json(b / "manifest.json")["config_sha256"]);

  const json s = read_json(a / "summary.json");
  EXPECT_EQ(s["observer"], "gsto");
  EXPECT_TRUE(s.contains("convergence_time"));
  fs::remove_all(d);
}

TEST(Commands, ConfigErrorExitCode) {
  Quiet q;
  const fs::path d = fresh_dir("cfgerr");
  json j = base_config("linear.json");
  j["simulation"]["dt"] = "fast";
  EXPECT_EQ(run("simulate", write_config(d, j), d / "out", q), 2);
  EXPECT_NE(q.sink.str().find("/simulation/dt"), std::string::npos) << q.sink.str();
  EXPECT_EQ(run("simulate", d / "missing.json", d / "out2", q), 2);  // unreadable config is a config error
  fs::remove_all(d);
}

TEST(Commands, NonHurwitzGainIsInfeasible) {
  Quiet q;
  const fs::path d = fresh_dir("infeasible");
  json j = base_config("linear.json");
  j["observer"] = {{"gains", json::array({{{"l1", 0.0}, {"l2", 1}, {"gamma", 4}, {"mu", {1, 1}}},
                                          {{"l1", 2.0}, {"l2", 1}, {"gamma", 4}, {"mu", {1, 1}}}})}};
  EXPECT_EQ(run("verify", write_config(d, j), d / "out", q), 4);
  EXPECT_TRUE(fs::exists(d / "out" / "manifest.json"));
  fs::remove_all(d);
}

TEST(Commands, VerifySyntheticPasses) {
  Quiet q;
  const fs::path d = fresh_dir("verify");
  json j = base_config("synthetic.json");
  j["simulation"]["t_end"] = 40.0;
  ASSERT_EQ(run("verify", write_config(d, j), d / "out", q), 0) << q.sink.str();
  const json r = read_json(d / "out" / "report.json");
  EXPECT_EQ(r["decrease"]["violations"], 0);
  EXPECT_EQ(r["bounds"]["pointwise_violations"], 0);
  EXPECT_TRUE(r["bounds"]["cascade_zero"].get<bool>());
  EXPECT_TRUE(r["feasibility"]["feasible_at_configured_gamma"].get<bool>());
  EXPECT_TRUE(fs::exists(d / "out" / "lyapunov.csv"));
  fs::remove_all(d);
}

TEST(Commands, CompareWritesBothRuns) {
  Quiet q;
  const fs::path d = fresh_dir("compare");
  json j = base_config("synthetic.json");
  j["simulation"]["t_end"] = 20.0;
  ASSERT_EQ(run("compare", write_config(d, j), d / "out", q), 0) << q.sink.str();
  for (const char* f : {"trajectory_gsto.csv", "trajectory_hgo.csv", "comparison.csv", "summary.json"}) {
    EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
  }
  const json s = read_json(d / "out" / "summary.json");
  EXPECT_EQ(s["gsto"]["observer"], "gsto");
  EXPECT_EQ(s["hgo"]["observer"], "hgo");
  EXPECT_TRUE(s["gsto_better"].get<bool>());
  EXPECT_GT(s["steady_state_ratio_mean"].get<double>(), 1.0);
  fs::remove_all(d);
}

TEST(Commands, SvgOutput) {
  Quiet q;
  const fs::path d = fresh_dir("svg");
  gsto::io::CommandOptions o{"simulate", (config_dir() / "linear.json").string(), (d / "out").string(), true, {}};
  ASSERT_EQ(gsto::io::run_command(o, q.log), 0);
  const std::string svg = gsto::io::read_file(d / "out" / "outputs.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  fs::remove_all(d);
}

TEST(Cli, ExitCodes) {
  const char* env = std::getenv("GSTO_CLI");
  const std::string cli = env ? env : GSTO_CLI_PATH;
  const fs::path d = fresh_dir("cli");
  fs::create_directories(d);
  auto sh = [&](const std::string& args) {
    const int rc = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  EXPECT_EQ(sh("--help"), 0);
  EXPECT_EQ(sh("simulate --out " + d.string()), 2);
  EXPECT_EQ(sh("frobnicate"), 2);
  const std::string cfg = (config_dir() / "linear.json").string();
  EXPECT_EQ(sh("simulate --config " + cfg + " --out " + (d / "s").string()), 0);
  EXPECT_TRUE(fs::exists(d / "s" / "manifest.json"));
  EXPECT_EQ(sh("simulate --config " + cfg + " --out " + (d / "h").string() + " --observer hgo"), 0);
  EXPECT_EQ(read_json(d / "h" / "summary.json")["observer"], "hgo");
  fs::remove_all(d);
}
