#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "gsto/io/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generalized super-twisting observer experiments"};
  app.require_subcommand(1);

  gsto::io::CommandOptions opt;
  std::string observer;
  for (const char* name : {"simulate", "compare", "verify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory")->required();
    sub->add_flag("--svg", opt.svg, "also write SVG plots");
    sub->add_option("--observer", observer, "override the observer mode")->check(CLI::IsMember({"gsto", "hgo"}));
    sub->callback([&opt, name] { opt.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gsto::io::exit_code::kConfig;
  }
  if (!observer.empty()) opt.observer = observer == "hgo" ? gsto::ObserverMode::HGO : gsto::ObserverMode::GSTO;

  const gsto::io::Logger log;
  const int code = gsto::io::run_command(opt, log);
  log.info("exit code " + std::to_string(code));
  return code;
}
