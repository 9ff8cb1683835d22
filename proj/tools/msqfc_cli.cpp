// Command-line scenario runner.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "msqfc/scenario.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  std::size_t jobs = 1;
  bool quiet = false;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "scenario file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
  cmd->add_option("--seed", f.seed, "RNG seed (overrides the config)");
  cmd->add_flag("--strict", f.strict, "promote accuracy warnings to errors");
  cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("-q,--quiet", f.quiet, "no progress messages");
}

int run(const Flags& f, std::optional<msqfc::ScenarioKind> kind) {
  msqfc::RunOptions opts;
  opts.config_path = f.config;
  if (!f.out.empty()) opts.out = f.out;
  opts.seed = f.seed;
  opts.strict = f.strict;
  opts.jobs = f.jobs;
  opts.expected_kind = kind;
  if (!f.quiet) opts.log = &std::cerr;
  const msqfc::RunOutcome r = msqfc::run_scenario(opts);
  if (!r.error.is_null()) {
    std::cerr << r.error.dump(2) << '\n';
  } else if (!f.quiet) {
    std::cerr << "wrote " << (r.out_dir / "report.json").string() << '\n';
  }
  return r.exit_code;
}

int validate(const Flags& f) {
  try {
    const msqfc::ScenarioConfig cfg = msqfc::load_config(f.config);
    std::cout << f.config << ": ok (" << msqfc::to_string(cfg.kind) << ")\n";
    return msqfc::exit_code::ok;
  } catch (const std::exception& e) {
    const int code = msqfc::detail::classify(e);
    std::cerr << msqfc::detail::error_record(e, code).dump(2) << '\n';
    return code;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal quantum frequency conversion simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", msqfc::kVersion);

  Flags sim, opt, tomo, rot, val;
  add_flags(app.add_subcommand("simulate", "propagate one signal/pump pair"), sim);
  add_flags(app.add_subcommand("optimize", "random-walk pump optimization"), opt);
  add_flags(app.add_subcommand("tomography", "pump x signal crosstalk matrix"), tomo);
  add_flags(app.add_subcommand("rotate", "HG mask rotation sweep"), rot);
  auto* v = app.add_subcommand("validate", "check a scenario file against the schema");
  v->add_option("--config", val.config, "scenario file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : msqfc::exit_code::validation;
  }

  using K = msqfc::ScenarioKind;
  if (app.got_subcommand("simulate")) return run(sim, K::simulate);
  if (app.got_subcommand("optimize")) return run(opt, K::optimize);
  if (app.got_subcommand("tomography")) return run(tomo, K::tomography);
  if (app.got_subcommand("rotate")) return run(rot, K::rotate);
  return validate(val);
}
