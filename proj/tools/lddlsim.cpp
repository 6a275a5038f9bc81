#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "lddl/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = lddl::cli;
  CLI::App app{"Grid dynamics with data-center load injection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::version());

  cli::GlobalOptions g;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed override");
  app.add_option("--out-dir", out_dir, "Output directory");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  std::string config, out = "trace.csv";
  auto* emulate = app.add_subcommand("emulate", "Inference workload emulation");
  emulate->add_option("config", config, "Emulator config JSON")->required();
  emulate->add_option("-o,--output", out, "Trace CSV (relative to --out-dir)");

  std::string scenario;
  cli::SimulateOptions sim_opt;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario");
  simulate->add_option("scenario", scenario, "Scenario JSON")->required();
  simulate->add_option("--rocof-window", sim_opt.rocof_window,
                       "RoCoF window in output samples");

  auto* analyze = app.add_subcommand("analyze", "Stability analytics");
  analyze->require_subcommand(1);

  cli::TransientOptions tr;
  std::string input;
  double coupling_scale = -1.0;
  auto* transient = analyze->add_subcommand("transient", "Energy-flow metrics");
  transient->add_option("--input", input, "Directory written by simulate")
      ->required();
  transient->add_option("--window", tr.window.window, "Window length, s");
  transient->add_option("--weight", tr.window.weight, "Coupling weight w");
  transient->add_option("--coupling-scale", coupling_scale,
                        "Coupling multiplier (default 1/nominal load)");
  transient->add_option("--snapshot-times", tr.snapshot_times,
                        "Times for E_d snapshots")
      ->delimiter(',');

  cli::SmallSignalOptions ss;
  std::vector<double> ramp;
  double r0 = -0.25, r1 = 0.15, dr = 0.05;
  auto* small = analyze->add_subcommand("smallsignal", "Snapshot sweep");
  small->add_option("--scenario", scenario, "Scenario JSON")->required();
  small->add_option("--ramp", ramp, "Explicit ramp points")->delimiter(',');
  small->add_option("--ramp-start", r0, "First relative load variation");
  small->add_option("--ramp-stop", r1, "Last relative load variation");
  small->add_option("--ramp-step", dr, "Ramp increment");
  small->add_option("--zeta-min", ss.thresholds.zeta_min, "Damping threshold");
  small->add_option("--m-min", ss.thresholds.m_min, "Abscissa threshold");

  std::string file;
  auto* validate = app.add_subcommand("validate", "Check a model or scenario");
  validate->add_option("file", file, "Model or scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    g.quiet = true;
    g.out_dir = out_dir;
    return cli::cmd_usage_error("usage", e.what(), g);
  }
  if (*seed_opt) g.seed = seed;
  g.out_dir = out_dir;

  if (*emulate) return cli::cmd_emulate(config, out, g);
  if (*simulate) return cli::cmd_simulate(scenario, g, sim_opt);
  if (*transient) {
    tr.input = input;
    if (coupling_scale >= 0.0) tr.window.coupling_scale = coupling_scale;
    return cli::cmd_analyze_transient(tr, g);
  }
  if (*small) {
    ss.scenario = scenario;
    try {
      ss.ramp = ramp.empty() ? cli::make_ramp(r0, r1, dr) : ramp;
    } catch (const std::exception& e) {
      return cli::cmd_usage_error("analyze smallsignal", e.what(), g);
    }
    return cli::cmd_analyze_smallsignal(ss, g);
  }
  return cli::cmd_validate(file, g);
}
