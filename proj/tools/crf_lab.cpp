// Conformal-flow frequency laboratory: runs scenarios end to end, audits the
// discrete identities, measures refinement slopes, and reports eigenvalues.
// Exit codes: 0 pass, 1 assertion failure, 2 configuration error, 3 runtime
// abort.
#include <CLI11.hpp>

#include "crf/scenario.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string output;
  bool plots = false;
  bool plot_stamp = false;
  bool list_presets = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config_path,
                  "Path to a key = value config file");
  cmd->add_option("--preset", args.preset, "Bundled scenario preset name");
  cmd->add_option("-o,--output", args.output, "Output directory override");
  cmd->add_flag("--plots", args.plots, "Also write plots.svg (run only)");
  cmd->add_flag("--plot-stamp", args.plot_stamp,
                "Embed the build stamp in plots (off by default)");
  cmd->add_flag("--list-presets", args.list_presets,
                "List bundled presets and exit");
}

crf::ScenarioConfig load(const CommonArgs& args) {
  crf::ScenarioConfig cfg;
  if (!args.preset.empty())
    cfg = crf::scenario_preset(args.preset);
  else if (!args.config_path.empty())
    cfg = crf::parse_scenario_file(args.config_path);
  else
    throw crf::ScenarioParseError("need a config file or --preset");
  if (!args.output.empty()) cfg.output = args.output;
  return cfg;
}

int dispatch(const std::string& command, const CommonArgs& args) {
  if (args.list_presets) {
    for (const auto& [name, text] : crf::scenario_presets())
      std::printf("%s\n", name.c_str());
    return 0;
  }
  crf::ScenarioConfig cfg;
  try {
    cfg = load(args);
  } catch (const crf::ScenarioParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  crf::ScenarioResult result;
  try {
    if (command == "run")
      result = crf::run_scenario(cfg);
    else if (command == "audit")
      result = crf::audit_scenario(cfg);
    else if (command == "converge")
      result = crf::converge_scenario(cfg);
    else
      result = crf::eigen_scenario(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime abort: %s\n", e.what());
    // flush a partial report so the failure is machine-readable
    try {
      result.cfg = cfg;
      result.command = command;
      result.verdict = std::string("aborted: ") + e.what();
      crf::write_artifacts(result);
    } catch (...) {
    }
    return 3;
  }
  try {
    crf::write_artifacts(result, args.plots,
                         args.plot_stamp ? CRF_BUILD_STAMP : "");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "artifact error: %s\n", e.what());
    return 3;
  }
  for (const crf::CheckRow& c : result.checks)
    std::printf("%-28s %s  residual %.3e  tolerance %.3e%s%s\n",
                c.name.c_str(),
                c.skipped ? "skip" : (c.pass ? "pass" : "FAIL"), c.residual,
                c.tolerance, c.note.empty() ? "" : "  ", c.note.c_str());
  std::printf("verdict: %s\n", result.verdict.c_str());
  return result.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conformal-flow parabolic frequency laboratory"};
  app.require_subcommand(1);
  std::array<CommonArgs, 4> args;
  const char* names[4] = {"run", "audit", "converge", "eigen"};
  const char* descs[4] = {
      "Full pipeline: flow, conjugate density, heat pass, frequency checks",
      "Static identity audits on the configured metric and density",
      "Grid-refinement slope table for the discretization order",
      "Principal eigenvalue of the drifting Laplacian"};
  std::array<CLI::App*, 4> cmds{};
  for (int i = 0; i < 4; ++i) {
    cmds[i] = app.add_subcommand(names[i], descs[i]);
    add_common(cmds[i], args[i]);
  }
  CLI11_PARSE(app, argc, argv);
  for (int i = 0; i < 4; ++i)
    if (cmds[i]->parsed()) return dispatch(names[i], args[i]);
  return 2;
}
