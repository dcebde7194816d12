// wpmcf: command-line driver for the warped-product mean curvature flow library.
//
//   wpmcf <subcommand> --config FILE [--out DIR] [--quiet] [--threads N]
//
// Exit codes: 0 success, 2 config error, 3 numerical abort, 4 internal error.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wpmcf/config.hpp"
#include "wpmcf/errors.hpp"
#include "wpmcf/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInternal = 4;

int dispatch(const std::string& sub, const wpmcf::ExperimentConfig& cfg, const wpmcf::RunContext& ctx) {
  using namespace wpmcf;
  if (sub == "check-conditions") {
    run_check_conditions(cfg, ctx);
  } else if (sub == "dss-build") {
    run_dss_build(cfg, ctx);
  } else if (sub == "run-barrier") {
    run_barrier(cfg, ctx);
  } else if (sub == "run-flow") {
    const FlowResult r = run_flow_experiment(cfg, ctx);
    if (r.run.outcome == FlowOutcome::graphicality_lost || r.run.outcome == FlowOutcome::domain_exit) {
      std::cerr << "run-flow: " << to_string(r.run.outcome) << ": " << r.run.message << "\n";
      return kExitNumerical;
    }
  } else if (sub == "validate-identities") {
    run_validate_identities(cfg, ctx);
  } else if (sub == "sweep") {
    run_sweep(cfg, ctx);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graphical mean curvature flow in warped products"};
  app.set_version_flag("--version", std::string(wpmcf::kVersion));
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
  int threads = 1;
  app.add_option("--config", config_path, "Config file (key = value text, or a manifest.json)")->required();
  app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
  app.add_flag("--quiet", quiet, "Suppress progress messages");
  app.add_option("--threads", threads, "Worker threads for sweep")->check(CLI::PositiveNumber);
  app.require_subcommand(1);
  for (const char* name :
       {"check-conditions", "dss-build", "run-barrier", "run-flow", "validate-identities", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
  }
  app.get_subcommand("check-conditions")->description("Certify the warp conditions on a probe grid; writes conditions.json");
  app.get_subcommand("dss-build")->description("Tabulate the de Sitter-Schwarzschild warp; writes dss_warp.csv");
  app.get_subcommand("run-barrier")->description("Solve the slice comparison ODEs; writes barrier.csv");
  app.get_subcommand("run-flow")->description("Run the flow; writes diagnostics.csv and summary.json");
  app.get_subcommand("validate-identities")->description("Static identity residuals at two resolutions");
  app.get_subcommand("sweep")->description("Run the flow over sweep.values; writes sweep_summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    wpmcf::ExperimentConfig cfg = wpmcf::parse_config_file(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const wpmcf::RunContext ctx{cfg.output_dir, quiet, threads};
    return dispatch(sub, cfg, ctx);
  } catch (const wpmcf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const wpmcf::DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const wpmcf::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
