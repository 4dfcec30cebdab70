#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gibbsmpo/bench.hpp"

using namespace gibbsmpo;

int main(int argc, char** argv) {
  CLI::App app{"gibbsmpo: MPO approximations of Gibbs states and diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();

  RunSpec spec;
  double beta = 0.0, t = 0.0;
  std::vector<std::string> overrides;
  std::string spec_path;

  app.add_option("--model", spec.model, "model config path or inline 'key=value ...' text");
  auto* beta_opt = app.add_option("--beta", beta, "inverse temperature");
  auto* t_opt = app.add_option("--t", t, "real time");
  app.add_option("--eps", spec.eps, "target relative error")->capture_default_str();
  app.add_option("--cut", spec.cut, "cut index (sites [0,cut) form L)");
  app.add_option("--axis", spec.axis, "scan axis: beta, eps, n or t");
  app.add_option("--grid", spec.grid, "a:b:steps[:log] or comma list");
  app.add_option("--beta-grid", spec.beta_grid, "randomwalk imaginary-time grid");
  app.add_option("--alpha", spec.alphas, "Renyi indices")->delimiter(',');
  app.add_option("--delta", spec.deltas, "cheb-frontier error targets")->delimiter(',');
  auto* out_opt = app.add_option("--out", spec.out, "output directory")->capture_default_str();
  app.add_option("--seed", spec.seed, "RNG seed")->capture_default_str();
  app.add_option("--jobs", spec.jobs, "worker threads for scans")->capture_default_str();
  app.add_option("--reps", spec.reps, "timing repetitions per scan point")->capture_default_str();
  app.add_option("--count", spec.count, "sample-mps draws (0 = exhaustive)")->capture_default_str();
  app.add_option("--R", spec.R, "randomwalk half-width")->capture_default_str();
  app.add_option("--verify", spec.verify, "-1 auto, 0 off, 1 on")->capture_default_str();
  app.add_flag("--stages", spec.stages, "write stage_{k}.mpo1");
  app.add_option("--override", overrides, "constant override key=value");

  for (const char* name : {"build", "scan", "calibrate", "randomwalk", "sample-mps", "mi", "cheb-frontier"})
    app.add_subcommand(name, "")->fallthrough();
  auto* replay = app.add_subcommand("replay", "rerun a saved run spec");
  replay->add_option("--spec", spec_path, "JSON file holding a run spec")->required();
  replay->fallthrough();

  app.get_subcommand("build")->description("build the MPO, write result.mpo1, report.json, verify.json");
  app.get_subcommand("scan")->description("sweep one axis and write scan_<axis>.csv");
  app.get_subcommand("calibrate")->description("fit c0, c1, c_f, C' and write constants.txt");
  app.get_subcommand("randomwalk")->description("tight-binding spreading demo, tb.csv");
  app.get_subcommand("sample-mps")->description("MPS decomposition of the Gibbs state, samples.csv");
  app.get_subcommand("mi")->description("mutual information and purification entropies, mi.csv");
  app.get_subcommand("cheb-frontier")->description("Chebyshev degree frontier, cheb_frontier.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (replay->parsed()) {
    const std::string out_override = spec.out;
    std::ifstream f(spec_path);
    if (!f) {
      std::cerr << "error[io]: cannot read " << spec_path << "\n";
      return 2;
    }
    try {
      spec = RunSpec::from_json(nlohmann::json::parse(f));
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error[validation]: " << e.what() << "\n";
      return 2;
    } catch (const Error& e) {
      std::cerr << "error[" << kind_name(e.kind()) << "]: " << e.what() << "\n";
      return exit_code(e.kind());
    }
    if (out_opt->count()) spec.out = out_override;
    return run_command_guarded(spec, std::cout, std::cerr);
  }

  spec.subcommand = app.get_subcommands().front()->get_name();
  if (beta_opt->count()) spec.beta = beta;
  if (t_opt->count()) spec.t = t;
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error[validation]: --override expects key=value, got '" << kv << "'\n";
      return 2;
    }
    spec.overrides.push_back({kv.substr(0, eq), kv.substr(eq + 1)});
  }
  return run_command_guarded(spec, std::cout, std::cerr);
}
