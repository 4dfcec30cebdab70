#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gibbsmpo/constants.hpp"
#include "gibbsmpo/gibbs.hpp"

namespace gibbsmpo {

struct RunSpec {
  std::string subcommand;
  std::string model;  // config path, or inline "key=value ..." text
  std::optional<double> beta;
  std::optional<double> t;
  double eps = 1e-2;
  int cut = -1;  // -1: all cuts / mid-cut depending on the command
  std::string axis;
  std::string grid;
  std::string beta_grid;  // randomwalk imaginary-time grid
  std::vector<double> alphas{1.0, 2.0};
  std::vector<double> deltas;  // cheb-frontier
  std::string out = ".";
  std::uint64_t seed = 0;
  int jobs = 1;
  int reps = 3;        // timing repetitions per scan point
  std::int64_t count = 0;  // sample-mps: 0 means exhaustive
  int R = 500;         // randomwalk half-width
  int verify = -1;     // -1 auto, 0 off, 1 on
  bool stages = false; // build: write stage_{k}.mpo1
  std::vector<std::pair<std::string, std::string>> overrides;

  nlohmann::json to_json() const;
  static RunSpec from_json(const nlohmann::json& j);
};

// "a:b:steps" (inclusive, linear), "a:b:steps:log", or "v1,v2,...".
std::vector<double> parse_grid(const std::string& text);

LatticeModel load_model_spec(const std::string& model);
Constants constants_for(const RunSpec& spec);

// log of the smallest per-cut rank whose discarded weight is <= eps^2 ||M||_2^2,
// maximized over cuts
double max_log_bond_at(const MPO& M, double eps);

nlohmann::json report_json(const BuildReport& r);

// CSV cell formatting shared by every writer
std::string fmt_num(double x);

// Runs one subcommand, writing artifacts under spec.out and a short log to
// `log`. Returns the process exit code; module errors propagate as Error.
int run_command(const RunSpec& spec, std::ostream& log);

// Wraps run_command with the error -> exit-code mapping.
int run_command_guarded(const RunSpec& spec, std::ostream& log, std::ostream& err);

}  // namespace gibbsmpo
