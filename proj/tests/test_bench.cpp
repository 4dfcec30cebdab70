#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gibbsmpo/bench.hpp"
#include "gibbsmpo/densela.hpp"

using namespace gibbsmpo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("gibbsmpo_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("grid parsing") {
  auto g = parse_grid("0:1:5");
  REQUIRE(g.size() == 5);
  CHECK(g[1] == doctest::Approx(0.25));
  auto l = parse_grid("1:100:3:log");
  REQUIRE(l.size() == 3);
  CHECK(l[1] == doctest::Approx(10.0));
  CHECK(parse_grid("0.5, 2,8") == std::vector<double>{0.5, 2, 8});
  CHECK(parse_grid("").empty());
  CHECK_THROWS_AS(parse_grid("1:2"), Error);
  CHECK_THROWS_AS(parse_grid("0:1:3:log"), Error);
  CHECK_THROWS_AS(parse_grid("1:2:x"), Error);
  CHECK_THROWS_AS(parse_grid("1,a"), Error);
}

TEST_CASE("run spec JSON round trip") {
  RunSpec s;
  s.subcommand = "scan";
  s.model = "preset=tfim n=8";
  s.beta = 0.75;
  s.eps = 1e-3;
  s.axis = "n";
  s.grid = "8,16";
  s.alphas = {1, 2, 3};
  s.seed = 99;
  s.jobs = 2;
  s.overrides = {{"c0", "0.3"}};
  RunSpec b = RunSpec::from_json(s.to_json());
  CHECK(b.to_json() == s.to_json());
  CHECK(*b.beta == 0.75);
  CHECK_FALSE(b.t.has_value());
  nlohmann::json wrapped;
  wrapped["run_spec"] = s.to_json();
  CHECK(RunSpec::from_json(wrapped).to_json() == s.to_json());
}

TEST_CASE("max log bond of a product operator is zero") {
  LatticeModel m = load_model("preset=tfim n=4 J=0");
  MPO M = mpo_from_dense(exact_exp(m, 1.0), 4, 2);
  CHECK(max_log_bond_at(M, 1e-6) == doctest::Approx(0.0));
  LatticeModel m2 = load_model("preset=tfim n=4");
  MPO M2 = mpo_from_dense(exact_exp(m2, 1.0), 4, 2);
  CHECK(max_log_bond_at(M2, 1e-6) > 0.0);
  CHECK(max_log_bond_at(M2, 1e-1) <= max_log_bond_at(M2, 1e-6));
}

TEST_CASE("number formatting") {
  CHECK(fmt_num(0.1) == "0.1");
  CHECK(fmt_num(1e-12) == "1e-12");
  CHECK(fmt_num(3.0) == "3");
}

TEST_CASE("build writes artifacts and replays byte-identically") {
  RunSpec s;
  s.subcommand = "build";
  s.model = "preset=tfim n=6 h=0.9";
  s.beta = 0.5;
  s.eps = 1e-3;
  s.out = scratch("build_a").string();
  std::ostringstream log, err;
  REQUIRE(run_command_guarded(s, log, err) == 0);
  CHECK(fs::exists(fs::path(s.out) / "result.mpo1"));
  CHECK(fs::exists(fs::path(s.out) / "report.json"));
  REQUIRE(fs::exists(fs::path(s.out) / "verify.json"));
  auto v = nlohmann::json::parse(slurp(fs::path(s.out) / "verify.json"));
  CHECK(v["pass"].get<bool>());

  auto saved = nlohmann::json::parse(slurp(fs::path(s.out) / "report.json"));
  RunSpec r = RunSpec::from_json(saved);
  r.out = scratch("build_b").string();
  REQUIRE(run_command_guarded(r, log, err) == 0);
  CHECK(slurp(fs::path(s.out) / "result.mpo1") == slurp(fs::path(r.out) / "result.mpo1"));
  fs::remove_all(s.out);
  fs::remove_all(r.out);
}

TEST_CASE("error kinds map to exit codes") {
  std::ostringstream log, err;
  RunSpec s;
  s.subcommand = "build";
  s.model = "preset=tfim n=6";
  s.out = scratch("err").string();
  CHECK(run_command_guarded(s, log, err) == 2);  // neither beta nor t
  s.beta = 1.0;
  s.model = "/no/such/model.cfg";
  CHECK(run_command_guarded(s, log, err) == exit_code(ErrorKind::Io));
  s.model = "preset=random n=4 d=6";
  CHECK(run_command_guarded(s, log, err) == exit_code(ErrorKind::ResourceCap));
  s.subcommand = "bogus";
  s.model = "preset=tfim n=6";
  CHECK(run_command_guarded(s, log, err) == 2);
  CHECK(err.str().find("error[") != std::string::npos);
  fs::remove_all(s.out);
}

TEST_CASE("cheb-frontier writes a fitted CSV") {
  RunSpec s;
  s.subcommand = "cheb-frontier";
  s.grid = "100,400";
  s.deltas = {1e-3};
  s.out = scratch("cheb").string();
  std::ostringstream log, err;
  REQUIRE(run_command_guarded(s, log, err) == 0);
  const std::string csv = slurp(fs::path(s.out) / "cheb_frontier.csv");
  CHECK(csv.rfind("b[1],delta[abs]", 0) == 0);
  CHECK(csv.find("# delta=0.001") != std::string::npos);
  fs::remove_all(s.out);
}
