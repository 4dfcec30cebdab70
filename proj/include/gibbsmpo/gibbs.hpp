#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gibbsmpo/constants.hpp"
#include "gibbsmpo/model.hpp"
#include "gibbsmpo/mpo.hpp"

namespace gibbsmpo {

struct GibbsPlan {
  bool real_time = false;
  double beta = 0.0;   // or |t| for real time
  double t = 0.0;      // signed time (real time only)
  double eps = 0.0;
  double beta0 = 0.0;  // per-step parameter (t0 for real time)
  int q = 0;           // imaginary: beta = 2 q beta0; real: K = q steps
  double eps0 = 0.0;
  double log_arg = 0.0;  // log(6n / eps0)
  int l0 = 2;
  int m = 1;
  int l0_formula = 2;
  bool l0_reduced = false;
  bool identity = false;
  std::vector<std::string> warnings;
  Constants constants;

  int steps() const { return real_time ? q : 2 * q; }
  double certified_bound() const;
};

GibbsPlan plan(const LatticeModel& model, double beta, double eps, const Constants& c = Constants::from_env());
GibbsPlan plan_real_time(const LatticeModel& model, double t, double eps, const Constants& c = Constants::from_env());

// M ~ e^{-z H} for |z| <= cap; z = beta0 or i t0.
MPO high_temp_mpo(const LatticeModel& model, const BlockDecomposition& dec, cplx z, int m);
MPO high_temp_mpo(const LatticeModel& model, const BlockDecomposition& dec, double beta0, int m);

struct StageInfo {
  int stage = 0;
  int power = 1;  // number of M factors in this stage
  std::vector<int> bonds;
  std::vector<double> log_sr;  // log of measured Schmidt rank per cut
  int max_bond = 1;
  double seconds = 0.0;
  double log_rank_bound = 0.0;
};

struct OracleCheck {
  double step_error = 0.0;  // ||M_0 e^{z H} - 1||_inf
  double rel_err_p1 = 0.0, rel_err_p2 = 0.0, rel_err_pinf = 0.0;
  double hermiticity = 0.0;  // ||M - M^dag||_2 / ||M||_2
  double min_eig = 0.0;
  double positivity_floor = 0.0;  // -eps ||e^{-beta H}||_inf
  double unitarity = 0.0;         // ||M^dag M - 1||_inf (real time)
  bool pass = false;
};

struct BuildReport {
  GibbsPlan plan;
  int n = 0, d = 2;
  std::vector<StageInfo> stages;
  double certified_bound = 0.0;
  double prop4_shape = 0.0;  // sqrt(log(n/eps0)) log log(n/eps0)
  double q_eps_shape = 0.0;  // max(beta, sqrt(beta L)) log(beta L)
  double c_fit = 0.0;        // log(max bond) / q_eps_shape
  double seconds_factors = 0.0;
  double seconds_power = 0.0;
  double seconds_total = 0.0;
  std::optional<OracleCheck> oracle;
  std::vector<std::string> warnings;
};

struct BuildOptions {
  int verify = -1;  // -1 auto (d^n <= 1024), 0 off, 1 on
  bool keep_stages = false;
  bool want_spectra = true;
};

struct BuildResult {
  MPO mpo;
  BuildReport report;
  std::vector<MPO> stage_mpos;  // when keep_stages
};

double log_rank_bound(double c_prime, int power, int m);

// (M^dag M)^q with stage bookkeeping; M0 must come from the same plan.
BuildResult power_to_target(const MPO& M0, const GibbsPlan& p, const BuildOptions& opt = {});
BuildResult build_gibbs_mpo(const LatticeModel& model, double beta, double eps, const Constants& c,
                            const BuildOptions& opt = {});
BuildResult real_time_mpo(const LatticeModel& model, double t, double eps, const Constants& c,
                          const BuildOptions& opt = {});
// fill report.oracle against the dense exponential
void verify_build(const LatticeModel& model, const MPO& M0, BuildResult& r);

struct CutLocalReport {
  int cut = 0;
  int window_first = 0, window_sites = 0;
  double b = 0.0;
  double lambda_min = 0.0;
  int degree = 0;
  double sup_error = 0.0;
  bool degenerate = false;
  int rank = 0;              // rank of the returned operator at the cut
  int core_rank = 0;         // rank of the window polynomial alone
  int exact_rank = 0;        // numerical rank of e^{-beta H}
  int exact_rank_at_err = 0; // optimal truncation rank of e^{-beta H} at rel_err_p2
  double rel_err_p2 = 0.0;
  int taylor_degree_same = 0;      // Taylor surrogate degree matched to `degree`
  double taylor_err_same = 0.0;
  int taylor_degree_matched = 0;   // smallest Taylor degree reaching rel_err_p2
  int taylor_rank_matched = 0;
  std::string note;
};

std::pair<MPO, CutLocalReport> cut_local_approximant(const LatticeModel& model, double beta, int cut, double delta,
                                                     int window_half = -1);

struct MpsSample {
  std::vector<int> basis;
  double weight = 0.0;  // p_i (importance-weighted in sampled mode)
  Mps state;            // normalized
};

// Pulls samples lazily. Exhaustive when count == d^n.
class MpsDecompositionStream {
 public:
  MpsDecompositionStream(const LatticeModel& model, double beta, double eps, std::int64_t count, std::uint64_t seed,
                         const Constants& c);
  std::optional<MpsSample> next();
  bool exhaustive() const { return exhaustive_; }
  const MPO& half_mpo() const { return half_; }
  const BuildReport& half_report() const { return report_; }
  double norm2_sq() const { return norm2_sq_; }

 private:
  MPO half_;
  BuildReport report_;
  double norm2_sq_ = 0.0;
  std::int64_t count_ = 0, emitted_ = 0, total_ = 0;
  bool exhaustive_ = false;
  std::mt19937_64 rng_;
  int n_ = 0, d_ = 2;
};

std::vector<MpsSample> sample_mps_decomposition(const LatticeModel& model, double beta, double eps, std::int64_t count,
                                                std::uint64_t seed, const Constants& c);

}  // namespace gibbsmpo
