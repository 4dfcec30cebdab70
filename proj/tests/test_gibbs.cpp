#include "doctest.h"

#include <cmath>

#include "gibbsmpo/densela.hpp"
#include "gibbsmpo/gibbs.hpp"
#include "oracle.hpp"

using namespace gibbsmpo;

namespace {

double schatten1(const Mat& O) {
  Eigen::JacobiSVD<Mat> s(O);
  return s.singularValues().sum();
}

}  // namespace

TEST_CASE("plan arithmetic") {
  LatticeModel m = load_model("preset=tfim n=16");
  Constants c = Constants::builtin();
  GibbsPlan p = plan(m, 1.0, 1e-3, c);
  const int q = int(std::ceil(1.0 / (2 * c.beta0_cap)));
  CHECK(p.q == q);
  CHECK(p.beta0 * 2 * p.q == doctest::Approx(1.0));
  CHECK(p.eps0 == doctest::Approx(1e-3 / (6.0 * q)));
  const double L = std::log(6.0 * 16 / p.eps0);
  CHECK(p.log_arg == doctest::Approx(L));
  CHECK(p.m == std::max(1, int(std::ceil(c.c1 * L))));
  CHECK(p.l0_formula == std::max(2, int(std::ceil(c.c0 * L))));
  CHECK(std::pow(2.0, 2 * p.l0 + 1) <= c.local_dim_cap);
  const double x = 3 * p.eps0 * q;
  CHECK(p.certified_bound() == doctest::Approx(x * std::exp(x)));
  CHECK(p.steps() == 2 * q);

  GibbsPlan z = plan(m, 0.0, 1e-3, c);
  CHECK(z.identity);

  GibbsPlan r = plan_real_time(m, -0.5, 1e-2, c);
  const int K = int(std::ceil(0.5 / c.beta0_cap));
  CHECK(r.q == K);
  CHECK(r.beta0 * K == doctest::Approx(-0.5));
  CHECK(r.eps0 == doctest::Approx(1e-2 / (2.0 * K)));

  CHECK_THROWS_AS(plan(m, -1.0, 1e-3, c), Error);
  CHECK_THROWS_AS(plan(m, 1.0, 0.0, c), Error);
  CHECK_THROWS_AS(plan(m, 1.0, 3.0, c), Error);
}

TEST_CASE("local dimension cap shrinks the block and warns") {
  LatticeModel m = load_model("preset=tfim n=8");
  Constants c = Constants::builtin();
  c.c0 = 1.0;
  c.local_dim_cap = 128;
  GibbsPlan p = plan(m, 1.0, 1e-6, c);
  CHECK(p.l0_reduced);
  CHECK(p.l0 == 3);
  CHECK_FALSE(p.warnings.empty());

  LatticeModel big = load_model("preset=random n=4 d=5 seed=1");
  CHECK_THROWS_AS(plan(big, 1.0, 1e-2, Constants::builtin()), Error);
}

TEST_CASE("high-temperature factor approximates e^{-beta0 H}") {
  LatticeModel m = load_model("preset=random n=7 d=2 seed=2");
  Constants c = Constants::builtin();
  GibbsPlan p = plan(m, 0.125, 1e-4, c);
  BlockDecomposition dec = decompose_blocks(m, p.l0);
  MPO M0 = high_temp_mpo(m, dec, p.beta0, p.m);
  CHECK(M0.n == m.n);
  Mat ref = oracle::expm(-p.beta0 * m.dense());
  Mat D = mpo_to_dense(M0);
  // ||M0 e^{beta0 H} - 1||_inf
  Mat step = D * oracle::expm(p.beta0 * m.dense()) - Mat::Identity(128, 128);
  Eigen::JacobiSVD<Mat> s(step);
  CHECK(s.singularValues()(0) <= p.eps0);
  CHECK(oracle::fro_rel(D, ref) < 1e-3);

  // real-time factor
  MPO U0 = high_temp_mpo(m, dec, cplx(0, 0.05), p.m);
  Mat U = oracle::expm(cplx(0, -0.05) * m.dense());
  CHECK(oracle::fro_rel(mpo_to_dense(U0), U) < 1e-4);
}

TEST_CASE("Gibbs MPO meets the certified bound in Schatten 1 and 2") {
  LatticeModel m = load_model("preset=tfim n=7 J=1 h=0.9");
  Constants c = Constants::builtin();
  for (double beta : {0.3, 1.0}) {
    const double eps = 1e-3;
    BuildResult r = build_gibbs_mpo(m, beta, eps, c, {0, false, true});
    Mat ref = oracle::expm(-beta * m.dense());
    Mat D = mpo_to_dense(r.mpo);
    const double cert = r.report.certified_bound;
    CHECK(schatten1(D - ref) / schatten1(ref) <= cert);
    CHECK((D - ref).norm() / ref.norm() <= cert);
    CHECK((D - D.adjoint()).norm() / D.norm() < 1e-8);
    REQUIRE(r.report.stages.size() >= 1);
    CHECK(r.report.stages.back().power == 2 * r.report.plan.q);
    CHECK(r.report.stages.back().log_sr.size() == 6);
  }
}

TEST_CASE("verification fills the oracle block") {
  LatticeModel m = load_model("preset=heisenberg n=6");
  BuildResult r = build_gibbs_mpo(m, 0.5, 1e-2, Constants::builtin(), {1, false, false});
  REQUIRE(r.report.oracle.has_value());
  CHECK(r.report.oracle->pass);
  CHECK(r.report.oracle->rel_err_p2 <= r.report.certified_bound);
  CHECK(r.report.oracle->min_eig >= r.report.oracle->positivity_floor);
}

TEST_CASE("beta = 0 returns the identity") {
  LatticeModel m = load_model("preset=tfim n=5");
  BuildResult r = build_gibbs_mpo(m, 0.0, 1e-2, Constants::builtin());
  CHECK((mpo_to_dense(r.mpo) - Mat::Identity(32, 32)).norm() < 1e-14);
  CHECK(r.report.certified_bound == 0.0);
}

TEST_CASE("real-time MPO against expm") {
  LatticeModel m = load_model("preset=tfim n=6 h=1.1");
  const double t = 0.7, eps = 1e-3;
  BuildResult r = real_time_mpo(m, t, eps, Constants::builtin(), {0, false, false});
  Mat U = oracle::expm(cplx(0, -t) * m.dense());
  Mat D = mpo_to_dense(r.mpo);
  Eigen::JacobiSVD<Mat> s(D - U);
  CHECK(s.singularValues()(0) <= r.report.certified_bound);
}

TEST_CASE("cut-local approximant") {
  LatticeModel m = load_model("preset=tfim n=8");
  auto [M, rep] = cut_local_approximant(m, 1.5, 4, 1e-2);
  Mat ref = oracle::expm(-1.5 * m.dense());
  const double err = (mpo_to_dense(M) - ref).norm() / ref.norm();
  CHECK(err == doctest::Approx(rep.rel_err_p2).epsilon(1e-6));
  CHECK(rep.degree > 0);
  CHECK(rep.rank > 0);
  CHECK(rep.exact_rank_at_err <= rep.exact_rank);
  CHECK(rep.taylor_rank_matched >= rep.rank);
  CHECK_THROWS_AS(cut_local_approximant(m, 1.5, 0, 1e-2), Error);
}

TEST_CASE("exhaustive MPS decomposition reproduces the density matrix") {
  LatticeModel m = load_model("preset=tfim n=5 h=0.7");
  const double beta = 1.0;
  auto samples = sample_mps_decomposition(m, beta, 1e-4, 1 << 20, 3, Constants::builtin());
  REQUIRE(samples.size() == 32);
  Mat rho = Mat::Zero(32, 32);
  double wsum = 0.0;
  for (const auto& s : samples) {
    Vec v = s.state.to_dense();
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    rho += s.weight * v * v.adjoint();
    wsum += s.weight;
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  Mat E = oracle::expm(-beta * m.dense());
  Mat ref = E / E.trace();
  CHECK(schatten1(rho - ref) < 1e-3);
}

TEST_CASE("sampled MPS decomposition is seeded") {
  LatticeModel m = load_model("preset=tfim n=6");
  auto a = sample_mps_decomposition(m, 0.5, 1e-2, 10, 17, Constants::builtin());
  auto b = sample_mps_decomposition(m, 0.5, 1e-2, 10, 17, Constants::builtin());
  REQUIRE(a.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(a[i].basis == b[i].basis);
    CHECK(a[i].weight == b[i].weight);
  }
  CHECK_THROWS_AS(sample_mps_decomposition(m, 0.5, 1e-2, 0, 1, Constants::builtin()), Error);
}
