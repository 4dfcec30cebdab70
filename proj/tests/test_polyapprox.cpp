#include "doctest.h"

#include <cmath>

#include "gibbsmpo/model.hpp"
#include "gibbsmpo/polyapprox.hpp"
#include "oracle.hpp"

using namespace gibbsmpo;

namespace {

// e^{-x} on [0, b]: c_r = (2 - [r == 0]) e^{-b/2} (-1)^r I_r(b/2)
double bessel_coeff(double b, int r) {
  double c = std::exp(-b / 2) * std::cyl_bessel_i(double(r), b / 2);
  if (r > 0) c *= 2.0;
  return (r % 2) ? -c : c;
}

}  // namespace

TEST_CASE("Taylor coefficients and evaluation") {
  TaylorPoly p = taylor_poly(12);
  CHECK(p.degree == 12);
  CHECK(p.coeffs[5] == doctest::Approx(1.0 / 120));
  const cplx x(0.3, -0.2);
  CHECK(std::abs(eval_taylor(p, x) - std::exp(x)) < 1e-12);
}

TEST_CASE("Chebyshev coefficients match the modified-Bessel closed form") {
  for (double b : {0.5, 3.0, 17.5, 80.0}) {
    ChebyshevExpansion e = cheb_exp_coeffs(b, 30);
    CHECK(e.path == "quadrature");
    for (int r = 0; r <= 30; ++r) CHECK(std::abs(e.coeffs[r] - bessel_coeff(b, r)) < 1e-13);
  }
}

TEST_CASE("walk kernel is the one-step Bessel distribution") {
  WalkKernel k = walk_kernel(32);
  for (int dl = -10; dl <= 10; ++dl)
    CHECK(k.at(dl) == doctest::Approx(std::exp(-0.5) * std::cyl_bessel_i(double(std::abs(dl)), 0.5)).epsilon(1e-12));
  CHECK(k.total() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(k.max_asymmetry() < 1e-16);
  // variance of the symmetric walk: sum delta^2 e^{-1/2} I_|delta|(1/2) = 1/2
  CHECK(k.variance() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(walk_kernel(4), Error);
}

TEST_CASE("walk path agrees with quadrature for integer b") {
  for (int b : {1, 4, 9}) {
    ChebyshevExpansion w = cheb_exp_coeffs_walk(b, 20);
    ChebyshevExpansion q = cheb_exp_coeffs(b, 20);
    for (int r = 0; r <= 20; ++r) CHECK(std::abs(w.coeffs[r] - q.coeffs[r]) < 1e-12);
  }
}

TEST_CASE("truncated expansion error and degree search") {
  const double b = 20.0;
  ChebyshevExpansion e = cheb_exp_coeffs(b, 25);
  double worst = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double x = b * i / 2000.0;
    worst = std::max(worst, std::abs(eval_cheb(e, x) - std::exp(-x)));
  }
  CHECK(cheb_sup_error(e) == doctest::Approx(worst).epsilon(1e-3));

  DegreeResult r = required_degree(b, 1e-8);
  CHECK(r.sup_error <= 1e-8);
  CHECK(cheb_sup_error(cheb_exp_coeffs(b, r.degree - 1)) > 1e-8);
  CHECK(r.formula == doctest::Approx(degree_shape(b, 1e-8)));
  CHECK(required_degree(b, 2.0).degenerate);
  CHECK_THROWS_AS(required_degree(b, 0.0), Error);
}

TEST_CASE("degree grows like sqrt(b) at fixed delta") {
  const int m1 = required_degree(100.0, 1e-6).degree;
  const int m4 = required_degree(400.0, 1e-6).degree;
  CHECK(double(m4) / m1 > 1.6);
  CHECK(double(m4) / m1 < 2.4);
}

TEST_CASE("matrix polynomial evaluation") {
  LatticeModel m = load_model("preset=tfim n=4");
  Mat H = m.dense();
  const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues()(0);
  Mat A = H - lmin * Mat::Identity(16, 16);

  Mat T = eval_poly_matrix(taylor_poly(30), A, -0.4);
  CHECK(oracle::fro_rel(T, oracle::expm(-0.4 * A)) < 1e-12);
  Mat Tc = eval_poly_matrix(taylor_poly(30), A, cplx(0, -0.4));
  CHECK(oracle::fro_rel(Tc, oracle::expm(cplx(0, -0.4) * A)) < 1e-12);

  const double beta = 2.0;
  SpectrumCheck sc = check_cheb_spectrum(A, beta, 30.0);
  CHECK(sc.ok);
  ChebyshevExpansion e = cheb_exp_coeffs(30.0, 40);
  Mat C = eval_poly_matrix(e, A, beta);
  CHECK((C - oracle::expm(-beta * A)).norm() < 1e-9);
  CHECK_FALSE(check_cheb_spectrum(A, beta, 1.0).ok);
}
