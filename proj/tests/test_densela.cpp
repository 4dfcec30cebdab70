#include "doctest.h"

#include <random>

#include "gibbsmpo/densela.hpp"
#include "oracle.hpp"

using namespace gibbsmpo;

namespace {

Mat random_mat(int r, int c, unsigned seed) {
  std::mt19937 g(seed);
  std::normal_distribution<double> nd;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = cplx(nd(g), nd(g));
  return m;
}

Mat random_herm(int n, unsigned seed) {
  Mat a = random_mat(n, n, seed);
  return (a + a.adjoint()) * 0.5;
}

}  // namespace

TEST_CASE("exact Gibbs state against the matrix exponential") {
  LatticeModel m = load_model("preset=tfim n=5 h=0.8");
  const double beta = 1.7;
  GibbsState g = exact_gibbs(m, beta);
  Mat E = oracle::expm(-beta * m.dense());
  const double Z = E.trace().real();
  CHECK(g.Z == doctest::Approx(Z).epsilon(1e-12));
  CHECK(g.log_Z == doctest::Approx(std::log(Z)).epsilon(1e-12));
  CHECK(oracle::fro_rel(g.rho.data, E / Z) < 1e-12);
  CHECK(oracle::fro_rel(exact_exp(m, beta), E) < 1e-12);
}

TEST_CASE("real-time propagator is unitary and matches expm") {
  LatticeModel m = load_model("preset=random n=4 d=2 seed=1");
  Mat U = exact_unitary(m, 2.3);
  Mat ref = oracle::expm(cplx(0, -2.3) * m.dense());
  CHECK(oracle::fro_rel(U, ref) < 1e-12);
  CHECK((U.adjoint() * U - Mat::Identity(16, 16)).norm() < 1e-12);
}

TEST_CASE("eigh agrees with Eigen's solver above the size where zheevd misbehaved") {
  Mat H = random_herm(520, 11);
  Eigh e = eigh(H);
  Eigen::SelfAdjointEigenSolver<Mat> ref(H, Eigen::EigenvaluesOnly);
  CHECK((e.values - ref.eigenvalues()).cwiseAbs().maxCoeff() < 1e-9);
  Mat R = H * e.vectors - e.vectors * e.values.cast<cplx>().asDiagonal();
  CHECK(R.norm() < 1e-9 * H.norm());
  CHECK(eigh(H, false).vectors.size() == 0);
}

TEST_CASE("Schatten norms") {
  RMat D = RMat::Zero(4, 4);
  D.diagonal() << 3, 2, 1, 0.5;
  Mat U = random_mat(4, 4, 2).householderQr().householderQ();
  Mat V = random_mat(4, 4, 3).householderQr().householderQ();
  Mat O = U * D.cast<cplx>() * V.adjoint();
  CHECK(schatten_norm(O, 1) == doctest::Approx(6.5));
  CHECK(schatten_norm(O, 2) == doctest::Approx(O.norm()));
  CHECK(schatten_norm(O, 3) == doctest::Approx(std::cbrt(27 + 8 + 1 + 0.125)));
  CHECK(op_norm(O) == doctest::Approx(3.0));
}

TEST_CASE("operator Schmidt reshape on a product operator") {
  const int n = 4, d = 2, cut = 1;
  Mat A = random_mat(2, 2, 4), B = random_mat(8, 8, 5);
  Mat O = Eigen::kroneckerProduct(A, B).eval();
  RVec mu = operator_schmidt_values(O, n, d, cut);
  CHECK(mu(0) == doctest::Approx(A.norm() * B.norm()));
  CHECK(mu.tail(mu.size() - 1).norm() < 1e-12 * mu(0));

  Mat G = random_mat(16, 16, 6);
  for (int c = 0; c <= n; ++c) {
    CHECK((uncut_reshape(cut_reshape(G, n, d, c), n, d, c) - G).norm() < 1e-13);
    CHECK(operator_schmidt_values(G, n, d, c).norm() == doctest::Approx(G.norm()));
  }
  CHECK_THROWS_AS(cut_reshape(G, n, d, 5), Error);
}

TEST_CASE("operator Schmidt rank of a sum of k products is k") {
  const int n = 4;
  Mat O = Mat::Zero(16, 16);
  for (unsigned k = 0; k < 3; ++k) O += Eigen::kroneckerProduct(random_mat(4, 4, 10 + k), random_mat(4, 4, 20 + k)).eval();
  RVec mu = operator_schmidt_values(O, n, 2, 2);
  CHECK(mu(2) > 1e-6 * mu(0));
  CHECK(mu(3) < 1e-12 * mu(0));
}

TEST_CASE("partial traces of a product operator") {
  Mat A = random_mat(4, 4, 7), B = random_mat(2, 2, 8);
  Mat O = Eigen::kroneckerProduct(A, B).eval();
  CHECK((trace_right(O, 3, 2, 2) - B.trace() * A).norm() < 1e-12);
  CHECK((trace_left(O, 3, 2, 2) - A.trace() * B).norm() < 1e-12);
}

TEST_CASE("power lemma and Eckart-Young checks pass on generic inputs") {
  LatticeModel m = load_model("preset=tfim n=4");
  Mat O = exact_exp(m, 0.3);
  Mat Ot = O + 1e-4 * random_herm(16, 9);
  for (int q : {1, 2, 3}) {
    PowerLemmaReport r = power_lemma_check(O, Ot, q, 1.0);
    CHECK(r.precondition);
    CHECK(r.pass);
    CHECK(r.pass_sq);
  }
  EckartYoungReport e = eckart_young_check(exact_exp(m, 1.0), 4, 2, 2, 3, 42, 20);
  CHECK(e.pass);
  CHECK(e.tail == doctest::Approx(e.truncation_residual).epsilon(1e-8));
  CHECK(e.best_competitor >= e.truncation_residual);
}
