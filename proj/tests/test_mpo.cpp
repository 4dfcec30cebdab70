#include "doctest.h"

#include <cstdio>
#include <random>

#include "gibbsmpo/densela.hpp"
#include "gibbsmpo/mpo.hpp"
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

}  // namespace

TEST_CASE("dense round trip and identity") {
  Mat O = random_mat(27, 27, 1);
  MPO M = mpo_from_dense(O, 3, 3);
  M.check_shapes();
  CHECK(oracle::fro_rel(mpo_to_dense(M), O) < 1e-13);
  CHECK(M.bond_dims() == std::vector<int>{9, 9});
  CHECK((mpo_to_dense(mpo_identity(4, 2)) - Mat::Identity(16, 16)).norm() == 0.0);
}

TEST_CASE("product, adjoint, scale, trace and 2-norm against dense") {
  Mat A = random_mat(16, 16, 2), B = random_mat(16, 16, 3);
  MPO MA = mpo_from_dense(A, 4, 2), MB = mpo_from_dense(B, 4, 2);
  CHECK(oracle::fro_rel(mpo_to_dense(mpo_multiply(MA, MB)), A * B) < 1e-12);
  CHECK(oracle::fro_rel(mpo_to_dense(mpo_multiply_compress(MA, MB)), A * B) < 1e-12);
  CHECK(oracle::fro_rel(mpo_to_dense(mpo_adjoint(MA)), A.adjoint()) < 1e-13);
  CHECK(oracle::fro_rel(mpo_to_dense(mpo_scale(MA, cplx(0, 2))), cplx(0, 2) * A) < 1e-13);
  CHECK(std::abs(mpo_trace(MA) - A.trace()) < 1e-12 * A.norm());
  CHECK(mpo_norm2(MA) == doctest::Approx(A.norm()).epsilon(1e-12));
}

TEST_CASE("lossless compression of a redundant product keeps the operator") {
  LatticeModel m = load_model("preset=tfim n=6");
  Mat E = exact_exp(m, 0.5);
  MPO M = mpo_from_dense(E, 6, 2);
  MPO P = mpo_multiply(M, M);
  auto [C, rep] = mpo_compress(P);
  CHECK(oracle::fro_rel(mpo_to_dense(C), E * E) < 1e-11);
  CHECK(C.max_bond() < P.max_bond());
  CHECK(rep.relative_bound() < 1e-11);
}

TEST_CASE("lossy compression error is within the reported bound") {
  Mat O = random_mat(64, 64, 4);
  // make the cut spectra decay
  LatticeModel m = load_model("preset=tfim n=6");
  O = exact_exp(m, 1.5) + 1e-3 * O;
  MPO M = mpo_from_dense(O, 6, 2);
  auto [C, rep] = mpo_compress(M, CompressPolicy::lossy(4));
  CHECK(C.max_bond() <= 4);
  const double err = (mpo_to_dense(C) - O).norm();
  CHECK(err > 0.0);
  CHECK(err <= rep.global_bound * (1 + 1e-10));
  CHECK(err <= rep.sequential_bound * (1 + 1e-10));
  CHECK(rep.norm2 == doctest::Approx(O.norm()).epsilon(1e-12));
}

TEST_CASE("Schmidt spectra match the dense operator-Schmidt values") {
  LatticeModel m = load_model("preset=random n=5 d=2 seed=5");
  Mat E = exact_exp(m, 1.0);
  MPO M = mpo_from_dense(E, 5, 2);
  auto all = all_spectra(M);
  REQUIRE(all.size() == 4);
  for (int cut = 1; cut < 5; ++cut) {
    RVec ref = operator_schmidt_values(E, 5, 2, cut);
    const auto& s = all[cut - 1];
    CHECK(s.cut == cut);
    for (std::size_t k = 0; k < s.values.size() && k < 6; ++k)
      CHECK(std::abs(s.values[k] - ref(Eigen::Index(k))) < 1e-10 * ref(0));
    SchmidtSpectrum single = schmidt_spectrum(M, cut);
    CHECK(single.rank == s.rank);
  }
}

TEST_CASE("canonical forms") {
  MPO D = mpo_from_dense(random_mat(32, 32, 6), 5, 2);
  MPO M = mpo_multiply(D, D);  // raw product, no gauge
  MPO L = canonicalize(M, Canonical::Left);
  MPO R = canonicalize(M, Canonical::Right);
  CHECK(is_left_canonical(L, 4));
  CHECK(is_right_canonical(R, 1));
  CHECK_FALSE(is_left_canonical(M, 4));
  CHECK(oracle::fro_rel(mpo_to_dense(L), mpo_to_dense(M)) < 1e-12);
  CHECK(oracle::fro_rel(mpo_to_dense(R), mpo_to_dense(M)) < 1e-12);
}

TEST_CASE("tracing the tail equals the normalized partial trace") {
  Mat O = random_mat(32, 32, 7);
  MPO M = mpo_from_dense(O, 5, 2);
  Mat ref = trace_right(O, 5, 2, 3) / 4.0;
  CHECK(oracle::fro_rel(mpo_to_dense(mpo_trace_tail(M, 3)), ref) < 1e-12);
}

TEST_CASE("windowed product matches dense multiplication") {
  const int n = 6;
  Mat F1 = random_mat(8, 8, 8), F2 = random_mat(4, 4, 9), F3 = random_mat(8, 8, 10);
  WindowedProduct w(n, 2);
  w.apply_right(mpo_from_dense(F1, 3, 2), 0);
  w.apply_right(mpo_from_dense(F2, 2, 2), 2);
  w.apply_right(mpo_from_dense(F3, 3, 2), 3);
  Mat I4 = Mat::Identity(4, 4), I8 = Mat::Identity(8, 8);
  Mat D1 = Eigen::kroneckerProduct(F1, I8).eval();
  Mat D2 = Eigen::kroneckerProduct(I4, Eigen::kroneckerProduct(F2, I4).eval()).eval();
  Mat D3 = Eigen::kroneckerProduct(I8, F3).eval();
  CHECK(oracle::fro_rel(mpo_to_dense(w.finish()), D1 * D2 * D3) < 1e-11);
  CHECK_THROWS_AS(w.apply_right(mpo_from_dense(F1, 3, 2), 4), Error);
}

TEST_CASE("applying to a basis state gives the matching column") {
  Mat O = random_mat(27, 27, 11);
  MPO M = mpo_from_dense(O, 3, 3);
  Mps v = mpo_apply_basis(M, {2, 0, 1});
  const int idx = 2 * 9 + 0 * 3 + 1;
  CHECK((v.to_dense() - O.col(idx)).norm() < 1e-12 * O.norm());
  CHECK(v.norm() == doctest::Approx(O.col(idx).norm()));
  v.scale(1.0 / v.norm());
  CHECK(v.norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(mpo_apply_basis(M, {3, 0, 0}), Error);
}

TEST_CASE("MPO1 serialization round trip and corrupt input") {
  MPO M = mpo_from_dense(random_mat(16, 16, 12), 4, 2);
  auto bytes = mpo_serialize(M);
  MPO back = mpo_deserialize(bytes);
  REQUIRE(back.n == 4);
  for (int i = 0; i < 4; ++i) CHECK(back.A[i].data == M.A[i].data);

  const std::string path = "test_mpo_roundtrip.mpo1";
  mpo_save(M, path);
  CHECK(mpo_serialize(mpo_load(path)) == bytes);
  std::remove(path.c_str());

  auto cut = bytes;
  cut.resize(cut.size() - 5);
  CHECK_THROWS_AS(mpo_deserialize(cut), Error);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(mpo_deserialize(bad), Error);
  CHECK_THROWS_AS(mpo_load("/nonexistent/dir/x.mpo1"), Error);
}
