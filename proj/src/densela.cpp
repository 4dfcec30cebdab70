#include "gibbsmpo/densela.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <random>

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace gibbsmpo {

namespace {

void check_cap(std::int64_t dim) {
  if (dim < 0 || dim > kOracleCap) fail(ErrorKind::ResourceCap, "dense oracle limited to d^n <= 4096");
}

// interleaved (ket, bra) index of k sites: sum_i (s_i d + t_i) (d^2)^{k-1-i}
std::vector<std::int64_t> interleave_table(int d, int k) {
  const std::int64_t D = ipow(d, k);
  std::vector<std::int64_t> tab(D * D);
  for (std::int64_t a = 0; a < D; ++a)
    for (std::int64_t b = 0; b < D; ++b) {
      std::int64_t r = 0, aa = a, bb = b, mul = 1;
      for (int i = 0; i < k; ++i) {
        r += ((aa % d) * d + (bb % d)) * mul;
        aa /= d;
        bb /= d;
        mul *= std::int64_t(d) * d;
      }
      tab[a * D + b] = r;
    }
  return tab;
}

}  // namespace

Eigh eigh(const Mat& H, bool vectors) {
  if (H.rows() != H.cols()) fail(ErrorKind::Validation, "eigh: matrix must be square");
  const lapack_int n = static_cast<lapack_int>(H.rows());
  Eigh r;
  r.values.resize(n);
  if (n == 0) return r;
  // zheevr: zheevd in some OpenBLAS builds returns wrong vectors for n >= 512
  Mat A = H;
  lapack_int found = 0;
  std::vector<lapack_int> support(2 * std::size_t(n));
  Mat Z(vectors ? n : 1, vectors ? n : 1);
  lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'A', 'L', n, A.data(), n, 0.0, 0.0, 0, 0,
                                   0.0, &found, r.values.data(), Z.data(), vectors ? n : 1, support.data());
  if (info != 0 || found != n) fail(ErrorKind::Validation, "eigh: zheevr failed with info " + std::to_string(info));
  if (vectors) r.vectors = std::move(Z);
  return r;
}

namespace {

// Values by QR iteration (zgesvd, no vectors), then the leading `keep` vector
// pairs by bisection and inverse iteration (zgesvdx). The divide-and-conquer
// drivers of the bundled LAPACK return wrong vectors on graded spectra.
Svd svd_core(const Mat& X, const std::function<int(const RVec&)>& keep) {
  const lapack_int m = static_cast<lapack_int>(X.rows()), n = static_cast<lapack_int>(X.cols());
  const lapack_int k = std::min(m, n);
  Svd r;
  r.s.resize(k);
  if (k == 0) {
    r.U.resize(m, 0);
    r.V.resize(n, 0);
    return r;
  }
  Mat A = X;
  {
    // zgesdd is fast but unreliable in some LAPACK builds; keep it only if
    // the factors are orthonormal and reproduce X up to the discarded tail
    Mat U(m, k), Vh(k, n);
    lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, A.data(), m, r.s.data(), U.data(), m, Vh.data(), k);
    if (info == 0 && r.s.allFinite()) {
      lapack_int want = keep ? static_cast<lapack_int>(keep(r.s)) : k;
      want = std::max<lapack_int>(1, std::min(want, k));
      const double xn = X.norm();
      const double tol = 64.0 * std::numeric_limits<double>::epsilon() * std::sqrt(double(std::max(m, n))) * xn;
      const double tail = r.s.tail(k - want).norm();
      Mat Uk = U.leftCols(want), Vk = Vh.topRows(want).adjoint();
      const Mat I = Mat::Identity(want, want);
      const double res = (X - Uk * r.s.head(want).cast<cplx>().asDiagonal() * Vk.adjoint()).norm();
      if ((Uk.adjoint() * Uk - I).cwiseAbs().maxCoeff() < 1e-12 && (Vk.adjoint() * Vk - I).cwiseAbs().maxCoeff() < 1e-12 &&
          std::abs(res - tail) <= tol) {
        r.U = std::move(Uk);
        r.V = std::move(Vk);
        return r;
      }
    }
    A = X;
  }
  std::vector<double> superb(static_cast<std::size_t>(std::max<lapack_int>(1, k - 1)));
  cplx dummy = 0.0;
  lapack_int info = LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'N', 'N', m, n, A.data(), m, r.s.data(), &dummy, 1, &dummy, 1,
                                   superb.data());
  if (info != 0) fail(ErrorKind::Validation, "svd: zgesvd failed with info " + std::to_string(info));
  lapack_int want = keep ? static_cast<lapack_int>(keep(r.s)) : k;
  want = std::max<lapack_int>(1, std::min(want, k));
  A = X;
  RVec s2(k);
  Mat U(m, want), Vh(want, n);
  std::vector<lapack_int> iwork(12 * static_cast<std::size_t>(k));
  lapack_int found = 0;
  info = LAPACKE_zgesvdx(LAPACK_COL_MAJOR, 'V', 'V', want == k ? 'A' : 'I', m, n, A.data(), m, 0.0, 0.0, 1, want,
                         &found, s2.data(), U.data(), m, Vh.data(), want, iwork.data());
  if (info != 0 || found != want)
    fail(ErrorKind::Validation, "svd: zgesvdx failed with info " + std::to_string(info));
  r.U = std::move(U);
  r.V = Vh.adjoint();
  return r;
}

// Thin Householder QR of a tall matrix: T = Q R, Q overwrites T.
Mat thin_qr(Mat& T) {
  const lapack_int m = static_cast<lapack_int>(T.rows()), n = static_cast<lapack_int>(T.cols());
  std::vector<cplx> tau(static_cast<std::size_t>(n));
  lapack_int info = LAPACKE_zgeqrf(LAPACK_COL_MAJOR, m, n, T.data(), m, tau.data());
  if (info != 0) fail(ErrorKind::Validation, "svd: zgeqrf failed with info " + std::to_string(info));
  Mat R = T.topRows(n).triangularView<Eigen::Upper>();
  info = LAPACKE_zungqr(LAPACK_COL_MAJOR, m, n, n, T.data(), m, tau.data());
  if (info != 0) fail(ErrorKind::Validation, "svd: zungqr failed with info " + std::to_string(info));
  return R;
}

}  // namespace

Svd svd_thin(const Mat& X, const std::function<int(const RVec&)>& keep) {
  const Eigen::Index m = X.rows(), n = X.cols();
  // strongly rectangular: reduce to a square core first
  if (n > 2 * m && m > 0) {
    Mat Q = X.adjoint();
    Mat R = thin_qr(Q);  // X = R^dag Q^dag
    Svd c = svd_core(R.adjoint(), keep);
    c.V = (Q * c.V).eval();
    return c;
  }
  if (m > 2 * n && n > 0) {
    Mat Q = X;
    Mat R = thin_qr(Q);
    Svd c = svd_core(R, keep);
    c.U = (Q * c.U).eval();
    return c;
  }
  return svd_core(X, keep);
}

Mat herm_exp(const Mat& H, cplx factor) {
  Eigh es = eigh(H);
  const RVec& e = es.values;
  Vec w(e.size());
  // stabilize the real part against overflow of the largest weight
  double shift = 0.0;
  if (factor.real() != 0.0) {
    shift = factor.real() < 0 ? e.minCoeff() : e.maxCoeff();
  }
  for (Eigen::Index i = 0; i < e.size(); ++i) w(i) = std::exp(factor * (e(i) - shift));
  Mat r = es.vectors * w.asDiagonal() * es.vectors.adjoint();
  return r * std::exp(factor * shift);
}

GibbsState exact_gibbs(const LatticeModel& model, double beta) {
  if (beta < 0) fail(ErrorKind::Validation, "beta must be nonnegative");
  check_cap(model.dim());
  Mat H = model.dense();
  Eigh es = eigh(H);
  GibbsState g;
  g.energies = es.values;
  const double e0 = g.energies(0);
  RVec w = (-beta * (g.energies.array() - e0)).exp();
  const double s = w.sum();
  g.log_Z = std::log(s) - beta * e0;
  g.Z = std::exp(g.log_Z);
  RVec p = w / s;
  g.rho.n = model.n;
  g.rho.d = model.d;
  g.rho.data = es.vectors * p.cast<cplx>().asDiagonal() * es.vectors.adjoint();
  g.rho.data = 0.5 * (g.rho.data + g.rho.data.adjoint()).eval();
  return g;
}

Mat exact_exp(const LatticeModel& model, double beta) {
  check_cap(model.dim());
  return herm_exp(model.dense(), cplx(-beta, 0.0));
}

Mat exact_unitary(const LatticeModel& model, double t) {
  check_cap(model.dim());
  return herm_exp(model.dense(), cplx(0.0, -t));
}

RVec singular_values(const Mat& O) {
  if (O.size() == 0) return RVec();
  Eigen::BDCSVD<Mat> svd(O);
  return svd.singularValues();
}

double schatten_norm_from_sv(const RVec& sv, double p) {
  if (sv.size() == 0) return 0.0;
  if (!(p >= 1.0)) fail(ErrorKind::Validation, "Schatten p must be >= 1");
  const double smax = sv.maxCoeff();
  if (smax == 0.0) return 0.0;
  if (std::isinf(p)) return smax;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    double s = sv(i);
    if (p == 1.0 && s < 1e-14 * smax) continue;
    acc += std::pow(s / smax, p);
  }
  return smax * std::pow(acc, 1.0 / p);
}

double schatten_norm(const Mat& O, double p) {
  if (p == 2.0) return O.norm();
  return schatten_norm_from_sv(singular_values(O), p);
}

double op_norm(const Mat& O) { return schatten_norm(O, kInf); }

Mat cut_reshape(const Mat& O, int n, int d, int cut) {
  if (cut < 0 || cut > n) fail(ErrorKind::Validation, "cut out of range");
  const std::int64_t DL = ipow(d, cut), DR = ipow(d, n - cut);
  auto tl = interleave_table(d, cut);
  auto tr = interleave_table(d, n - cut);
  Mat T(DL * DL, DR * DR);
  for (std::int64_t bL = 0; bL < DL; ++bL)
    for (std::int64_t bR = 0; bR < DR; ++bR) {
      const std::int64_t b = bL * DR + bR;
      for (std::int64_t aL = 0; aL < DL; ++aL) {
        const std::int64_t row = tl[aL * DL + bL];
        for (std::int64_t aR = 0; aR < DR; ++aR) T(row, tr[aR * DR + bR]) = O(aL * DR + aR, b);
      }
    }
  return T;
}

Mat uncut_reshape(const Mat& T, int n, int d, int cut) {
  const std::int64_t DL = ipow(d, cut), DR = ipow(d, n - cut);
  auto tl = interleave_table(d, cut);
  auto tr = interleave_table(d, n - cut);
  Mat O(DL * DR, DL * DR);
  for (std::int64_t bL = 0; bL < DL; ++bL)
    for (std::int64_t bR = 0; bR < DR; ++bR)
      for (std::int64_t aL = 0; aL < DL; ++aL)
        for (std::int64_t aR = 0; aR < DR; ++aR)
          O(aL * DR + aR, bL * DR + bR) = T(tl[aL * DL + bL], tr[aR * DR + bR]);
  return O;
}

RVec operator_schmidt_values(const Mat& O, int n, int d, int cut) {
  return singular_values(cut_reshape(O, n, d, cut));
}

Mat trace_right(const Mat& O, int n, int d, int cut) {
  const std::int64_t DL = ipow(d, cut), DR = ipow(d, n - cut);
  Mat r = Mat::Zero(DL, DL);
  for (std::int64_t a = 0; a < DL; ++a)
    for (std::int64_t b = 0; b < DL; ++b) {
      cplx s = 0.0;
      for (std::int64_t k = 0; k < DR; ++k) s += O(a * DR + k, b * DR + k);
      r(a, b) = s;
    }
  return r;
}

Mat trace_left(const Mat& O, int n, int d, int cut) {
  const std::int64_t DL = ipow(d, cut), DR = ipow(d, n - cut);
  Mat r = Mat::Zero(DR, DR);
  for (std::int64_t k = 0; k < DL; ++k) r += O.block(k * DR, k * DR, DR, DR);
  return r;
}

PowerLemmaReport power_lemma_check(const Mat& O, const Mat& Ot, int q, double p) {
  if (q < 1) fail(ErrorKind::Validation, "q must be >= 1");
  if (O.rows() != Ot.rows() || O.cols() != Ot.cols()) fail(ErrorKind::Validation, "shape mismatch");
  PowerLemmaReport r;
  r.q = q;
  r.p = p;
  const Mat diff = O - Ot;
  const double nO = schatten_norm(O, 2.0 * q * p);
  r.delta = nO > 0 ? schatten_norm(diff, 2.0 * q * p) / nO : 0.0;
  r.precondition = r.delta <= 1.0;

  const Mat P = O.adjoint() * O;
  const Mat Pt = Ot.adjoint() * Ot;
  Mat Pq = P, Ptq = Pt;
  for (int k = 1; k < q; ++k) {
    Pq = (Pq * P).eval();
    Ptq = (Ptq * Pt).eval();
  }
  const double nPq = schatten_norm(Pq, p);
  r.lhs = schatten_norm(Pq - Ptq, p);
  r.rhs = 3.0 * r.delta * q * std::exp(3.0 * r.delta * q) * nPq;
  r.pass = r.lhs <= r.rhs * (1.0 + 1e-10) + 1e-13 * nPq;

  const double nO2 = schatten_norm(O, 2.0 * p);
  r.delta_sq = nO2 > 0 ? schatten_norm(diff, 2.0 * p) / nO2 : 0.0;
  const double nP = schatten_norm(P, p);
  r.lhs_sq = schatten_norm(P - Pt, p);
  r.rhs_sq = 3.0 * r.delta_sq * nP;
  r.pass_sq = r.lhs_sq <= r.rhs_sq * (1.0 + 1e-10) + 1e-13 * nP;
  return r;
}

EckartYoungReport eckart_young_check(const Mat& O, int n, int d, int cut, int D, std::uint64_t seed,
                                     int competitors) {
  if (D < 1) fail(ErrorKind::Validation, "D must be >= 1");
  if (cut < 1 || cut >= n) fail(ErrorKind::Validation, "cut out of range");
  EckartYoungReport r;
  r.D_requested = D;
  const Mat T = cut_reshape(O, n, d, cut);
  const int maxrank = static_cast<int>(std::min(T.rows(), T.cols()));
  if (D > maxrank) {
    D = maxrank;
    r.clamped = true;
  }
  r.D = D;
  Eigen::JacobiSVD<Mat> svd(T, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVec& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-13 * smax) ++r.full_rank;
  for (Eigen::Index i = D; i < s.size(); ++i) r.tail += s(i) * s(i);
  const Mat U = svd.matrixU().leftCols(D);
  const Mat TD = U * s.head(D).cast<cplx>().asDiagonal() * svd.matrixV().leftCols(D).adjoint();
  r.truncation_residual = (T - TD).squaredNorm();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto gauss = [&](Eigen::Index rows, Eigen::Index cols) {
    Mat g(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        double re = nd(rng);
        double im = nd(rng);
        g(i, j) = cplx(re, im);
      }
    return g;
  };
  r.best_competitor = kInf;
  r.pass = true;
  const double tol = 1e-12 * T.squaredNorm() + 1e-300;
  for (int c = 0; c < competitors; ++c) {
    Mat comp;
    const int kind = c % 3;
    if (kind == 0) {
      // best approximation inside a perturbed dominant left subspace
      double eta = std::pow(10.0, -1.0 - 4.0 * (c / 3) / std::max(1, competitors / 3));
      Mat A = U + eta * gauss(U.rows(), D);
      Eigen::HouseholderQR<Mat> qr(A);
      Mat Q = qr.householderQ() * Mat::Identity(A.rows(), D);
      comp = Q * (Q.adjoint() * T);
    } else if (kind == 1) {
      Mat A = gauss(T.rows(), D);
      Eigen::HouseholderQR<Mat> qr(A);
      Mat Q = qr.householderQ() * Mat::Identity(A.rows(), D);
      comp = Q * (Q.adjoint() * T);
    } else {
      // perturbed factors of the truncation itself
      double eta = 1e-3 * (1 + c);
      Mat A = U * s.head(D).cast<cplx>().asDiagonal() + eta * gauss(U.rows(), D);
      Mat B = svd.matrixV().leftCols(D) + eta * gauss(T.cols(), D);
      comp = A * B.adjoint();
    }
    const double res = (T - comp).squaredNorm();
    r.best_competitor = std::min(r.best_competitor, res);
    ++r.competitors;
    if (r.truncation_residual > res + tol || r.tail > res + tol) r.pass = false;
  }
  if (std::abs(r.truncation_residual - r.tail) > 1e-10 * T.squaredNorm() + 1e-300) r.pass = false;
  return r;
}

}  // namespace gibbsmpo
