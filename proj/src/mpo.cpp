#include "gibbsmpo/mpo.hpp"

#include <algorithm>
#include <array>
#include <iterator>
#include <utility>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gibbsmpo/densela.hpp"

namespace gibbsmpo {

namespace {

constexpr double kZipCut = 1e-15;
constexpr std::int64_t kDenseTailCap = 1024;

// T.left_view = Q R; T <- Q, returns R.
Mat qr_left(SiteTensor& T) {
  ConstRowMap lv = std::as_const(T).left_view();
  const Eigen::Index rows = lv.rows(), cols = lv.cols();
  const Eigen::Index k = std::min(rows, cols);
  Eigen::HouseholderQR<Mat> qr{Mat(lv)};
  Mat Q = qr.householderQ() * Mat::Identity(rows, k);
  Mat R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  SiteTensor out(T.Dl, T.d, static_cast<int>(k));
  out.left_view() = Q;
  T = std::move(out);
  return R;
}

// T.right_view = L Q with orthonormal rows of Q; T <- Q, returns L.
Mat lq_right(SiteTensor& T) {
  ConstRowMap rv = std::as_const(T).right_view();
  const Eigen::Index rows = rv.rows(), cols = rv.cols();
  const Eigen::Index k = std::min(rows, cols);
  Eigen::HouseholderQR<Mat> qr{Mat(rv.adjoint())};
  Mat Q = qr.householderQ() * Mat::Identity(cols, k);
  Mat R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  SiteTensor out(static_cast<int>(k), T.d, T.Dr);
  out.right_view() = Q.adjoint();
  T = std::move(out);
  return R.adjoint();
}

// next.right_view <- R * next.right_view
void absorb_into_next(const Mat& R, SiteTensor& next) {
  RowMat nv = R * next.right_view();
  SiteTensor out(static_cast<int>(R.rows()), next.d, next.Dr);
  out.right_view() = nv;
  next = std::move(out);
}

// prev.left_view <- prev.left_view * L
void absorb_into_prev(SiteTensor& prev, const Mat& L) {
  RowMat nv = prev.left_view() * L;
  SiteTensor out(prev.Dl, prev.d, static_cast<int>(L.cols()));
  out.left_view() = nv;
  prev = std::move(out);
}

// Make the first significant entry of each kept left singular vector real and
// nonnegative, compensating in V.
void fix_gauge(Mat& U, Mat& V, Eigen::Index k) {
  for (Eigen::Index j = 0; j < k; ++j) {
    const double cmax = U.col(j).cwiseAbs().maxCoeff();
    if (cmax == 0.0) continue;
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      if (std::abs(U(i, j)) > 1e-8 * cmax) {
        cplx ph = U(i, j) / std::abs(U(i, j));
        U.col(j) *= std::conj(ph);
        V.col(j) *= std::conj(ph);
        break;
      }
    }
  }
}

struct SvdSplit {
  Mat U;   // rows x k, already scaled by S when requested
  Mat Vh;  // k x cols
  RVec s;  // all singular values
  int k = 0;
};

// Keep count chosen by `choose` from the full spectrum.
template <class Choose>
SvdSplit svd_split(const Mat& X, Choose choose) {
  Svd svd = svd_thin(X, [&](const RVec& s) { return choose(s); });
  SvdSplit out;
  out.s = svd.s;
  const int k = static_cast<int>(svd.U.cols());
  Mat U = std::move(svd.U), V = std::move(svd.V);
  fix_gauge(U, V, k);
  out.U = U;
  out.Vh = V.adjoint();
  out.k = k;
  return out;
}

int count_above(const RVec& s, double rel) {
  if (s.size() == 0) return 0;
  const double smax = s(0);
  int k = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel * smax) ++k;
  return std::max(k, 1);
}

void left_qr_sweep(MPO& M, int from, int to) {
  for (int i = from; i < to; ++i) {
    Mat R = qr_left(M.A[i]);
    absorb_into_next(R, M.A[i + 1]);
  }
}

void right_lq_sweep(MPO& M, int from, int to) {
  for (int i = from; i > to; --i) {
    Mat L = lq_right(M.A[i]);
    absorb_into_prev(M.A[i - 1], L);
  }
}

// Right-to-left SVD sweep over sites [to+1, from]; values at cut i go to
// spectra[i - 1] when given.
template <class Choose>
void right_svd_sweep(MPO& M, int from, int to, Choose choose, std::vector<RVec>* spectra,
                     std::vector<int>* kept = nullptr) {
  for (int i = from; i > to; --i) {
    SiteTensor& T = M.A[i];
    SvdSplit sp = svd_split(Mat(T.right_view()), [&](const RVec& s) { return choose(i, s); });
    SiteTensor out(sp.k, T.d, T.Dr);
    out.right_view() = sp.Vh;
    T = std::move(out);
    Mat US = sp.U * sp.s.head(sp.k).cast<cplx>().asDiagonal();
    absorb_into_prev(M.A[i - 1], US);
    if (spectra) (*spectra)[i - 1] = sp.s;
    if (kept) (*kept)[i - 1] = sp.k;
  }
}

void check_geometry(const MPO& A, const MPO& B) {
  if (A.n != B.n || A.d != B.d) fail(ErrorKind::Validation, "MPO geometry mismatch");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xff));
}

}  // namespace

std::vector<int> MPO::bond_dims() const {
  std::vector<int> b;
  for (int i = 0; i + 1 < n; ++i) b.push_back(A[i].Dr);
  return b;
}

int MPO::max_bond() const {
  int m = 1;
  for (int v : bond_dims()) m = std::max(m, v);
  return m;
}

void MPO::check_shapes() const {
  if (static_cast<int>(A.size()) != n) fail(ErrorKind::Validation, "MPO: tensor count != n");
  for (int i = 0; i < n; ++i) {
    if (A[i].d != d) fail(ErrorKind::Validation, "MPO: physical dimension mismatch");
    if (A[i].data.size() != std::size_t(A[i].Dl) * d * d * A[i].Dr)
      fail(ErrorKind::Validation, "MPO: tensor payload size mismatch");
    if (i + 1 < n && A[i].Dr != A[i + 1].Dl) fail(ErrorKind::Validation, "MPO: bond chain mismatch");
  }
  if (n > 0 && (A[0].Dl != 1 || A[n - 1].Dr != 1)) fail(ErrorKind::Validation, "MPO: boundary bonds must be 1");
}

MPO mpo_identity(int n, int d) {
  MPO M;
  M.n = n;
  M.d = d;
  for (int i = 0; i < n; ++i) {
    SiteTensor T(1, d, 1);
    for (int s = 0; s < d; ++s) T(0, s, s, 0) = 1.0;
    M.A.push_back(std::move(T));
  }
  M.canon = Canonical::None;
  return M;
}

MPO mpo_from_dense(const Mat& O, int n, int d, double rel_cut) {
  const std::int64_t D = ipow(d, n);
  if (D < 0 || D > kOracleCap) fail(ErrorKind::ResourceCap, "mpo_from_dense limited to d^n <= 4096");
  if (O.rows() != D || O.cols() != D) fail(ErrorKind::Validation, "mpo_from_dense: shape does not match d^n");
  Mat psi = cut_reshape(O, n, d, n);  // interleaved (s0 t0 s1 t1 ...) column
  MPO M;
  M.n = n;
  M.d = d;
  const std::int64_t dd = std::int64_t(d) * d;
  std::int64_t rest = psi.rows();
  RowMat cur = Eigen::Map<RowMat>(psi.data(), 1, rest);
  int k = 1;
  for (int i = 0; i < n - 1; ++i) {
    rest /= dd;
    Mat X = Eigen::Map<RowMat>(cur.data(), k * dd, rest);
    SvdSplit sp = svd_split(X, [&](const RVec& s) { return count_above(s, rel_cut); });
    SiteTensor T(k, d, sp.k);
    T.left_view() = sp.U;
    M.A.push_back(std::move(T));
    cur = sp.s.head(sp.k).cast<cplx>().asDiagonal() * sp.Vh;
    k = sp.k;
  }
  SiteTensor T(k, d, 1);
  T.left_view() = Eigen::Map<RowMat>(cur.data(), k * dd, 1);
  M.A.push_back(std::move(T));
  M.canon = Canonical::Left;
  return M;
}

Mat mpo_to_dense(const MPO& M) {
  const std::int64_t D = ipow(M.d, M.n);
  if (D < 0 || D > kOracleCap) fail(ErrorKind::ResourceCap, "mpo_to_dense limited to d^n <= 4096");
  RowMat V = RowMat::Ones(1, 1);
  const int dd = M.d * M.d;
  for (int i = 0; i < M.n; ++i) {
    const SiteTensor& T = M.A[i];
    RowMat W = V * T.right_view();  // P x (dd * Dr)
    V = Eigen::Map<RowMat>(W.data(), W.rows() * dd, T.Dr);
  }
  Mat psi = V;
  return uncut_reshape(psi, M.n, M.d, M.n);
}

MPO mpo_multiply(const MPO& A, const MPO& B) {
  check_geometry(A, B);
  MPO C;
  C.n = A.n;
  C.d = A.d;
  const int d = A.d;
  for (int i = 0; i < A.n; ++i) {
    const SiteTensor& a = A.A[i];
    const SiteTensor& b = B.A[i];
    SiteTensor c(a.Dl * b.Dl, d, a.Dr * b.Dr);
    for (int la = 0; la < a.Dl; ++la)
      for (int lb = 0; lb < b.Dl; ++lb)
        for (int s = 0; s < d; ++s)
          for (int t = 0; t < d; ++t)
            for (int ra = 0; ra < a.Dr; ++ra)
              for (int rb = 0; rb < b.Dr; ++rb) {
                cplx acc = 0.0;
                for (int u = 0; u < d; ++u) acc += a(la, s, u, ra) * b(lb, u, t, rb);
                c(la * b.Dl + lb, s, t, ra * b.Dr + rb) = acc;
              }
    C.A.push_back(std::move(c));
  }
  return C;
}

MPO mpo_adjoint(const MPO& M) {
  MPO R = M;
  for (int i = 0; i < M.n; ++i) {
    const SiteTensor& a = M.A[i];
    SiteTensor& b = R.A[i];
    for (int l = 0; l < a.Dl; ++l)
      for (int s = 0; s < a.d; ++s)
        for (int t = 0; t < a.d; ++t)
          for (int r = 0; r < a.Dr; ++r) b(l, s, t, r) = std::conj(a(l, t, s, r));
  }
  return R;
}

MPO mpo_scale(const MPO& M, cplx f) {
  MPO R = M;
  if (R.n == 0) return R;
  int c = (R.canon == Canonical::Left) ? R.n - 1 : 0;
  for (auto& x : R.A[c].data) x *= f;
  return R;
}

std::pair<MPO, TruncationReport> mpo_compress(const MPO& M, const CompressPolicy& policy) {
  M.check_shapes();
  TruncationReport rep;
  rep.threshold = kLosslessCut;
  const int cuts = std::max(0, M.n - 1);
  rep.discarded.assign(cuts, 0.0);
  rep.sequential.assign(cuts, 0.0);
  rep.kept.assign(cuts, 1);
  if (!policy.lossless) {
    if (policy.p != 2.0) fail(ErrorKind::Validation, "lossy compression is only defined for the 2-norm");
    if (policy.max_bond < 1 && policy.tol <= 0.0) fail(ErrorKind::Validation, "lossy compression needs D >= 1 or tol > 0");
    if (policy.max_bond == 0 && policy.tol <= 0.0) fail(ErrorKind::Validation, "D = 0 rejected");
  }
  MPO R = M;
  if (R.n == 1) {
    double nn = 0.0;
    for (auto& x : R.A[0].data) nn += std::norm(x);
    rep.norm2 = std::sqrt(nn);
    R.canon = Canonical::Right;
    return {R, rep};
  }
  left_qr_sweep(R, 0, R.n - 1);
  if (policy.lossless) {
    std::vector<RVec> spectra(cuts);
    right_svd_sweep(R, R.n - 1, 0, [](int, const RVec& s) { return count_above(s, kLosslessCut); }, &spectra,
                    &rep.kept);
    rep.norm2 = spectra.empty() ? 0.0 : spectra[0].norm();
    for (int c = 0; c < cuts; ++c) {
      double drop = 0.0;
      for (Eigen::Index m = rep.kept[c]; m < spectra[c].size(); ++m) drop += spectra[c](m) * spectra[c](m);
      rep.discarded[c] = drop;
      rep.sequential[c] = drop;
    }
  } else {
    // spectra of the untouched operator decide the per-cut tails
    MPO L = R;
    std::vector<RVec> orig(cuts);
    right_svd_sweep(L, L.n - 1, 0, [](int, const RVec& s) { return static_cast<int>(s.size()); }, &orig);
    rep.norm2 = orig[0].norm();
    const double budget = policy.tol * policy.tol * rep.norm2 * rep.norm2;
    auto choose = [&](const RVec& s) {
      int nz = count_above(s, kLosslessCut);
      int k = nz;
      if (policy.tol > 0.0) {
        double tail = 0.0;
        k = nz;
        for (int j = nz - 1; j >= 1; --j) {
          if (tail + s(j) * s(j) > budget) break;
          tail += s(j) * s(j);
          k = j;
        }
      }
      if (policy.max_bond > 0) k = std::min(k, policy.max_bond);
      return std::max(k, 1);
    };
    std::vector<int> target(cuts);
    for (int c = 0; c < cuts; ++c) {
      target[c] = std::min<int>(choose(orig[c]), static_cast<int>(orig[c].size()));
      double drop = 0.0;
      for (Eigen::Index m = target[c]; m < orig[c].size(); ++m) drop += orig[c](m) * orig[c](m);
      rep.discarded[c] = drop;
    }
    std::vector<RVec> seq(cuts);
    right_svd_sweep(R, R.n - 1, 0, [&](int i, const RVec&) { return target[i - 1]; }, &seq, &rep.kept);
    for (int c = 0; c < cuts; ++c) {
      double drop = 0.0;
      for (Eigen::Index m = rep.kept[c]; m < seq[c].size(); ++m) drop += seq[c](m) * seq[c](m);
      rep.sequential[c] = drop;
    }
  }
  double sd = 0.0, ss = 0.0;
  for (int c = 0; c < cuts; ++c) {
    sd += rep.discarded[c];
    ss += rep.sequential[c];
  }
  rep.global_bound = std::sqrt(2.0 * sd);
  rep.sequential_bound = std::sqrt(ss);
  R.canon = Canonical::Right;
  return {R, rep};
}

SchmidtSpectrum schmidt_spectrum(const MPO& M, int cut) {
  if (cut < 1 || cut >= M.n) fail(ErrorKind::Validation, "cut out of range");
  MPO R = M;
  left_qr_sweep(R, 0, cut);
  right_lq_sweep(R, R.n - 1, cut);
  RVec s = singular_values(Mat(R.A[cut].right_view()));
  SchmidtSpectrum sp;
  sp.cut = cut;
  sp.values.assign(s.data(), s.data() + s.size());
  sp.rank = 0;
  for (double v : sp.values)
    if (!sp.values.empty() && v > kRankCut * sp.values[0]) ++sp.rank;
  return sp;
}

std::vector<SchmidtSpectrum> all_spectra(const MPO& M) {
  std::vector<SchmidtSpectrum> out;
  if (M.n < 2) return out;
  MPO R = M;
  left_qr_sweep(R, 0, R.n - 1);
  std::vector<RVec> sp(R.n - 1);
  right_svd_sweep(R, R.n - 1, 0, [](int, const RVec& s) { return static_cast<int>(s.size()); }, &sp);
  for (int c = 0; c < R.n - 1; ++c) {
    SchmidtSpectrum x;
    x.cut = c + 1;
    x.values.assign(sp[c].data(), sp[c].data() + sp[c].size());
    for (double v : x.values)
      if (v > kRankCut * x.values[0]) ++x.rank;
    out.push_back(std::move(x));
  }
  return out;
}

MPO canonicalize(const MPO& M, Canonical dir) {
  MPO R = M;
  if (dir == Canonical::Left) {
    left_qr_sweep(R, 0, R.n - 1);
    R.canon = Canonical::Left;
  } else if (dir == Canonical::Right) {
    right_lq_sweep(R, R.n - 1, 0);
    R.canon = Canonical::Right;
  }
  return R;
}

bool is_left_canonical(const MPO& M, int upto, double tol) {
  for (int i = 0; i < upto; ++i) {
    Mat L = M.A[i].left_view();
    if ((L.adjoint() * L - Mat::Identity(L.cols(), L.cols())).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

bool is_right_canonical(const MPO& M, int from, double tol) {
  for (int i = from; i < M.n; ++i) {
    Mat R = M.A[i].right_view();
    if ((R * R.adjoint() - Mat::Identity(R.rows(), R.rows())).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

double mpo_norm2(const MPO& M) {
  Mat X = Mat::Ones(1, 1);
  for (int i = 0; i < M.n; ++i) {
    const SiteTensor& T = M.A[i];
    RowMat B = X * T.right_view().conjugate();  // l x (s t r')
    Eigen::Map<RowMat> Bl(B.data(), Eigen::Index(T.Dl) * T.d * T.d, T.Dr);
    X = T.left_view().transpose() * Bl;
  }
  return std::sqrt(std::max(0.0, X(0, 0).real()));
}

cplx mpo_trace(const MPO& M) {
  Mat X = Mat::Ones(1, 1);
  for (int i = 0; i < M.n; ++i) {
    const SiteTensor& T = M.A[i];
    Mat t = Mat::Zero(T.Dl, T.Dr);
    for (int l = 0; l < T.Dl; ++l)
      for (int s = 0; s < T.d; ++s)
        for (int r = 0; r < T.Dr; ++r) t(l, r) += T(l, s, s, r);
    X = X * t;
  }
  return X(0, 0);
}

namespace {

// One zip-up step: carry L (k x DAl*DBl) through sites a, b.
// Returns T[(k, s, t), (rA, rB)].
RowMat zip_site(const RowMat& L, const SiteTensor& a, const SiteTensor& b) {
  const int d = a.d;
  const Eigen::Index k = L.rows();
  RowMat Lp(k * b.Dl, a.Dl);
  for (Eigen::Index kk = 0; kk < k; ++kk)
    for (int la = 0; la < a.Dl; ++la)
      for (int lb = 0; lb < b.Dl; ++lb) Lp(kk * b.Dl + lb, la) = L(kk, la * b.Dl + lb);
  RowMat X = Lp * a.right_view();  // (k, bL) x (s, u, rA)
  RowMat Xp(k * d * a.Dr, Eigen::Index(b.Dl) * d);
  for (Eigen::Index kk = 0; kk < k; ++kk)
    for (int lb = 0; lb < b.Dl; ++lb)
      for (int s = 0; s < d; ++s)
        for (int u = 0; u < d; ++u)
          for (int ra = 0; ra < a.Dr; ++ra)
            Xp((kk * d + s) * a.Dr + ra, lb * d + u) = X(kk * b.Dl + lb, (s * d + u) * a.Dr + ra);
  ConstRowMap Bm(b.data.data(), Eigen::Index(b.Dl) * d, Eigen::Index(d) * b.Dr);
  RowMat Y = Xp * Bm;  // (k, s, rA) x (t, rB)
  RowMat T(k * d * d, Eigen::Index(a.Dr) * b.Dr);
  for (Eigen::Index kk = 0; kk < k; ++kk)
    for (int s = 0; s < d; ++s)
      for (int t = 0; t < d; ++t)
        for (int ra = 0; ra < a.Dr; ++ra)
          for (int rb = 0; rb < b.Dr; ++rb)
            T((kk * d + s) * d + t, ra * b.Dr + rb) = Y((kk * d + s) * a.Dr + ra, t * b.Dr + rb);
  return T;
}

// Zip A*B over sites [first, last] of the product, writing into out.A. The
// carry starts as `L`; returns the final carry (k x DAr*DBr at `last`).
RowMat zip_range(const MPO& A, const MPO& B, int first, int last, RowMat L, std::vector<SiteTensor>& out) {
  const int d = A.d;
  for (int i = first; i <= last; ++i) {
    RowMat T = zip_site(L, A.A[i], B.A[i]);
    const int k = static_cast<int>(L.rows());
    if (i == last) {
      SiteTensor s(k, d, static_cast<int>(T.cols()));
      s.left_view() = T;
      out.push_back(std::move(s));
      return RowMat::Identity(T.cols(), T.cols());
    }
    SvdSplit sp = svd_split(Mat(T), [](const RVec& s) { return count_above(s, kZipCut); });
    SiteTensor s(k, d, sp.k);
    s.left_view() = sp.U;
    out.push_back(std::move(s));
    L = sp.s.head(sp.k).cast<cplx>().asDiagonal() * sp.Vh;
  }
  return L;
}

// Dense tail of M over sites [first, n): for each left bond index a, the
// d^r x d^r operator, stored as rows a, columns ket * d^r + bra.
RowMat dense_tail(const MPO& M, int first) {
  const int d = M.d;
  const int Dl = M.A[first].Dl;
  RowMat X = RowMat::Identity(Dl, Dl);  // rows (a, S, T), cols bond
  Eigen::Index dim = 1;
  for (int i = first; i < M.n; ++i) {
    const SiteTensor& T = M.A[i];
    RowMat Y = X * T.right_view();  // (a, S, T) x (s, t, r)
    RowMat Z(Dl * dim * d * dim * d, T.Dr);
    for (int a = 0; a < Dl; ++a)
      for (Eigen::Index S = 0; S < dim; ++S)
        for (Eigen::Index U = 0; U < dim; ++U)
          for (int ks = 0; ks < d; ++ks)
            for (int kt = 0; kt < d; ++kt)
              Z.row(((a * dim + S) * d + ks) * dim * d + U * d + kt) =
                  Y.row((a * dim + S) * dim + U).segment((ks * d + kt) * T.Dr, T.Dr);
    X = std::move(Z);
    dim *= d;
  }
  return Eigen::Map<RowMat>(X.data(), Dl, dim * dim);
}

}  // namespace

// Zip-up over a right-canonical pair. Near the right end the remaining sites
// span fewer dimensions than the raw product bond, and the zip carry would
// keep dependent directions there; that tail is contracted densely instead.
MPO mpo_multiply_compress(const MPO& A0, const MPO& B0, double rel_cut) {
  check_geometry(A0, B0);
  MPO C;
  C.n = A0.n;
  C.d = A0.d;
  if (A0.n == 0) return C;
  const MPO A = A0.canon == Canonical::Right ? A0 : canonicalize(A0, Canonical::Right);
  const MPO B = B0.canon == Canonical::Right ? B0 : canonicalize(B0, Canonical::Right);
  const int n = A.n, d = A.d;
  const std::int64_t dd = std::int64_t(d) * d;

  int t = n;
  for (int i = n - 1; i >= 1; --i) {
    const std::int64_t dim = ipow(d, 2 * (n - i));
    if (dim < 0 || dim > kDenseTailCap) break;
    if (dim <= std::int64_t(A.A[i].Dl) * B.A[i].Dl) t = i;
  }
  if (t == n) {
    zip_range(A, B, 0, n - 1, RowMat::Ones(1, 1), C.A);
  } else {
    RowMat L = RowMat::Ones(1, 1);
    for (int i = 0; i < t; ++i) {
      RowMat T = zip_site(L, A.A[i], B.A[i]);
      SvdSplit sp = svd_split(Mat(T), [](const RVec& s) { return count_above(s, kZipCut); });
      SiteTensor s(static_cast<int>(L.rows()), d, sp.k);
      s.left_view() = sp.U;
      C.A.push_back(std::move(s));
      L = sp.s.head(sp.k).cast<cplx>().asDiagonal() * sp.Vh;
    }
    const int r = n - t;
    const Eigen::Index q = ipow(d, r);
    const RowMat Ta = dense_tail(A, t), Tb = dense_tail(B, t);
    const int DA = A.A[t].Dl, DB = B.A[t].Dl;
    // W[(a, b), interleaved (s_t t_t s_t+1 t_t+1 ...)] = vec(A_a B_b)
    std::vector<Eigen::Index> inter(std::size_t(q * q));
    for (Eigen::Index S = 0; S < q; ++S)
      for (Eigen::Index U = 0; U < q; ++U) {
        Eigen::Index idx = 0, s = S, u = U, w = 1;
        for (int j = 0; j < r; ++j) {
          idx += ((s % d) * d + u % d) * w;
          s /= d;
          u /= d;
          w *= dd;
        }
        inter[std::size_t(S * q + U)] = idx;
      }
    RowMat W(Eigen::Index(DA) * DB, q * q);
    for (int a = 0; a < DA; ++a) {
      Mat Aa = Eigen::Map<const RowMat>(Ta.row(a).data(), q, q);
      for (int b = 0; b < DB; ++b) {
        Mat P = Aa * Eigen::Map<const RowMat>(Tb.row(b).data(), q, q);
        auto row = W.row(Eigen::Index(a) * DB + b);
        for (Eigen::Index S = 0; S < q; ++S)
          for (Eigen::Index U = 0; U < q; ++U) row(inter[std::size_t(S * q + U)]) = P(S, U);
      }
    }
    RowMat cur = L * W;
    Eigen::Index rest = q * q;
    for (int i = t; i < n - 1; ++i) {
      rest /= dd;
      const Eigen::Index k = cur.rows();
      Mat X = Eigen::Map<RowMat>(cur.data(), k * dd, rest);
      SvdSplit sp = svd_split(X, [](const RVec& s) { return count_above(s, kZipCut); });
      SiteTensor s(static_cast<int>(k), d, sp.k);
      s.left_view() = sp.U;
      C.A.push_back(std::move(s));
      cur = sp.s.head(sp.k).cast<cplx>().asDiagonal() * sp.Vh;
    }
    SiteTensor s(static_cast<int>(cur.rows()), d, 1);
    s.left_view() = Eigen::Map<RowMat>(cur.data(), cur.rows() * dd, 1);
    C.A.push_back(std::move(s));
  }
  if (C.n > 1) right_svd_sweep(C, C.n - 1, 0, [&](int, const RVec& s) { return count_above(s, rel_cut); }, nullptr);
  C.canon = Canonical::Right;
  return C;
}

MPO mpo_trace_tail(const MPO& M, int keep) {
  if (keep < 1 || keep > M.n) fail(ErrorKind::Validation, "trace_tail: keep out of range");
  if (keep == M.n) return M;
  Mat P = Mat::Identity(M.A[keep].Dl, M.A[keep].Dl);
  for (int i = keep; i < M.n; ++i) {
    const SiteTensor& T = M.A[i];
    Mat t = Mat::Zero(T.Dl, T.Dr);
    for (int l = 0; l < T.Dl; ++l)
      for (int s = 0; s < T.d; ++s)
        for (int r = 0; r < T.Dr; ++r) t(l, r) += T(l, s, s, r);
    P = (P * t / double(T.d)).eval();
  }
  MPO R;
  R.n = keep;
  R.d = M.d;
  R.A.assign(M.A.begin(), M.A.begin() + keep);
  absorb_into_prev(R.A[keep - 1], P);
  return R;
}

WindowedProduct::WindowedProduct(int n, int d) : M_(mpo_identity(n, d)), center_(0) {}

void WindowedProduct::move_center(int to) {
  if (to > center_) left_qr_sweep(M_, center_, to);
  if (to < center_) right_lq_sweep(M_, center_, to);
  center_ = to;
}

void WindowedProduct::apply_right(const MPO& F, int first, double rel_cut) {
  if (F.d != M_.d) fail(ErrorKind::Validation, "window factor has wrong local dimension");
  int last = first + F.n - 1;
  if (first < 0 || last >= M_.n) fail(ErrorKind::Validation, "window factor outside the chain");
  // extend with identities until M's bond closes
  MPO Fx = F;
  while (last + 1 < M_.n && M_.A[last].Dr != 1) {
    ++last;
    SiteTensor T(1, M_.d, 1);
    for (int s = 0; s < M_.d; ++s) T(0, s, s, 0) = 1.0;
    Fx.A.push_back(std::move(T));
    ++Fx.n;
  }
  move_center(first);
  MPO Msub;
  Msub.n = Fx.n;
  Msub.d = M_.d;
  Msub.A.assign(M_.A.begin() + first, M_.A.begin() + last + 1);
  std::vector<SiteTensor> out;
  const int k0 = Msub.A[0].Dl;
  zip_range(Msub, Fx, 0, Fx.n - 1, RowMat::Identity(k0, k0), out);
  MPO W;
  W.n = Fx.n;
  W.d = M_.d;
  W.A = std::move(out);
  if (W.n > 1) right_svd_sweep(W, W.n - 1, 0, [&](int, const RVec& s) { return count_above(s, rel_cut); }, nullptr);
  for (int i = 0; i < W.n; ++i) M_.A[first + i] = std::move(W.A[i]);
  center_ = first;
}

MPO WindowedProduct::finish() {
  auto res = mpo_compress(M_);
  return res.first;
}

Vec Mps::to_dense() const {
  const std::int64_t D = ipow(d, n);
  if (D < 0 || D > (std::int64_t(1) << 24)) fail(ErrorKind::ResourceCap, "MPS dense conversion too large");
  RowMat V = RowMat::Ones(1, 1);
  for (int i = 0; i < n; ++i) {
    const MpsTensor& T = A[i];
    ConstRowMap rv(T.data.data(), T.Dl, Eigen::Index(d) * T.Dr);
    RowMat W = V * rv;
    V = Eigen::Map<RowMat>(W.data(), W.rows() * d, T.Dr);
  }
  return Vec(Eigen::Map<Vec>(V.data(), V.rows()));
}

double Mps::norm() const {
  Mat X = Mat::Ones(1, 1);
  for (int i = 0; i < n; ++i) {
    const MpsTensor& T = A[i];
    ConstRowMap rv(T.data.data(), T.Dl, Eigen::Index(d) * T.Dr);
    RowMat B = X * rv.conjugate();
    Eigen::Map<RowMat> Bl(B.data(), Eigen::Index(T.Dl) * d, T.Dr);
    ConstRowMap lv(T.data.data(), Eigen::Index(T.Dl) * d, T.Dr);
    X = lv.transpose() * Bl;
  }
  return std::sqrt(std::max(0.0, X(0, 0).real()));
}

void Mps::scale(cplx f) {
  if (n == 0) return;
  for (auto& x : A[0].data) x *= f;
}

Mps mpo_apply_basis(const MPO& M, const std::vector<int>& digits) {
  if (static_cast<int>(digits.size()) != M.n) fail(ErrorKind::Validation, "basis state length != n");
  Mps v;
  v.n = M.n;
  v.d = M.d;
  for (int i = 0; i < M.n; ++i) {
    const SiteTensor& T = M.A[i];
    const int t = digits[i];
    if (t < 0 || t >= M.d) fail(ErrorKind::Validation, "basis digit out of range");
    MpsTensor m;
    m.Dl = T.Dl;
    m.d = T.d;
    m.Dr = T.Dr;
    m.data.resize(std::size_t(T.Dl) * T.d * T.Dr);
    for (int l = 0; l < T.Dl; ++l)
      for (int s = 0; s < T.d; ++s)
        for (int r = 0; r < T.Dr; ++r) m.data[(std::size_t(l) * T.d + s) * T.Dr + r] = T(l, s, t, r);
    v.A.push_back(std::move(m));
  }
  return v;
}

std::vector<std::uint8_t> mpo_serialize(const MPO& M) {
  M.check_shapes();
  std::vector<std::uint8_t> out = {'M', 'P', 'O', '1'};
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(M.n));
  put_u32(out, static_cast<std::uint32_t>(M.d));
  for (const auto& T : M.A) {
    put_u32(out, T.Dl);
    put_u32(out, T.d);
    put_u32(out, T.d);
    put_u32(out, T.Dr);
  }
  for (const auto& T : M.A)
    for (const auto& x : T.data) {
      put_f64(out, x.real());
      put_f64(out, x.imag());
    }
  return out;
}

MPO mpo_deserialize(const std::vector<std::uint8_t>& b) {
  std::size_t pos = 0;
  auto need = [&](std::size_t k) {
    if (pos + k > b.size()) fail(ErrorKind::Io, "MPO1: truncated stream at byte " + std::to_string(pos));
  };
  auto u32 = [&]() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  auto f64 = [&]() {
    need(8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[pos + i]) << (8 * i);
    pos += 8;
    double x;
    std::memcpy(&x, &u, 8);
    return x;
  };
  need(4);
  if (!(b[0] == 'M' && b[1] == 'P' && b[2] == 'O' && b[3] == '1')) fail(ErrorKind::Io, "MPO1: bad magic");
  pos = 4;
  if (u32() != 1) fail(ErrorKind::Io, "MPO1: unsupported version");
  MPO M;
  M.n = static_cast<int>(u32());
  M.d = static_cast<int>(u32());
  if (M.n < 1 || M.d < 1 || M.n > 1000000) fail(ErrorKind::Io, "MPO1: bad header");
  std::vector<std::array<std::uint32_t, 4>> shapes(M.n);
  for (int i = 0; i < M.n; ++i)
    for (int j = 0; j < 4; ++j) shapes[i][j] = u32();
  std::size_t total = 0;
  for (int i = 0; i < M.n; ++i) {
    const auto& s = shapes[i];
    if (s[1] != std::uint32_t(M.d) || s[2] != std::uint32_t(M.d)) fail(ErrorKind::Io, "MPO1: physical dim mismatch");
    if (i + 1 < M.n && s[3] != shapes[i + 1][0]) fail(ErrorKind::Io, "MPO1: shape chain inconsistent");
    if (s[0] == 0 || s[3] == 0) fail(ErrorKind::Io, "MPO1: zero bond");
    total += std::size_t(s[0]) * s[1] * s[2] * s[3];
  }
  if (shapes[0][0] != 1 || shapes[M.n - 1][3] != 1) fail(ErrorKind::Io, "MPO1: boundary bonds must be 1");
  need(total * 16);
  for (int i = 0; i < M.n; ++i) {
    SiteTensor T(shapes[i][0], M.d, shapes[i][3]);
    for (auto& x : T.data) {
      double re = f64();
      double im = f64();
      x = cplx(re, im);
    }
    M.A.push_back(std::move(T));
  }
  if (pos != b.size()) fail(ErrorKind::Io, "MPO1: trailing bytes");
  return M;
}

void mpo_save(const MPO& M, const std::string& path) {
  auto bytes = mpo_serialize(M);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MPO mpo_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return mpo_deserialize(bytes);
}

}  // namespace gibbsmpo
