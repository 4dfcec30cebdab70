#include "gibbsmpo/polyapprox.hpp"

#include "gibbsmpo/densela.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gibbsmpo {

TaylorPoly taylor_poly(int m) {
  if (m < 0) fail(ErrorKind::Validation, "Taylor degree must be >= 0");
  TaylorPoly p;
  p.degree = m;
  p.coeffs.resize(m + 1);
  double c = 1.0;
  p.coeffs[0] = 1.0;
  for (int s = 1; s <= m; ++s) {
    c /= s;
    p.coeffs[s] = c;
  }
  return p;
}

cplx eval_taylor(const TaylorPoly& p, cplx x) {
  cplx r = p.coeffs[p.degree];
  for (int s = p.degree - 1; s >= 0; --s) r = p.coeffs[s] + x * r;
  return r;
}

double WalkKernel::at(int delta) const {
  if (delta < -delta_max || delta > delta_max) return 0.0;
  return p[delta + delta_max];
}

double WalkKernel::total() const {
  double s = 0.0;
  for (double v : p) s += v;
  return s;
}

double WalkKernel::variance() const {
  double s = 0.0;
  for (int k = -delta_max; k <= delta_max; ++k) s += double(k) * k * at(k);
  return s;
}

double WalkKernel::max_asymmetry() const {
  double m = 0.0;
  for (int k = 1; k <= delta_max; ++k) m = std::max(m, std::abs(at(k) - at(-k)));
  return m;
}

WalkKernel walk_kernel(int delta_max) {
  if (delta_max < 8) fail(ErrorKind::Validation, "walk kernel needs delta_max >= 8");
  WalkKernel k;
  k.delta_max = delta_max;
  k.p.assign(2 * delta_max + 1, 0.0);
  // q(j) = e^{-1/2} / (2^j j!), B_j(delta) = 2^{-j} C(j, (j+delta)/2)
  const int jmax = 200;
  const double ln2 = std::log(2.0);
  double inside = 0.0;
  for (int delta = 0; delta <= delta_max; ++delta) {
    double acc = 0.0;
    for (int j = delta; j <= jmax; j += 2) {
      const int kk = (j + delta) / 2;
      double lg = -0.5 - 2.0 * j * ln2 - std::lgamma(kk + 1.0) - std::lgamma(j - kk + 1.0);
      acc += std::exp(lg);
    }
    k.p[delta_max + delta] = acc;
    k.p[delta_max - delta] = acc;
    inside += (delta == 0 ? 1.0 : 2.0) * acc;
  }
  k.tail_mass = std::max(0.0, 1.0 - inside);
  return k;
}

namespace {

// |c_r| mass above the truncation degree, from a longer expansion
double tail_of(const std::vector<double>& full, int m) {
  double s = 0.0;
  for (size_t r = m + 1; r < full.size(); ++r) s += std::abs(full[r]);
  return s;
}

std::vector<double> quadrature_coeffs(double b, int M) {
  const int N = std::max({256, 2 * (M + 1), static_cast<int>(std::ceil(20.0 * std::sqrt(b))) + 64});
  std::vector<double> f(N), th(N);
  for (int k = 0; k < N; ++k) {
    th[k] = std::numbers::pi * (k + 0.5) / N;
    f[k] = std::exp(-0.5 * b * (1.0 + std::cos(th[k])));
  }
  std::vector<double> c(M + 1, 0.0);
  for (int r = 0; r <= M; ++r) {
    double s = 0.0;
    for (int k = 0; k < N; ++k) s += f[k] * std::cos(r * th[k]);
    c[r] = (r == 0 ? 1.0 : 2.0) * s / N;
  }
  return c;
}

}  // namespace

ChebyshevExpansion cheb_exp_coeffs(double b, int m) {
  if (!(b >= 0.0) || !std::isfinite(b)) fail(ErrorKind::Validation, "Chebyshev scale b must be nonnegative");
  if (m < 0) fail(ErrorKind::Validation, "Chebyshev degree must be >= 0");
  ChebyshevExpansion e;
  e.b = b;
  e.degree = m;
  e.path = "quadrature";
  if (b == 0.0) {
    e.coeffs.assign(m + 1, 0.0);
    e.coeffs[0] = 1.0;
    return e;
  }
  const int extra = 32 + static_cast<int>(std::ceil(12.0 * std::sqrt(b)));
  auto full = quadrature_coeffs(b, m + extra);
  e.tail_estimate = tail_of(full, m);
  full.resize(m + 1);
  e.coeffs = std::move(full);
  return e;
}

ChebyshevExpansion cheb_exp_coeffs_walk(int b, int m, int delta_max) {
  if (b < 0) fail(ErrorKind::Validation, "walk path requires integer b >= 0");
  if (m < 0) fail(ErrorKind::Validation, "Chebyshev degree must be >= 0");
  WalkKernel k = walk_kernel(delta_max);
  // distribution of r after the walk, on -R..R
  int R = 0;
  std::vector<double> P{1.0};
  double lost = 0.0;
  for (int step = 0; step < b; ++step) {
    const int R2 = R + delta_max;
    std::vector<double> Q(2 * R2 + 1, 0.0);
    for (int r = -R; r <= R; ++r) {
      const double pr = P[r + R];
      if (pr == 0.0) continue;
      for (int dl = -delta_max; dl <= delta_max; ++dl) Q[r + dl + R2] += pr * k.at(dl);
    }
    lost += k.tail_mass;
    P.swap(Q);
    R = R2;
  }
  ChebyshevExpansion e;
  e.b = b;
  e.degree = m;
  e.path = "walk";
  e.coeffs.assign(m + 1, 0.0);
  auto Pat = [&](int r) { return (r < -R || r > R) ? 0.0 : P[r + R]; };
  // the walk expands in T_r(-y); T_r(-y) = (-1)^r T_r(y)
  double tail = lost;
  for (int r = 0; r <= R; ++r) {
    double v = (r == 0) ? Pat(0) : (Pat(r) + Pat(-r));
    if (r % 2 == 1) v = -v;
    if (r <= m)
      e.coeffs[r] = v;
    else
      tail += std::abs(v);
  }
  e.tail_estimate = tail;
  return e;
}

double eval_cheb(const ChebyshevExpansion& c, double x) {
  const double y = c.b > 0 ? 2.0 * x / c.b - 1.0 : -1.0;
  double b1 = 0.0, b2 = 0.0;
  for (int k = c.degree; k >= 1; --k) {
    double b0 = c.coeffs[k] + 2.0 * y * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return c.coeffs[0] + y * b1 - b2;
}

double cheb_sup_error(const ChebyshevExpansion& c, int grid) {
  double worst = 0.0;
  for (int i = 0; i < grid; ++i) {
    double x = grid > 1 ? c.b * i / (grid - 1) : 0.0;
    worst = std::max(worst, std::abs(eval_cheb(c, x) - std::exp(-x)));
  }
  return worst;
}

double degree_shape(double b, double delta) {
  const double L = std::log(1.0 / delta);
  return std::sqrt(std::max(b, L) * L);
}

DegreeResult required_degree(double b, double delta, double c_f) {
  if (!(delta > 0.0)) fail(ErrorKind::Validation, "delta must be positive");
  if (!(b > 0.0)) fail(ErrorKind::Validation, "b must be positive");
  DegreeResult r;
  r.c_f = c_f;
  if (delta >= 1.0) {
    r.degenerate = true;
    r.warning = "delta >= 1: returning degree 0";
    auto e = cheb_exp_coeffs(b, 0);
    r.sup_error = cheb_sup_error(e);
    r.formula = 0.0;
    return r;
  }
  r.formula = c_f * degree_shape(b, delta);
  auto err_at = [&](int m) { return cheb_sup_error(cheb_exp_coeffs(b, m)); };
  if (err_at(0) <= delta) {
    r.degree = 0;
    r.sup_error = err_at(0);
    return r;
  }
  int hi = 1;
  double ehi = err_at(hi);
  while (ehi > delta) {
    if (hi > 1 << 16) fail(ErrorKind::ResourceCap, "required_degree: no degree found");
    hi *= 2;
    ehi = err_at(hi);
  }
  int lo = hi / 2;  // fails (or is 0, which failed)
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    double e = err_at(mid);
    if (e <= delta) {
      hi = mid;
      ehi = e;
    } else {
      lo = mid;
    }
  }
  r.degree = hi;
  r.sup_error = ehi;
  return r;
}

SpectrumCheck check_cheb_spectrum(const Mat& A, double scale, double b) {
  SpectrumCheck s;
  const Eigen::Index n = A.rows();
  double lo = std::numeric_limits<double>::max(), hi = -lo;
  for (Eigen::Index i = 0; i < n; ++i) {
    double rad = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    lo = std::min(lo, A(i, i).real() - rad);
    hi = std::max(hi, A(i, i).real() + rad);
  }
  if (scale < 0) std::swap(lo, hi);
  lo *= scale;
  hi *= scale;
  const double tol = 1e-10 * std::max(1.0, b);
  if (n == 0 || (lo >= -tol && hi <= b + tol)) {
    s.lo = lo;
    s.hi = hi;
    s.margin = std::max(-lo, hi - b);
    return s;
  }
  const RVec ev = eigh(A, false).values;
  double e0 = scale * ev(0), e1 = scale * ev(n - 1);
  s.lo = std::min(e0, e1);
  s.hi = std::max(e0, e1);
  s.exact = true;
  s.margin = std::max(-s.lo, s.hi - b);
  s.ok = s.margin <= tol;
  return s;
}

namespace {

bool is_hermitian(const Mat& A) {
  if (A.rows() != A.cols()) return false;
  double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  return (A - A.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

Mat eval_poly_matrix(const TaylorPoly& p, const Mat& A, cplx scale) {
  const Eigen::Index n = A.rows();
  const Mat X = scale * A;
  Mat P = p.coeffs[p.degree] * Mat::Identity(n, n);
  for (int s = p.degree - 1; s >= 0; --s) {
    Mat t = X * P;
    t.diagonal().array() += p.coeffs[s];
    P.swap(t);
  }
  if (scale.imag() == 0.0 && is_hermitian(A)) P = (0.5 * (P + P.adjoint())).eval();
  return P;
}

Mat eval_poly_matrix(const TaylorPoly& p, const Mat& A, double scale) {
  return eval_poly_matrix(p, A, cplx(scale, 0.0));
}

Mat eval_poly_matrix(const ChebyshevExpansion& c, const Mat& A, double scale) {
  if (!is_hermitian(A)) fail(ErrorKind::Validation, "Chebyshev evaluation needs a Hermitian argument");
  auto sc = check_cheb_spectrum(A, scale, c.b);
  if (!sc.ok)
    fail(ErrorKind::Validation, "spectrum of scale*A outside [0, b] by margin " + std::to_string(sc.margin));
  const Eigen::Index n = A.rows();
  if (c.b == 0.0) return c.coeffs[0] * Mat::Identity(n, n);
  Mat Y = (2.0 * scale / c.b) * A;
  Y.diagonal().array() -= 1.0;
  Mat b1 = Mat::Zero(n, n), b2 = Mat::Zero(n, n);
  for (int k = c.degree; k >= 1; --k) {
    Mat b0 = 2.0 * (Y * b1) - b2;
    b0.diagonal().array() += c.coeffs[k];
    b2.swap(b1);
    b1.swap(b0);
  }
  Mat f = Y * b1 - b2;
  f.diagonal().array() += c.coeffs[0];
  return (0.5 * (f + f.adjoint())).eval();
}

}  // namespace gibbsmpo
