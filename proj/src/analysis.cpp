#include "gibbsmpo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gibbsmpo/densela.hpp"

namespace gibbsmpo {

namespace {

void check_oracle(const LatticeModel& model) {
  const std::int64_t D = model.dim();
  if (D < 0 || D > kOracleCap) fail(ErrorKind::ResourceCap, "entropy diagnostics limited to d^n <= 4096");
}

void check_alphas(const std::vector<double>& alphas) {
  for (double a : alphas)
    if (!(a > 0.0)) fail(ErrorKind::Validation, "Renyi index alpha must be positive");
}

double clamped_log(double x) { return std::log(std::max(x, std::exp(1.0))); }

double mi_trend_shape(double beta) { return beta <= 0 ? 0.0 : std::pow(beta, 2.0 / 3.0) * clamped_log(beta); }

double purif_shape(double beta, double a) {
  if (beta <= 0) return 0.0;
  return std::max(mi_trend_shape(beta), (1.0 - a) * beta / a * clamped_log(beta / a));
}

// Shared per-beta data: rho and e^{-beta H/2}/sqrt(Z).
struct Thermal {
  Mat rho;
  Mat half;
  RVec probs;  // spectrum of rho
};

Thermal thermal(const LatticeModel& model, double beta, bool want_half) {
  const Eigh es = eigh(model.dense());
  const RVec& e = es.values;
  RVec w = (-beta * (e.array() - e(0))).exp();
  const double s = w.sum();
  Thermal t;
  t.probs = w / s;
  t.rho = es.vectors * t.probs.cast<cplx>().asDiagonal() * es.vectors.adjoint();
  t.rho = 0.5 * (t.rho + t.rho.adjoint()).eval();
  if (want_half) {
    RVec h = t.probs.cwiseSqrt();
    t.half = es.vectors * h.cast<cplx>().asDiagonal() * es.vectors.adjoint();
  }
  return t;
}

EntropyReport report_at(const LatticeModel& model, const Thermal& th, double beta, int cut,
                        const std::vector<double>& alphas, bool purif) {
  if (cut < 1 || cut >= model.n) fail(ErrorKind::Validation, "cut must lie in [1, n-1]");
  EntropyReport r;
  r.n = model.n;
  r.cut = cut;
  r.beta = beta;
  r.alphas = alphas;
  const int n = model.n, d = model.d;
  const RVec pL = density_spectrum(trace_right(th.rho, n, d, cut));
  const RVec pR = density_spectrum(trace_left(th.rho, n, d, cut));
  r.S_L = renyi_entropy(pL, 1.0);
  r.S_R = renyi_entropy(pR, 1.0);
  r.S_LR = renyi_entropy(th.probs, 1.0);
  r.I = std::max(0.0, r.S_L + r.S_R - r.S_LR);
  for (double a : alphas) r.S_alpha.push_back(renyi_entropy(pL, a));
  r.h_cut_norm = model.term_norm(cut - 1);
  r.bound_eq1 = 2.0 * beta * r.h_cut_norm;
  r.trend_shape = mi_trend_shape(beta);
  r.area_law_ok = r.I <= r.bound_eq1 + 1e-8;
  if (purif) {
    const RVec s = operator_schmidt_values(th.half, n, d, cut);
    RVec p = s.cwiseAbs2();
    p /= p.sum();
    for (double a : alphas) {
      r.E_alpha.push_back(renyi_entropy(p, a));
      r.purif_trend_shape.push_back(purif_shape(beta, a));
    }
    const double E1 = renyi_entropy(p, 1.0);
    r.purification_chain_ok = r.I <= 2.0 * E1 + 1e-10;
  }
  return r;
}

}  // namespace

double renyi_entropy(const RVec& probs, double alpha) {
  if (!(alpha > 0.0)) fail(ErrorKind::Validation, "Renyi index alpha must be positive");
  if (std::abs(alpha - 1.0) < 1e-12) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i)
      if (probs(i) > 0.0) s -= probs(i) * std::log(probs(i));
    return std::max(0.0, s);
  }
  double t = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs(i) > 0.0) t += std::pow(probs(i), alpha);
  if (t <= 0.0) return 0.0;
  return std::max(0.0, std::log(t) / (1.0 - alpha));
}

RVec density_spectrum(const Mat& rho) {
  Mat h = 0.5 * (rho + rho.adjoint());
  RVec e = eigh(h, false).values;
  return e.cwiseMax(0.0);
}

EntropyReport mutual_information(const LatticeModel& model, double beta, int cut, const std::vector<double>& alphas) {
  check_oracle(model);
  check_alphas(alphas);
  if (!(beta >= 0.0)) fail(ErrorKind::Validation, "beta must be nonnegative");
  if (cut < 1 || cut >= model.n) fail(ErrorKind::Validation, "cut must lie in [1, n-1]");
  return report_at(model, thermal(model, beta, false), beta, cut, alphas, false);
}

std::vector<EntropyReport> entropy_sweep(const LatticeModel& model, double beta, const std::vector<double>& alphas,
                                         bool with_purification) {
  check_oracle(model);
  check_alphas(alphas);
  if (!(beta >= 0.0)) fail(ErrorKind::Validation, "beta must be nonnegative");
  const Thermal th = thermal(model, beta, with_purification);
  std::vector<EntropyReport> out;
  for (int c = 1; c < model.n; ++c) out.push_back(report_at(model, th, beta, c, alphas, with_purification));
  return out;
}

Mat Purification::reduced_system() const {
  const std::int64_t D = ipow(d, n);
  Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(psi.data(), D, D);
  return A * A.adjoint();
}

Purification purify(const LatticeModel& model, double beta) {
  check_oracle(model);
  if (!(beta >= 0.0)) fail(ErrorKind::Validation, "beta must be nonnegative");
  Purification p;
  p.n = model.n;
  p.d = model.d;
  p.beta = beta;
  p.model_name = model.name;
  const Thermal th = thermal(model, beta, true);
  const std::int64_t D = model.dim();
  p.psi.resize(D * D);
  for (std::int64_t i = 0; i < D; ++i)
    for (std::int64_t j = 0; j < D; ++j) p.psi(i * D + j) = th.half(i, j);
  return p;
}

EntropyReport purification_entropies(const LatticeModel& model, double beta, int cut,
                                     const std::vector<double>& alphas) {
  check_oracle(model);
  check_alphas(alphas);
  if (!(beta >= 0.0)) fail(ErrorKind::Validation, "beta must be nonnegative");
  if (cut < 1 || cut >= model.n) fail(ErrorKind::Validation, "cut must lie in [1, n-1]");
  return report_at(model, thermal(model, beta, true), beta, cut, alphas, true);
}

Fit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) fail(ErrorKind::Validation, "fit: x and y differ in length");
  if (x.size() < 2) fail(ErrorKind::Validation, "fit: need at least 2 points");
  const double N = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= N;
  my /= N;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) fail(ErrorKind::Validation, "fit: x values are all equal");
  Fit f;
  f.points = static_cast<int>(x.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ssr += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

Fit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) fail(ErrorKind::Validation, "log-log fit needs positive data");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return fit_linear(lx, ly);
}

std::vector<TbRow> tight_binding_demo(int R, const std::vector<double>& times, const std::vector<double>& betas) {
  if (R < 50) fail(ErrorKind::Validation, "tight-binding half-width R must be >= 50");
  const int N = 2 * R + 1;
  RVec diag = RVec::Constant(N, -2.0), off = RVec::Ones(N - 1);
  Eigen::SelfAdjointEigenSolver<RMat> es;
  es.computeFromTridiagonal(diag, off);
  const RVec& lam = es.eigenvalues();
  const RMat& V = es.eigenvectors();
  const RVec v0 = V.row(R).transpose();  // <k|0>
  RVec xs(N);
  for (int i = 0; i < N; ++i) xs(i) = i - R;

  auto moments = [&](const RVec& prob, const std::string& mode, double x) {
    const double tot = prob.sum();
    const double mean = prob.dot(xs) / tot;
    const double m2 = prob.dot(xs.cwiseAbs2()) / tot;
    double edge = 0.0;
    for (int i = 0; i < N; ++i)
      if (std::abs(xs(i)) > R - 5) edge += prob(i);
    edge /= tot;
    if (edge > 1e-6) {
      std::ostringstream m;
      m << "tight-binding boundary leak at " << (mode == "real" ? "t = " : "beta = ") << x << " (edge mass " << edge
        << ")";
      fail(ErrorKind::Validation, m.str());
    }
    TbRow row;
    row.mode = mode;
    row.x = x;
    row.sqrt_var = std::sqrt(std::max(0.0, m2 - mean * mean));
    row.edge_mass = edge;
    return row;
  };

  std::vector<TbRow> out;
  for (double t : times) {
    Vec c(N);
    for (int k = 0; k < N; ++k) c(k) = std::exp(cplx(0.0, -lam(k) * t)) * v0(k);
    Vec psi = V.cast<cplx>() * c;
    out.push_back(moments(psi.cwiseAbs2(), "real", t));
  }
  const double lmin = lam(0);
  for (double b : betas) {
    if (!(b >= 0.0)) fail(ErrorKind::Validation, "beta must be nonnegative");
    RVec c(N);
    for (int k = 0; k < N; ++k) c(k) = std::exp(-b * (lam(k) - lmin)) * v0(k);
    RVec psi = V * c;
    out.push_back(moments(psi.cwiseAbs2(), "imag", b));
  }
  return out;
}

std::vector<GrowthRow> entanglement_growth_product_state(const LatticeModel& model, const std::vector<double>& betas,
                                                         int cut, const std::vector<int>& digits) {
  check_oracle(model);
  if (cut < 1 || cut >= model.n) fail(ErrorKind::Validation, "cut must lie in [1, n-1]");
  std::vector<int> dg = digits.empty() ? std::vector<int>(model.n, 0) : digits;
  if (static_cast<int>(dg.size()) != model.n) fail(ErrorKind::Validation, "product state needs one digit per site");
  std::int64_t idx = 0;
  for (int v : dg) {
    if (v < 0 || v >= model.d) fail(ErrorKind::Validation, "product state digit out of range");
    idx = idx * model.d + v;
  }
  const Eigh es = eigh(model.dense());
  const RVec& e = es.values;
  const Vec overlap = es.vectors.row(idx).adjoint();  // <k|P>
  const std::int64_t DL = ipow(model.d, cut), DR = ipow(model.d, model.n - cut);
  std::vector<GrowthRow> out;
  for (double b : betas) {
    if (!(b >= 0.0)) fail(ErrorKind::Validation, "beta must be nonnegative");
    Vec c(e.size());
    for (Eigen::Index k = 0; k < e.size(); ++k) c(k) = std::exp(-b * (e(k) - e(0))) * overlap(k);
    Vec psi = es.vectors * c;
    const double nv = psi.norm();
    GrowthRow row;
    row.beta = b;
    if (nv > 0) {
      psi /= nv;
      Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(psi.data(), DL, DR);
      RVec s = singular_values(Mat(M));
      RVec p = s.cwiseAbs2();
      row.S1 = renyi_entropy(p / p.sum(), 1.0);
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace gibbsmpo
