#include "gibbsmpo/gibbs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "gibbsmpo/densela.hpp"
#include "gibbsmpo/polyapprox.hpp"

namespace gibbsmpo {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void check_eps(double eps) {
  if (!(eps > 0.0) || eps > std::exp(1.0)) fail(ErrorKind::Validation, "eps must lie in (0, e]");
}

void choose_block(GibbsPlan& p, const LatticeModel& model) {
  p.log_arg = std::log(6.0 * model.n / p.eps0);
  p.l0_formula = std::max(2, static_cast<int>(std::ceil(p.constants.c0 * p.log_arg)));
  p.m = std::max(1, static_cast<int>(std::ceil(p.constants.c1 * p.log_arg)));
  p.l0 = p.l0_formula;
  auto support = [&](int l0) { return static_cast<double>(ipow(model.d, 2 * l0 + 1)); };
  if (ipow(model.d, 5) < 0 || support(2) > p.constants.local_dim_cap || support(2) > kOracleCap)
    fail(ErrorKind::ResourceCap, "local factor support d^5 exceeds the local dimension cap");
  while (p.l0 > 2 && (ipow(model.d, 2 * p.l0 + 1) < 0 || support(p.l0) > p.constants.local_dim_cap)) {
    --p.l0;
    p.l0_reduced = true;
  }
  if (p.l0_reduced)
    p.warnings.push_back("block length reduced from " + std::to_string(p.l0_formula) + " to " +
                         std::to_string(p.l0) + " by the local dimension cap; the eps certificate is measured-only");
}

std::vector<double> log_ranks(const MPO& M) {
  std::vector<double> out;
  for (const auto& s : all_spectra(M)) out.push_back(std::log(std::max(1, s.rank)));
  return out;
}

StageInfo stage_info(const MPO& M, int stage, int power, int m, double c_prime, double secs, bool spectra) {
  StageInfo s;
  s.stage = stage;
  s.power = power;
  s.bonds = M.bond_dims();
  s.max_bond = M.max_bond();
  s.seconds = secs;
  if (spectra) s.log_sr = log_ranks(M);
  s.log_rank_bound = log_rank_bound(c_prime, power, m);
  return s;
}

void finish_report(BuildReport& r, const MPO& M) {
  const auto& p = r.plan;
  r.certified_bound = p.identity ? 0.0 : p.certified_bound();
  const double L0 = std::log(r.n / std::max(p.eps0, 1e-300));
  r.prop4_shape = L0 > 1.0 ? std::sqrt(L0) * std::log(L0) : 0.0;
  const double L = std::log(r.n / p.eps);
  const double bl = std::max(std::exp(1.0), p.beta * L);
  r.q_eps_shape = std::max(p.beta, std::sqrt(p.beta * std::max(L, 0.0))) * std::log(bl);
  r.c_fit = r.q_eps_shape > 0 ? std::log(std::max(1, M.max_bond())) / r.q_eps_shape : 0.0;
  for (const auto& w : p.warnings) r.warnings.push_back(w);
  if (!p.constants.calibrated) r.warnings.push_back("uncalibrated: built-in constants in use");
}

}  // namespace

double GibbsPlan::certified_bound() const {
  if (real_time) {
    const double x = q * eps0;
    return x * std::exp(x);
  }
  const double x = 3.0 * eps0 * q;
  return x * std::exp(x);
}

GibbsPlan plan(const LatticeModel& model, double beta, double eps, const Constants& c) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail(ErrorKind::Validation, "beta must be a finite nonnegative number");
  check_eps(eps);
  GibbsPlan p;
  p.beta = beta;
  p.eps = eps;
  p.constants = c;
  if (beta == 0.0) {
    p.identity = true;
    p.eps0 = eps;
    p.m = 0;
    return p;
  }
  const double ratio = beta / (2.0 * c.beta0_cap);
  int q = static_cast<int>(std::ceil(ratio * (1.0 - 1e-12)));
  q = std::max(q, 1);
  p.q = q;
  p.beta0 = beta / (2.0 * q);
  p.eps0 = eps / (6.0 * q);
  choose_block(p, model);
  return p;
}

GibbsPlan plan_real_time(const LatticeModel& model, double t, double eps, const Constants& c) {
  if (!std::isfinite(t)) fail(ErrorKind::Validation, "t must be finite");
  check_eps(eps);
  GibbsPlan p;
  p.real_time = true;
  p.t = t;
  p.beta = std::abs(t);
  p.eps = eps;
  p.constants = c;
  if (t == 0.0) {
    p.identity = true;
    p.eps0 = eps;
    p.m = 0;
    return p;
  }
  int K = static_cast<int>(std::ceil(std::abs(t) / c.beta0_cap * (1.0 - 1e-12)));
  K = std::max(K, 1);
  p.q = K;
  p.beta0 = t / K;
  p.eps0 = eps / (2.0 * K);
  choose_block(p, model);
  return p;
}

MPO high_temp_mpo(const LatticeModel& model, const BlockDecomposition& dec, double beta0, int m) {
  return high_temp_mpo(model, dec, cplx(beta0, 0.0), m);
}

MPO high_temp_mpo(const LatticeModel& model, const BlockDecomposition& dec, cplx z, int m) {
  if (dec.n != model.n || dec.d != model.d) fail(ErrorKind::Validation, "decomposition does not match the model");
  const TaylorPoly T = taylor_poly(m);
  WindowedProduct W(dec.n_padded, dec.d);
  for (int j = 0; j < dec.n_blocks; ++j) {
    int first, w;
    Mat Phi;
    if (j == 0) {
      first = dec.support_first[0];
      w = dec.support_sites[0];
      Phi = eval_poly_matrix(T, dec.block_hamiltonians[0], -z);
    } else {
      first = dec.support_first[j - 1];
      w = dec.support_first[j] + dec.support_sites[j] - first;
      if (ipow(dec.d, w) > kOracleCap || ipow(dec.d, w) < 0)
        fail(ErrorKind::ResourceCap, "factor support too large for dense evaluation");
      Mat Hp = dec.local_hamiltonian(dec.block_terms[j - 1], first, w);
      Mat Hc = dec.local_hamiltonian(dec.block_terms[j], first, w);
      Phi = eval_poly_matrix(T, Hp, z) * eval_poly_matrix(T, Hp + Hc, -z);
    }
    MPO F = mpo_from_dense(Phi, w, dec.d);
    W.apply_right(F, first);
  }
  MPO M = W.finish();
  if (dec.n_padded > dec.n) M = mpo_compress(mpo_trace_tail(M, dec.n)).first;
  return M;
}

double log_rank_bound(double c_prime, int power, int m) {
  const double q = power, mm = std::max(m, 1);
  return c_prime * std::max(q, std::sqrt(mm * q)) * std::log(std::max(2.0, mm * q));
}

BuildResult power_to_target(const MPO& M0, const GibbsPlan& p, const BuildOptions& opt) {
  BuildResult r;
  r.report.plan = p;
  r.report.n = M0.n;
  r.report.d = M0.d;
  const double cp = p.constants.c_prime;
  auto t0 = Clock::now();
  r.report.stages.push_back(stage_info(M0, 0, 1, p.m, cp, 0.0, opt.want_spectra));
  if (opt.keep_stages) r.stage_mpos.push_back(M0);
  if (p.identity) {
    r.mpo = M0;
  } else if (p.real_time) {
    MPO Mk = M0;
    for (int k = 2; k <= p.q; ++k) {
      auto ts = Clock::now();
      Mk = mpo_multiply_compress(Mk, M0);
      r.report.stages.push_back(stage_info(Mk, k - 1, k, p.m, cp, since(ts), opt.want_spectra));
      if (opt.keep_stages) r.stage_mpos.push_back(Mk);
    }
    r.mpo = Mk;
  } else {
    auto ts = Clock::now();
    MPO P = mpo_multiply_compress(mpo_adjoint(M0), M0);
    r.report.stages.push_back(stage_info(P, 1, 2, p.m, cp, since(ts), opt.want_spectra));
    if (opt.keep_stages) r.stage_mpos.push_back(P);
    MPO Mk = P;
    for (int k = 2; k <= p.q; ++k) {
      ts = Clock::now();
      Mk = mpo_multiply_compress(Mk, P);
      r.report.stages.push_back(stage_info(Mk, k, 2 * k, p.m, cp, since(ts), opt.want_spectra));
      if (opt.keep_stages) r.stage_mpos.push_back(Mk);
    }
    r.mpo = Mk;
  }
  r.report.seconds_power = since(t0);
  finish_report(r.report, r.mpo);
  return r;
}

namespace {

BuildResult build_common(const LatticeModel& model, const GibbsPlan& p, const BuildOptions& opt) {
  validate_model(model);
  auto t0 = Clock::now();
  MPO M0;
  if (p.identity) {
    M0 = mpo_identity(model.n, model.d);
  } else {
    BlockDecomposition dec = decompose_blocks(model, p.l0);
    const cplx z = p.real_time ? cplx(0.0, p.beta0) : cplx(p.beta0, 0.0);
    M0 = high_temp_mpo(model, dec, z, p.m);
  }
  const double tf = since(t0);
  BuildResult r = power_to_target(M0, p, opt);
  r.report.seconds_factors = tf;
  r.report.stages[0].seconds = tf;
  r.report.seconds_total = since(t0);
  const std::int64_t D = model.dim();
  const bool verify = opt.verify == 1 || (opt.verify < 0 && D > 0 && D <= 1024);
  if (verify) verify_build(model, M0, r);
  return r;
}

}  // namespace

BuildResult build_gibbs_mpo(const LatticeModel& model, double beta, double eps, const Constants& c,
                            const BuildOptions& opt) {
  return build_common(model, plan(model, beta, eps, c), opt);
}

BuildResult real_time_mpo(const LatticeModel& model, double t, double eps, const Constants& c,
                          const BuildOptions& opt) {
  return build_common(model, plan_real_time(model, t, eps, c), opt);
}

void verify_build(const LatticeModel& model, const MPO& M0, BuildResult& r) {
  const GibbsPlan& p = r.report.plan;
  OracleCheck oc;
  Mat H = model.dense();
  const Eigen::Index D = H.rows();
  const Mat I = Mat::Identity(D, D);
  Mat M = mpo_to_dense(r.mpo);
  const double tol_cert = r.report.certified_bound;
  if (p.real_time) {
    Mat m0 = mpo_to_dense(M0);
    oc.step_error = p.identity ? 0.0 : op_norm(m0 * herm_exp(H, cplx(0.0, p.beta0)) - I);
    Mat U = herm_exp(H, cplx(0.0, -p.t));
    oc.rel_err_pinf = op_norm(M - U);
    oc.rel_err_p2 = (M - U).norm() / U.norm();
    oc.rel_err_p1 = schatten_norm(M - U, 1.0) / schatten_norm(U, 1.0);
    oc.unitarity = op_norm(M.adjoint() * M - I);
    oc.pass = oc.rel_err_pinf <= tol_cert + 1e-12;
  } else {
    Mat m0 = mpo_to_dense(M0);
    oc.step_error = p.identity ? 0.0 : op_norm(m0 * herm_exp(H, cplx(p.beta0, 0.0)) - I);
    Mat E = herm_exp(H, cplx(-p.beta, 0.0));
    const Mat diff = M - E;
    const RVec se = singular_values(E);
    const RVec sd = singular_values(diff);
    oc.rel_err_p1 = schatten_norm_from_sv(sd, 1.0) / schatten_norm_from_sv(se, 1.0);
    oc.rel_err_p2 = diff.norm() / E.norm();
    oc.rel_err_pinf = schatten_norm_from_sv(sd, kInf) / schatten_norm_from_sv(se, kInf);
    oc.hermiticity = (M - M.adjoint()).norm() / std::max(M.norm(), 1e-300);
    Mat Hm = 0.5 * (M + M.adjoint());
    oc.min_eig = eigh(Hm, false).values(0);
    oc.positivity_floor = -p.eps * schatten_norm_from_sv(se, kInf);
    oc.pass = oc.rel_err_p1 <= tol_cert + 1e-12 && oc.rel_err_p2 <= tol_cert + 1e-12 && oc.hermiticity <= 1e-8 &&
              oc.min_eig >= oc.positivity_floor;
  }
  r.report.oracle = oc;
}

std::pair<MPO, CutLocalReport> cut_local_approximant(const LatticeModel& model, double beta, int cut, double delta,
                                                     int window_half) {
  if (model.dim() < 0 || model.dim() > kOracleCap) fail(ErrorKind::ResourceCap, "cut_local_approximant is oracle-scale only");
  if (cut < 1 || cut >= model.n) fail(ErrorKind::Validation, "cut out of range");
  if (!(beta >= 0.0)) fail(ErrorKind::Validation, "beta must be nonnegative");
  if (!(delta > 0.0)) fail(ErrorKind::Validation, "delta must be positive");
  CutLocalReport rep;
  rep.cut = cut;
  const int n = model.n, d = model.d;
  int first = 0, last = n;
  if (window_half >= 0) {
    first = std::max(0, cut - window_half);
    last = std::min(n, cut + window_half);
  }
  rep.window_first = first;
  rep.window_sites = last - first;
  const Eigen::Index D = model.dim();
  Mat HS = Mat::Zero(D, D);
  for (int t = first; t + 1 < last; ++t) HS += embed_two_site(model.terms[t], d, t, n);
  const Mat H = model.dense();
  const bool whole = (first == 0 && last == n);

  const Eigh esS = eigh(HS);
  const RVec& eS = esS.values;
  rep.lambda_min = eS(0);
  rep.b = beta * (eS(D - 1) - eS(0));
  const double pref = std::exp(-beta * rep.lambda_min);

  Mat core;
  ChebyshevExpansion ce;
  if (rep.b <= 0.0 || delta >= 1.0) {
    rep.degenerate = delta >= 1.0;
    rep.degree = 0;
    ce = cheb_exp_coeffs(std::max(rep.b, 0.0), 0);
    if (rep.b > 0) rep.sup_error = cheb_sup_error(ce);
    if (rep.degenerate) rep.note = "delta >= 1: degree-0 window";
  } else {
    DegreeResult dr = required_degree(rep.b, delta);
    rep.degree = dr.degree;
    rep.sup_error = dr.sup_error;
    ce = cheb_exp_coeffs(rep.b, dr.degree);
  }
  const Mat shifted = HS - rep.lambda_min * Mat::Identity(D, D);
  core = pref * eval_poly_matrix(ce, shifted, beta);

  // exact edge factors; identity when the window is the whole chain
  Mat Phi;
  if (!whole) {
    Phi = herm_exp(HS, cplx(beta / 2, 0.0)) * herm_exp(H, cplx(-beta / 2, 0.0));
    rep.note += (rep.note.empty() ? "" : "; ") + std::string("edge factors are exact dense operators");
  }
  auto wrap = [&](const Mat& X) { return whole ? X : Mat(Phi.adjoint() * X * Phi); };
  Mat rho = wrap(core);
  const Mat E = herm_exp(H, cplx(-beta, 0.0));
  const double nE = E.norm();
  rep.rel_err_p2 = (rho - E).norm() / nE;

  auto rank_of = [&](const Mat& X) {
    RVec s = operator_schmidt_values(X, n, d, cut);
    int k = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > kRankCut * s(0)) ++k;
    return k;
  };
  rep.rank = rank_of(rho);
  rep.core_rank = whole ? rep.rank : rank_of(core);
  {
    RVec s = operator_schmidt_values(E, n, d, cut);
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > kRankCut * s(0)) ++rep.exact_rank;
    const double budget = rep.rel_err_p2 * rep.rel_err_p2 * nE * nE;
    double tail = s.squaredNorm();
    rep.exact_rank_at_err = static_cast<int>(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (tail <= budget) {
        rep.exact_rank_at_err = static_cast<int>(std::max<Eigen::Index>(k, 1));
        break;
      }
      tail -= s(k) * s(k);
    }
  }

  // shifted Taylor surrogate on the same window, diagonal in the eigenbasis of H_S;
  // ||Phi^dag V diag(x) V^dag Phi - E||_2 is evaluated through K = G G^dag, G = V^dag Phi
  const Mat& V = esS.vectors;
  Vec ex(D);
  for (Eigen::Index i = 0; i < D; ++i) ex(i) = pref * std::exp(-beta * (eS(i) - eS(0)));
  RMat K2;
  if (whole) {
    K2 = RMat::Identity(D, D);
  } else {
    Mat G = V.adjoint() * Phi;
    K2 = (G * G.adjoint()).cwiseAbs2();
  }
  auto taylor_diag = [&](int k) {
    TaylorPoly tp = taylor_poly(k);
    Vec w(D);
    for (Eigen::Index i = 0; i < D; ++i) w(i) = pref * eval_taylor(tp, cplx(-beta * (eS(i) - eS(0)), 0.0));
    return w;
  };
  auto taylor_err = [&](const Vec& w) {
    const Vec delta = w - ex;
    const double e2 = (delta.adjoint() * K2.cast<cplx>() * delta)(0, 0).real();
    return std::sqrt(std::max(0.0, e2)) / nE;
  };
  auto taylor_op = [&](const Vec& w) { return wrap(Mat(V * w.asDiagonal() * V.adjoint())); };
  rep.taylor_degree_same = rep.degree;
  rep.taylor_err_same = taylor_err(taylor_diag(rep.degree));
  const int kmax = static_cast<int>(std::ceil(4.0 * rep.b)) + 60;
  rep.taylor_degree_matched = -1;
  for (int k = 0; k <= kmax; ++k) {
    Vec w = taylor_diag(k);
    if (taylor_err(w) <= rep.rel_err_p2) {
      rep.taylor_degree_matched = k;
      rep.taylor_rank_matched = rank_of(taylor_op(w));
      break;
    }
  }
  MPO out = mpo_from_dense(rho, n, d);
  return {out, rep};
}

MpsDecompositionStream::MpsDecompositionStream(const LatticeModel& model, double beta, double eps,
                                               std::int64_t count, std::uint64_t seed, const Constants& c)
    : rng_(seed), n_(model.n), d_(model.d) {
  if (count <= 0) fail(ErrorKind::Validation, "sample count must be positive");
  BuildOptions opt;
  opt.verify = 0;
  opt.want_spectra = false;
  BuildResult r = build_gibbs_mpo(model, beta / 2.0, eps / 6.0, c, opt);
  half_ = r.mpo;
  report_ = r.report;
  const double nm = mpo_norm2(half_);
  norm2_sq_ = nm * nm;
  total_ = model.dim();
  if (total_ < 0) total_ = std::numeric_limits<std::int64_t>::max();
  exhaustive_ = count >= total_;
  count_ = exhaustive_ ? total_ : count;
}

std::optional<MpsSample> MpsDecompositionStream::next() {
  if (emitted_ >= count_) return std::nullopt;
  std::int64_t idx = emitted_;
  if (!exhaustive_) {
    std::uniform_int_distribution<std::int64_t> u(0, total_ - 1);
    idx = u(rng_);
  }
  ++emitted_;
  MpsSample s;
  s.basis.assign(n_, 0);
  std::int64_t x = idx;
  for (int i = n_ - 1; i >= 0; --i) {
    s.basis[i] = static_cast<int>(x % d_);
    x /= d_;
  }
  s.state = mpo_apply_basis(half_, s.basis);
  const double nv = s.state.norm();
  double w = norm2_sq_ > 0 ? nv * nv / norm2_sq_ : 0.0;
  if (!exhaustive_) w *= static_cast<double>(total_) / static_cast<double>(count_);
  s.weight = w;
  if (nv > 0) s.state.scale(1.0 / nv);
  return s;
}

std::vector<MpsSample> sample_mps_decomposition(const LatticeModel& model, double beta, double eps, std::int64_t count,
                                                std::uint64_t seed, const Constants& c) {
  MpsDecompositionStream st(model, beta, eps, count, seed, c);
  std::vector<MpsSample> out;
  while (auto s = st.next()) out.push_back(std::move(*s));
  return out;
}

}  // namespace gibbsmpo
