// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gibbsmpo/analysis.hpp"
#include "gibbsmpo/bench.hpp"
#include "gibbsmpo/densela.hpp"
#include "gibbsmpo/gibbs.hpp"
#include "gibbsmpo/polyapprox.hpp"

using namespace gibbsmpo;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Mat random_mat(int r, int c, std::mt19937_64& g) {
  std::normal_distribution<double> nd;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) {
      const double re = nd(g);
      const double im = nd(g);
      m(i, j) = cplx(re, im);
    }
  return m;
}

// C1: Schatten-1 and -2 relative errors at n = 8 against the dense exponential
Outcome c1(const Constants& c) {
  const auto t0 = Clock::now();
  std::vector<std::string> models{"preset=tfim n=8 J=1 h=0.9"};
  for (int s = 1; s <= 5; ++s) models.push_back("preset=random n=8 d=2 seed=" + std::to_string(s));
  double worst1 = 0, worst2 = 0;
  for (const auto& cfg : models) {
    LatticeModel m = load_model(cfg);
    for (double beta : {1.0 / 16, 0.25, 1.0, 2.0}) {
      BuildResult r = build_gibbs_mpo(m, beta, 1e-2, c, {0, false, false});
      const Mat E = exact_exp(m, beta);
      const Mat diff = mpo_to_dense(r.mpo) - E;
      worst1 = std::max(worst1, schatten_norm(diff, 1) / schatten_norm(E, 1));
      worst2 = std::max(worst2, schatten_norm(diff, 2) / schatten_norm(E, 2));
    }
  }
  const double secs = seconds_since(t0);
  return {worst1 <= 1e-2 && worst2 <= 1e-2 && secs < 120,
          "worst p1 " + num(worst1) + ", worst p2 " + num(worst2) + " over 24 builds, " + num(secs) + " s"};
}

// C2: one high-temperature factor at beta0 = 1/16 with eps0 = 1e-4
Outcome c2(const Constants& c) {
  const auto t0 = Clock::now();
  LatticeModel m = load_model("preset=tfim n=8 J=1 h=0.9");
  double worst = 0;
  for (const std::string cfg : {"preset=tfim n=8 J=1 h=0.9", "preset=random n=8 d=2 seed=1"}) {
    m = load_model(cfg);
    // beta = 1/8 gives q = 1, beta0 = 1/16, eps0 = eps / 6
    GibbsPlan p = plan(m, 0.125, 6e-4, c);
    if (p.q != 1 || std::abs(p.beta0 - 1.0 / 16) > 1e-15 || std::abs(p.eps0 - 1e-4) > 1e-15)
      return {false, "plan did not produce beta0 = 1/16, eps0 = 1e-4"};
    BlockDecomposition dec = decompose_blocks(m, p.l0);
    MPO M0 = high_temp_mpo(m, dec, p.beta0, p.m);
    const Mat H = m.dense();
    const Mat step = mpo_to_dense(M0) * herm_exp(H, p.beta0) - Mat::Identity(H.rows(), H.cols());
    worst = std::max(worst, op_norm(step));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 30, "max ||M e^{b0 H} - 1|| = " + num(worst) + ", " + num(secs) + " s"};
}

// C3: tight-binding spreading fits
Outcome c3() {
  const auto t0 = Clock::now();
  std::vector<double> ts, bs;
  for (int i = 0; i < 10; ++i) ts.push_back(5.0 + 5.0 * i);
  for (int i = 0; i < 12; ++i) bs.push_back(5.0 * std::pow(20.0, i / 11.0));
  auto rows = tight_binding_demo(500, ts, bs);
  std::vector<double> xr, yr, xi, yi;
  for (const auto& r : rows) {
    if (r.mode == "real") {
      xr.push_back(r.x);
      yr.push_back(r.sqrt_var);
    } else {
      xi.push_back(r.x);
      yi.push_back(r.sqrt_var);
    }
  }
  Fit fr = fit_linear(xr, yr);
  Fit fi = fit_loglog(xi, yi);
  const double pref = std::exp(fi.intercept);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(fr.slope / std::sqrt(2.0) - 1) <= 0.02 && std::abs(fi.slope - 0.5) <= 0.02 &&
                  std::abs(pref - 1.0) <= 0.02 && secs < 60;
  return {ok, "real slope " + num(fr.slope) + ", imag exponent " + num(fi.slope) + " prefactor " + num(pref) + ", " +
                  num(secs) + " s"};
}

// C4: minimal Chebyshev degree scaling at delta = 1e-3
Outcome c4() {
  const auto t0 = Clock::now();
  std::vector<double> b{1e2, 1e3, 1e4}, deg;
  double worst = 0;
  for (double x : b) {
    DegreeResult r = required_degree(x, 1e-3);
    deg.push_back(r.degree);
    worst = std::max(worst, cheb_sup_error(cheb_exp_coeffs(x, r.degree), 10000));
  }
  Fit f = fit_loglog(b, deg);
  const double secs = seconds_since(t0);
  return {f.slope >= 0.45 && f.slope <= 0.55 && worst <= 1e-3 && secs < 60,
          "degrees " + num(deg[0]) + "," + num(deg[1]) + "," + num(deg[2]) + " exponent " + num(f.slope) +
              ", worst sup error " + num(worst) + ", " + num(secs) + " s"};
}

// C5: random-walk kernel
Outcome c5() {
  WalkKernel k = walk_kernel(32);
  const double deficit = std::abs(k.total() + k.tail_mass - 1.0);
  double agree = 0;
  for (int b = 1; b <= 20; ++b) {
    ChebyshevExpansion w = cheb_exp_coeffs_walk(b, 40);
    ChebyshevExpansion q = cheb_exp_coeffs(b, 40);
    for (int r = 0; r <= 40; ++r) agree = std::max(agree, std::abs(w.coeffs[r] - q.coeffs[r]));
  }
  const bool ok = k.max_asymmetry() <= 1e-12 && deficit <= 1e-10 && std::abs(k.variance() - 0.5) <= 1e-6 &&
                  agree <= 1e-8;
  return {ok, "asymmetry " + num(k.max_asymmetry()) + ", deficit " + num(deficit) + ", variance " +
                  num(k.variance()) + ", walk vs quadrature " + num(agree)};
}

// C6: power-lemma inequalities and Eckart-Young on random draws
Outcome c6() {
  std::mt19937_64 g(2024);
  std::uniform_int_distribution<int> qd(1, 4), pd(1, 4), Dd(1, 8);
  std::uniform_real_distribution<double> ld(-4.0, 0.0);
  int draws = 0, lemma_fail = 0, ey_fail = 0, skipped = 0;
  while (draws < 200) {
    Mat O = random_mat(16, 16, g);
    Mat dO = random_mat(16, 16, g);
    const int q = qd(g);
    const double p = pd(g);
    // scale the perturbation to a log-uniform relative size
    dO *= std::pow(10.0, ld(g)) * schatten_norm(O, 2.0 * q * p) / schatten_norm(dO, 2.0 * q * p);
    PowerLemmaReport r = power_lemma_check(O, O + dO, q, p);
    if (!r.precondition) {
      ++skipped;
      continue;
    }
    ++draws;
    if (!r.pass || !r.pass_sq) ++lemma_fail;
    EckartYoungReport e = eckart_young_check(O, 4, 2, 2, Dd(g), g(), 50);
    if (!e.pass) ++ey_fail;
  }
  return {lemma_fail == 0 && ey_fail == 0, "200 draws (" + std::to_string(skipped) + " with delta > 1 redrawn): " +
                                               std::to_string(lemma_fail) + " power-lemma failures, " +
                                               std::to_string(ey_fail) + " Eckart-Young failures"};
}

// C7: thermal area law and the purification chain on every cut
Outcome c7() {
  const auto t0 = Clock::now();
  const std::vector<std::string> models{"preset=tfim n=8 J=1 h=0.9", "preset=heisenberg n=8",
                                        "preset=random n=10 d=2 seed=3", "preset=random n=6 d=3 seed=4"};
  int checked = 0, area_fail = 0, chain_fail = 0;
  double worst_ratio = 0;
  for (const auto& cfg : models) {
    LatticeModel m = load_model(cfg);
    for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      for (const auto& r : entropy_sweep(m, beta, {1.0}, true)) {
        ++checked;
        if (r.I > r.bound_eq1 + 1e-8) ++area_fail;
        if (r.I > 2 * r.E_alpha[0] + 1e-8) ++chain_fail;
        if (r.bound_eq1 > 0) worst_ratio = std::max(worst_ratio, r.I / r.bound_eq1);
      }
    }
  }
  return {area_fail == 0 && chain_fail == 0,
          std::to_string(checked) + " (model, beta, cut) points, max I / (2 beta ||h||) = " + num(worst_ratio) +
              ", " + std::to_string(area_fail) + " area-law and " + std::to_string(chain_fail) +
              " purification failures, " + num(seconds_since(t0)) + " s"};
}

// C8: exhaustive MPS decomposition of the Gibbs state
Outcome c8(const Constants& c) {
  LatticeModel m = load_model("preset=tfim n=6 J=1 h=0.9");
  const double beta = 1.0;
  MpsDecompositionStream st(m, beta, 1e-2, m.dim(), 7, c);
  Mat rho = Mat::Zero(m.dim(), m.dim());
  double wsum = 0;
  while (auto s = st.next()) {
    const Vec v = s->state.to_dense();
    rho += s->weight * v * v.adjoint();
    wsum += s->weight;
  }
  const GibbsState g = exact_gibbs(m, beta);
  const double tdist = schatten_norm(g.rho.data - rho, 1);
  return {st.exhaustive() && std::abs(wsum - 1) <= 1e-8 && tdist <= 1e-2,
          "sum p = 1 " + std::string(wsum >= 1 ? "+ " : "- ") + num(std::abs(wsum - 1)) + ", trace distance " +
              num(tdist)};
}

// C9: Schmidt-rank bound with C' fitted on stage 0 and checked on every stage
Outcome c9(const Constants& base) {
  const auto t0 = Clock::now();
  LatticeModel m = load_model("preset=tfim n=64 J=1 h=0.9");
  struct Run {
    int m = 0;
    std::vector<StageInfo> stages;
  };
  std::vector<Run> runs;
  for (int q : {1, 2, 3}) {
    for (int mm : {3, 4, 5}) {
      Constants c = base;
      GibbsPlan p = plan(m, q / 8.0, 1e-2, c);
      p.m = mm;
      BlockDecomposition dec = decompose_blocks(m, p.l0);
      MPO M0 = high_temp_mpo(m, dec, p.beta0, mm);
      BuildResult r = power_to_target(M0, p, {0, false, true});
      runs.push_back({mm, r.report.stages});
    }
  }
  double cprime = 0;
  for (const auto& r : runs)
    for (double l : r.stages[0].log_sr) cprime = std::max(cprime, l / log_rank_bound(1.0, 1, r.m));
  int checked = 0, fails = 0;
  double worst = 0;
  for (const auto& r : runs)
    for (const auto& s : r.stages)
      for (double l : s.log_sr) {
        ++checked;
        const double bound = log_rank_bound(cprime, s.power, r.m);
        worst = std::max(worst, l / bound);
        if (l > bound + 1e-12) ++fails;
      }
  return {fails == 0 && cprime > 0, "C' = " + num(cprime) + " fitted on stage 0; " + std::to_string(checked) +
                                        " (stage, cut) points, max log SR / bound = " + num(worst) + ", " +
                                        num(seconds_since(t0)) + " s"};
}

// C10: build time per site at beta = 1/4
Outcome c10(const Constants& c) {
  std::vector<double> per;
  std::string cells;
  for (int n : {32, 64, 128, 256}) {
    LatticeModel m = load_model("preset=tfim n=" + std::to_string(n) + " J=1 h=0.9");
    std::vector<double> t;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      BuildResult r = build_gibbs_mpo(m, 0.25, 1e-2, c, {0, false, false});
      t.push_back(seconds_since(t0));
    }
    std::sort(t.begin(), t.end());
    per.push_back(t[1] / n);
    cells += " n=" + std::to_string(n) + ":" + num(1e3 * t[1] / n) + "ms";
  }
  const double ratio = *std::max_element(per.begin(), per.end()) / *std::min_element(per.begin(), per.end());
  return {ratio <= 2.0, "time/n" + cells + ", max/min " + num(ratio)};
}

// C11: growth exponent of the bond measure, real vs imaginary time
Outcome c11(const Constants& c) {
  LatticeModel m = load_model("preset=tfim n=8 J=1 h=0.9");
  const std::vector<double> xs{0.25, 0.5, 1.0, 2.0};
  std::vector<double> yi, yr;
  for (double x : xs) {
    yi.push_back(max_log_bond_at(build_gibbs_mpo(m, x, 1e-3, c, {0, false, false}).mpo, 1e-3));
    yr.push_back(max_log_bond_at(real_time_mpo(m, x, 1e-3, c, {0, false, false}).mpo, 1e-3));
  }
  for (double v : yi)
    if (!(v > 0)) return {false, "zero bond measure in the imaginary-time scan"};
  Fit fi = fit_loglog(xs, yi), fr = fit_loglog(xs, yr);
  std::ostringstream d;
  d << "exponent real " << num(fr.slope) << " vs imaginary " << num(fi.slope) << " (log-bond real";
  for (double v : yr) d << " " << num(v);
  d << "; imaginary";
  for (double v : yi) d << " " << num(v);
  d << ")";
  return {fr.slope > fi.slope, d.str()};
}

}  // namespace

int main() {
  const Constants c = Constants::builtin();
  std::vector<std::pair<std::string, std::function<Outcome()>>> crits{
      {"C1 oracle equivalence", [&] { return c1(c); }},
      {"C2 single-step operator-norm certificate", [&] { return c2(c); }},
      {"C3 tight-binding spreading", [] { return c3(); }},
      {"C4 Chebyshev degree scaling", [] { return c4(); }},
      {"C5 random-walk kernel", [] { return c5(); }},
      {"C6 power lemma and Eckart-Young", [] { return c6(); }},
      {"C7 area law and purification chain", [] { return c7(); }},
      {"C8 MPS decomposition", [&] { return c8(c); }},
      {"C9 Schmidt-rank bound", [&] { return c9(c); }},
      {"C10 time per site", [&] { return c10(c); }},
      {"C11 real vs imaginary bond growth", [&] { return c11(c); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : crits) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(crits.size()) - failed, crits.size());
  return failed == 0 ? 0 : 1;
}
