#include "gibbsmpo/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "gibbsmpo/analysis.hpp"
#include "gibbsmpo/densela.hpp"
#include "gibbsmpo/polyapprox.hpp"

namespace gibbsmpo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
  f << content;
  if (!f) fail(ErrorKind::Io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string model_text(const RunSpec& spec) {
  if (spec.model.empty()) fail(ErrorKind::Validation, "--model is required");
  std::error_code ec;
  if (fs::is_regular_file(spec.model, ec)) return read_file(spec.model);
  if (spec.model.find('=') != std::string::npos) return spec.model;
  fail(ErrorKind::Io, "model config not found: " + spec.model);
}

std::string with_n(const std::string& text, int n) {
  static const std::regex re(R"((^|\s)n\s*=\s*[0-9]+)");
  const std::string rep = "$1n=" + std::to_string(n);
  if (std::regex_search(text, re)) return std::regex_replace(text, re, rep);
  return text + "\nn=" + std::to_string(n) + "\n";
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

bool oracle_scale(const LatticeModel& m) { return m.dim() > 0 && m.dim() <= 1024; }

bool want_verify(const RunSpec& spec, const LatticeModel& m) {
  if (spec.verify == 0) return false;
  if (spec.verify == 1) {
    if (m.dim() < 0 || m.dim() > kOracleCap) fail(ErrorKind::ResourceCap, "verification limited to d^n <= 4096");
    return true;
  }
  return oracle_scale(m);
}

json oracle_json(const OracleCheck& o, double cert) {
  json j;
  j["step_error"] = o.step_error;
  j["p1_rel_err"] = o.rel_err_p1;
  j["p2_rel_err"] = o.rel_err_p2;
  j["pinf_rel_err"] = o.rel_err_pinf;
  j["hermiticity"] = o.hermiticity;
  j["min_eig"] = o.min_eig;
  j["positivity_floor"] = o.positivity_floor;
  j["unitarity"] = o.unitarity;
  j["certified_bound"] = cert;
  j["pass"] = o.pass;
  return j;
}

json constants_json(const Constants& c) {
  json j;
  j["c0"] = c.c0;
  j["c1"] = c.c1;
  j["c_f"] = c.c_f;
  j["c_prime"] = c.c_prime;
  j["beta0_cap"] = c.beta0_cap;
  j["local_dim_cap"] = c.local_dim_cap;
  j["calibrated"] = c.calibrated;
  j["source"] = c.source;
  j["grids"] = c.grids;
  return j;
}

// ---------------------------------------------------------------- build

int cmd_build(const RunSpec& spec, std::ostream& log) {
  const LatticeModel model = load_model_spec(spec.model);
  const Constants c = constants_for(spec);
  if (!spec.beta && !spec.t) fail(ErrorKind::Validation, "build needs --beta or --t");
  if (spec.beta && spec.t) fail(ErrorKind::Validation, "build takes either --beta or --t, not both");
  BuildOptions opt;
  opt.verify = want_verify(spec, model) ? 1 : 0;
  opt.keep_stages = spec.stages;
  BuildResult r = spec.t ? real_time_mpo(model, *spec.t, spec.eps, c, opt)
                         : build_gibbs_mpo(model, *spec.beta, spec.eps, c, opt);
  const fs::path out(spec.out);
  mpo_save(r.mpo, (out / "result.mpo1").string());
  if (spec.stages)
    for (std::size_t k = 0; k < r.stage_mpos.size(); ++k)
      mpo_save(r.stage_mpos[k], (out / ("stage_" + std::to_string(k) + ".mpo1")).string());
  json rep;
  rep["run_spec"] = spec.to_json();
  rep["report"] = report_json(r.report);
  write_json(out / "report.json", rep);
  log << "build: n=" << model.n << " " << (spec.t ? "t=" : "beta=") << fmt_num(spec.t ? *spec.t : *spec.beta)
      << " eps=" << fmt_num(spec.eps) << " max_bond=" << r.mpo.max_bond()
      << " certified_bound=" << fmt_num(r.report.certified_bound) << "\n";
  for (const auto& w : r.report.warnings) log << "warning: " << w << "\n";
  if (r.report.oracle) {
    json v = oracle_json(*r.report.oracle, r.report.certified_bound);
    v["run_spec"] = spec.to_json();
    write_json(out / "verify.json", v);
    const auto& o = *r.report.oracle;
    log << "verify: p1_rel_err=" << fmt_num(o.rel_err_p1) << " p2_rel_err=" << fmt_num(o.rel_err_p2)
        << " pinf_rel_err=" << fmt_num(o.rel_err_pinf) << " " << (o.pass ? "PASS" : "FAIL") << "\n";
    if (!o.pass) return 4;
  }
  return 0;
}

// ---------------------------------------------------------------- scan

struct ScanPoint {
  double x = 0.0;
  int n = 0;
  int max_bond = 1;
  double log_bond_eps = 0.0;
  double cert = 0.0;
  double p1 = std::nan(""), p2 = std::nan("");
  double seconds = 0.0;
};

ScanPoint scan_point(const RunSpec& spec, const std::string& base_text, const Constants& c, double x) {
  const std::string& axis = spec.axis;
  LatticeModel model = load_model(axis == "n" ? with_n(base_text, static_cast<int>(std::lround(x))) : base_text);
  double eps = spec.eps;
  bool real = false;
  double param = 0.0;
  if (axis == "beta") {
    param = x;
  } else if (axis == "t") {
    real = true;
    param = x;
  } else {
    if (axis == "eps") eps = x;
    if (spec.t) {
      real = true;
      param = *spec.t;
    } else if (spec.beta) {
      param = *spec.beta;
    } else {
      fail(ErrorKind::Validation, "scan over " + axis + " needs --beta or --t");
    }
  }
  BuildOptions opt;
  opt.verify = 0;
  opt.keep_stages = true;
  opt.want_spectra = false;
  auto build = [&](const BuildOptions& o) {
    return real ? real_time_mpo(model, param, eps, c, o) : build_gibbs_mpo(model, param, eps, c, o);
  };
  std::vector<double> times;
  auto t0 = Clock::now();
  BuildResult r = build(opt);
  times.push_back(seconds_since(t0));
  BuildOptions quiet = opt;
  quiet.keep_stages = false;
  for (int k = 1; k < std::max(1, spec.reps); ++k) {
    t0 = Clock::now();
    build(quiet);
    times.push_back(seconds_since(t0));
  }
  ScanPoint p;
  p.x = x;
  p.n = model.n;
  p.max_bond = r.mpo.max_bond();
  p.log_bond_eps = max_log_bond_at(r.mpo, eps);
  p.cert = r.report.certified_bound;
  p.seconds = median(times);
  if (want_verify(spec, model)) {
    verify_build(model, r.stage_mpos.front(), r);
    p.p1 = r.report.oracle->rel_err_p1;
    p.p2 = r.report.oracle->rel_err_p2;
  }
  return p;
}

template <class F>
void run_pool(int count, int jobs, F&& work) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string axis_unit(const std::string& axis) {
  if (axis == "beta" || axis == "t") return axis + "[1/energy]";
  if (axis == "eps") return "eps[rel]";
  return "n[sites]";
}

int cmd_scan(const RunSpec& spec, std::ostream& log) {
  const std::string& axis = spec.axis;
  if (axis != "beta" && axis != "eps" && axis != "n" && axis != "t")
    fail(ErrorKind::Validation, "--axis must be one of beta, eps, n, t");
  std::vector<double> grid = parse_grid(spec.grid);
  if (grid.empty()) fail(ErrorKind::Validation, "scan grid is empty");
  const std::string base = model_text(spec);
  const Constants c = constants_for(spec);
  std::vector<ScanPoint> pts(grid.size());
  run_pool(static_cast<int>(grid.size()), spec.jobs,
           [&](int i) { pts[i] = scan_point(spec, base, c, grid[i]); });
  std::stable_sort(pts.begin(), pts.end(), [](const ScanPoint& a, const ScanPoint& b) { return a.x < b.x; });

  std::ostringstream csv;
  csv << axis_unit(axis)
      << ",n[sites],max_bond[count],max_log_bond_eps[nats],certified_bound[rel],p1_rel_err[rel],p2_rel_err[rel],"
         "seconds[s]\n";
  for (const auto& p : pts)
    csv << fmt_num(p.x) << "," << p.n << "," << p.max_bond << "," << fmt_num(p.log_bond_eps) << "," << fmt_num(p.cert)
        << "," << fmt_num(p.p1) << "," << fmt_num(p.p2) << "," << fmt_num(p.seconds) << "\n";

  if (axis == "beta" || axis == "t") {
    std::vector<double> xs, ys;
    for (const auto& p : pts)
      if (p.x > 0 && p.log_bond_eps > 0) {
        xs.push_back(p.x);
        ys.push_back(p.log_bond_eps);
      }
    if (xs.size() >= 2) {
      Fit f = fit_loglog(xs, ys);
      csv << "# fit log(max_log_bond_eps) = a + p log(" << axis << "): p=" << fmt_num(f.slope)
          << " a=" << fmt_num(f.intercept) << " r2=" << fmt_num(f.r2) << " points=" << f.points << "\n";
      log << "scan " << axis << ": growth exponent " << fmt_num(f.slope) << " (r2 " << fmt_num(f.r2) << ")\n";
    }
  } else if (axis == "eps") {
    std::vector<double> xs, ys;
    for (const auto& p : pts) {
      xs.push_back(std::sqrt(std::log(1.0 / p.x)));
      ys.push_back(p.log_bond_eps);
    }
    if (xs.size() >= 2) {
      Fit f = fit_linear(xs, ys);
      csv << "# fit max_log_bond_eps = a + s sqrt(log(1/eps)): s=" << fmt_num(f.slope) << " a=" << fmt_num(f.intercept)
          << " r2=" << fmt_num(f.r2) << " points=" << f.points << "\n";
      log << "scan eps: affine fit r2 " << fmt_num(f.r2) << "\n";
    }
  } else {
    double lo = 1e300, hi = 0.0;
    for (const auto& p : pts) {
      const double r = p.seconds / p.n;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    csv << "# time_per_site ratio max/min=" << fmt_num(hi / lo) << "\n";
    log << "scan n: time/n ratio " << fmt_num(hi / lo) << "\n";
  }
  const fs::path out(spec.out);
  write_file(out / ("scan_" + axis + ".csv"), csv.str());
  write_json(out / "run_spec.json", spec.to_json());
  return 0;
}

// ---------------------------------------------------------------- calibrate

double step_error(const LatticeModel& model, int l0, int m, double beta0) {
  BlockDecomposition dec = decompose_blocks(model, l0);
  MPO M0 = high_temp_mpo(model, dec, beta0, m);
  Mat H = model.dense();
  const Eigen::Index D = H.rows();
  return op_norm(mpo_to_dense(M0) * herm_exp(H, cplx(beta0, 0.0)) - Mat::Identity(D, D));
}

int max_l0_for(const LatticeModel& model, const Constants& c) {
  int l0 = 2;
  while (ipow(model.d, 2 * (l0 + 1) + 1) > 0 && ipow(model.d, 2 * (l0 + 1) + 1) <= c.local_dim_cap &&
         l0 + 1 <= model.n / 2)
    ++l0;
  return l0;
}

int cmd_calibrate(const RunSpec& spec, std::ostream& log) {
  Constants c = constants_for(spec);
  json rep;
  rep["run_spec"] = spec.to_json();
  const int n = 8;
  const std::vector<std::string> models = {
      "preset=tfim n=8 J=1 h=0.9 g=1",
      "preset=random n=8 d=2 g=1 seed=" + std::to_string(spec.seed),
  };
  const std::vector<double> eps0s = {1e-3, 1e-5, 1e-7};
  const double beta0 = c.beta0_cap;

  // c1: smallest Taylor degree meeting eps0 at the default block length
  double c1 = 0.0;
  json c1_rows = json::array();
  for (const auto& mt : models) {
    LatticeModel model = load_model(mt);
    for (double e0 : eps0s) {
      const double L = std::log(6.0 * n / e0);
      const int l0 = std::min(max_l0_for(model, c), std::max(2, static_cast<int>(std::ceil(c.c0 * L))));
      int m = 1;
      while (m < 60 && step_error(model, l0, m, beta0) > e0) ++m;
      c1 = std::max(c1, m / L);
      c1_rows.push_back({{"model", model.name}, {"eps0", e0}, {"l0", l0}, {"m", m}, {"ratio", m / L}});
    }
  }
  // c0: smallest block length meeting eps0 with a generous degree
  double c0 = 0.0;
  json c0_rows = json::array();
  for (const auto& mt : models) {
    LatticeModel model = load_model(mt);
    const int lmax = max_l0_for(model, c);
    for (double e0 : eps0s) {
      const double L = std::log(6.0 * n / e0);
      const int m = static_cast<int>(std::ceil(c1 * L)) + 2;
      int l0 = 2;
      double err = step_error(model, l0, m, beta0);
      while (err > e0 && l0 < lmax) err = step_error(model, ++l0, m, beta0);
      c0 = std::max(c0, l0 / L);
      c0_rows.push_back({{"model", model.name}, {"eps0", e0}, {"l0", l0}, {"m", m}, {"step_error", err}});
    }
  }
  // c_f: OLS through the origin of measured degree vs sqrt(max(b, L) L)
  double sxy = 0, sxx = 0;
  std::vector<std::pair<double, double>> deg_pts;
  for (double b : {1e2, 1e3, 1e4})
    for (double dl : {1e-2, 1e-3}) {
      const double s = degree_shape(b, dl);
      const int m = required_degree(b, dl).degree;
      deg_pts.push_back({s, static_cast<double>(m)});
      sxy += s * m;
      sxx += s * s;
    }
  if (sxx <= 0) fail(ErrorKind::Validation, "calibration: c_f fit has no points");
  const double c_f = sxy / sxx;
  double res = 0;
  for (auto [s, m] : deg_pts) res += std::pow((m - c_f * s) / m, 2);
  const double c_f_rms = std::sqrt(res / deg_pts.size());
  // C': largest measured log SR over the log-rank shape on a structure-only sweep
  double c_prime = 0.0;
  {
    LatticeModel model = load_model("preset=tfim n=16 J=1 h=0.9 g=1");
    for (int q : {1, 2, 4})
      for (int m : {4, 8, 12}) {
        GibbsPlan p = plan(model, 2.0 * q * beta0, 1e-2, c);
        p.m = m;
        BlockDecomposition dec = decompose_blocks(model, p.l0);
        MPO M0 = high_temp_mpo(model, dec, p.beta0, m);
        BuildResult r = power_to_target(M0, p);
        for (const auto& st : r.report.stages) {
          const double shape = log_rank_bound(1.0, st.power, m);
          for (double ls : st.log_sr) c_prime = std::max(c_prime, ls / shape);
        }
      }
  }
  if (!(c0 > 0 && c1 > 0 && c_f > 0 && c_prime > 0) || !std::isfinite(c_f))
    fail(ErrorKind::Validation, "calibration fit failed");

  Constants out = Constants::builtin();
  out.beta0_cap = c.beta0_cap;
  out.local_dim_cap = c.local_dim_cap;
  out.c0 = c0;
  out.c1 = c1;
  out.c_f = c_f;
  out.c_prime = c_prime;
  out.calibrated = true;
  out.source = "calibrate";
  out.grids["c0"] = "tfim+random n=8, beta0=cap, eps0 in {1e-3,1e-5,1e-7}, max over l0/log(6n/eps0)";
  out.grids["c1"] = "tfim+random n=8, beta0=cap, eps0 in {1e-3,1e-5,1e-7}, max over m/log(6n/eps0)";
  out.grids["c_f"] = "b in {1e2,1e3,1e4}, delta in {1e-2,1e-3}, OLS through origin";
  out.grids["c_prime"] = "tfim n=16, q in {1,2,4}, m in {4,8,12}, max over stages and cuts";
  const fs::path dir(spec.out);
  write_file(dir / "constants.txt", out.to_text());
  rep["c1_points"] = c1_rows;
  rep["c0_points"] = c0_rows;
  rep["c_f_rms_relative_residual"] = c_f_rms;
  rep["constants"] = constants_json(out);
  write_json(dir / "calibration.json", rep);
  log << "calibrate: c0=" << fmt_num(c0) << " c1=" << fmt_num(c1) << " c_f=" << fmt_num(c_f)
      << " (rms rel residual " << fmt_num(c_f_rms) << ") c_prime=" << fmt_num(c_prime) << "\n";
  return 0;
}

// ---------------------------------------------------------------- randomwalk

int cmd_randomwalk(const RunSpec& spec, std::ostream& log) {
  const std::vector<double> times = parse_grid(spec.grid.empty() ? "0:50:51" : spec.grid);
  const std::vector<double> betas = parse_grid(spec.beta_grid.empty() ? "0:100:101" : spec.beta_grid);
  auto rows = tight_binding_demo(spec.R, times, betas);
  std::ostringstream csv;
  csv << "mode,x_value[t or beta],sqrt_var[sites]\n";
  std::vector<double> rt, rv, it, iv;
  for (const auto& r : rows) {
    csv << r.mode << "," << fmt_num(r.x) << "," << fmt_num(r.sqrt_var) << "\n";
    if (r.mode == "real" && r.x >= 5 && r.x <= 50) {
      rt.push_back(r.x);
      rv.push_back(r.sqrt_var);
    }
    if (r.mode == "imag" && r.x >= 5 && r.x <= 100) {
      it.push_back(r.x);
      iv.push_back(r.sqrt_var);
    }
  }
  int code = 0;
  if (rt.size() >= 2) {
    Fit f = fit_linear(rt, rv);
    const bool ok = std::abs(f.slope / std::sqrt(2.0) - 1.0) <= 0.02;
    csv << "# real fit sqrt_var = a + s t over [5,50]: s=" << fmt_num(f.slope) << " a=" << fmt_num(f.intercept)
        << " r2=" << fmt_num(f.r2) << "\n";
    log << "randomwalk real: slope=" << fmt_num(f.slope) << " target=sqrt(2) " << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) code = 4;
  }
  if (it.size() >= 2) {
    Fit f = fit_loglog(it, iv);
    const double a = std::exp(f.intercept);
    const bool ok = std::abs(f.slope - 0.5) <= 0.02 && std::abs(a - 1.0) <= 0.02;
    csv << "# imag fit sqrt_var = a beta^p over [5,100]: p=" << fmt_num(f.slope) << " a=" << fmt_num(a)
        << " r2=" << fmt_num(f.r2) << "\n";
    log << "randomwalk imag: exponent=" << fmt_num(f.slope) << " prefactor=" << fmt_num(a) << " "
        << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) code = 4;
  }
  const fs::path out(spec.out);
  write_file(out / "tb.csv", csv.str());
  write_json(out / "run_spec.json", spec.to_json());
  return code;
}

// ---------------------------------------------------------------- sample-mps

int cmd_sample_mps(const RunSpec& spec, std::ostream& log) {
  const LatticeModel model = load_model_spec(spec.model);
  if (!spec.beta) fail(ErrorKind::Validation, "sample-mps needs --beta");
  const Constants c = constants_for(spec);
  std::int64_t count = spec.count;
  if (count < 0) fail(ErrorKind::Validation, "--count must be >= 0");
  if (count == 0) {
    count = model.dim();
    if (count < 0 || count > (std::int64_t(1) << 20))
      fail(ErrorKind::ResourceCap, "exhaustive sampling limited to d^n <= 2^20; pass --count");
  }
  MpsDecompositionStream st(model, *spec.beta, spec.eps, count, spec.seed, c);
  const bool dense = model.dim() > 0 && model.dim() <= 1024;
  Mat acc;
  if (dense) acc = Mat::Zero(model.dim(), model.dim());
  std::ostringstream csv;
  csv << "index[count],basis[digits],weight[prob],max_bond[count]\n";
  double total = 0.0;
  std::int64_t k = 0;
  while (auto s = st.next()) {
    std::string digits;
    for (int v : s->basis) digits += std::to_string(v);
    int mb = 1;
    for (const auto& T : s->state.A) mb = std::max(mb, std::max(T.Dl, T.Dr));
    csv << k++ << "," << digits << "," << fmt_num(s->weight) << "," << mb << "\n";
    total += s->weight;
    if (dense) {
      Vec v = s->state.to_dense();
      acc += s->weight * v * v.adjoint();
    }
  }
  int code = 0;
  json rep;
  rep["run_spec"] = spec.to_json();
  rep["exhaustive"] = st.exhaustive();
  rep["weight_sum"] = total;
  rep["samples"] = k;
  log << "sample-mps: samples=" << k << " weight_sum=" << fmt_num(total) << "\n";
  if (dense) {
    GibbsState g = exact_gibbs(model, *spec.beta);
    const double td = schatten_norm(g.rho.data - acc, 1.0);
    const bool ok = td <= spec.eps && (!st.exhaustive() || std::abs(total - 1.0) <= 1e-8);
    rep["trace_distance"] = td;
    rep["pass"] = ok;
    log << "sample-mps: trace_distance=" << fmt_num(td) << " bound=" << fmt_num(spec.eps) << " "
        << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) code = 4;
  }
  const fs::path out(spec.out);
  write_file(out / "samples.csv", csv.str());
  write_json(out / "sample_report.json", rep);
  return code;
}

// ---------------------------------------------------------------- mi

int cmd_mi(const RunSpec& spec, std::ostream& log) {
  const LatticeModel model = load_model_spec(spec.model);
  std::vector<double> betas;
  if (!spec.grid.empty())
    betas = parse_grid(spec.grid);
  else if (spec.beta)
    betas = {*spec.beta};
  else
    fail(ErrorKind::Validation, "mi needs --beta or --grid");
  const bool purif = model.dim() > 0 && model.dim() <= kOracleCap;
  std::vector<EntropyReport> all;
  for (double b : betas) {
    auto sweep = entropy_sweep(model, b, spec.alphas, purif);
    for (auto& r : sweep)
      if (spec.cut < 0 || r.cut == spec.cut) all.push_back(r);
  }
  if (all.empty()) fail(ErrorKind::Validation, "no cut selected");
  // log-space least squares for the trend constant: log I = log C + log shape
  double sum = 0.0;
  int cnt = 0;
  for (const auto& r : all)
    if (r.I > 1e-14 && r.trend_shape > 0) {
      sum += std::log(r.I) - std::log(r.trend_shape);
      ++cnt;
    }
  const double C = cnt ? std::exp(sum / cnt) : 0.0;
  double rss = 0.0;
  for (const auto& r : all)
    if (r.I > 1e-14 && r.trend_shape > 0) rss += std::pow(std::log(r.I) - std::log(C * r.trend_shape), 2);
  std::ostringstream csv;
  csv << "n[sites],beta[1/energy],cut[site],I[nats],bound_eq1[nats],fitted_trend[nats]\n";
  bool ok = true;
  for (const auto& r : all) {
    csv << r.n << "," << fmt_num(r.beta) << "," << r.cut << "," << fmt_num(r.I) << "," << fmt_num(r.bound_eq1) << ","
        << fmt_num(C * r.trend_shape) << "\n";
    ok = ok && r.area_law_ok && r.purification_chain_ok;
  }
  csv << "# trend I ~ C beta^(2/3) log(beta): C=" << fmt_num(C)
      << " rms_log_residual=" << fmt_num(cnt ? std::sqrt(rss / cnt) : 0.0) << " points=" << cnt << "\n";
  const fs::path out(spec.out);
  write_file(out / "mi.csv", csv.str());
  if (purif) {
    std::ostringstream pc;
    pc << "n[sites],beta[1/energy],alpha[1],E_alpha[nats upper estimate],I_half[nats]\n";
    const int mid = model.n / 2;
    for (const auto& r : all) {
      if (r.cut != mid && !(spec.cut >= 0 && r.cut == spec.cut)) continue;
      for (std::size_t a = 0; a < r.alphas.size(); ++a)
        pc << r.n << "," << fmt_num(r.beta) << "," << fmt_num(r.alphas[a]) << "," << fmt_num(r.E_alpha[a]) << ","
           << fmt_num(r.I) << "\n";
    }
    write_file(out / "purif.csv", pc.str());
  }
  write_json(out / "run_spec.json", spec.to_json());
  log << "mi: rows=" << all.size() << " area_law_and_purification_chain " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 4;
}

// ---------------------------------------------------------------- cheb-frontier

int cmd_cheb_frontier(const RunSpec& spec, std::ostream& log) {
  const std::vector<double> bs = parse_grid(spec.grid.empty() ? "100,1000,10000" : spec.grid);
  const std::vector<double> deltas = spec.deltas.empty() ? std::vector<double>{1e-2, 1e-3} : spec.deltas;
  std::ostringstream csv;
  csv << "b[1],delta[abs],degree_measured[count],degree_formula[count],sup_error[abs]\n";
  for (double dl : deltas) {
    std::vector<double> xs, ys;
    for (double b : bs) {
      DegreeResult r = required_degree(b, dl, constants_for(spec).c_f);
      csv << fmt_num(b) << "," << fmt_num(dl) << "," << r.degree << "," << fmt_num(r.formula) << ","
          << fmt_num(r.sup_error) << "\n";
      if (r.degree > 0) {
        xs.push_back(b);
        ys.push_back(r.degree);
      }
    }
    if (xs.size() >= 2) {
      Fit f = fit_loglog(xs, ys);
      csv << "# delta=" << fmt_num(dl) << " fit degree = a b^p: p=" << fmt_num(f.slope)
          << " a=" << fmt_num(std::exp(f.intercept)) << " r2=" << fmt_num(f.r2) << "\n";
      log << "cheb-frontier delta=" << fmt_num(dl) << ": exponent " << fmt_num(f.slope) << "\n";
    }
  }
  const fs::path out(spec.out);
  write_file(out / "cheb_frontier.csv", csv.str());
  write_json(out / "run_spec.json", spec.to_json());
  return 0;
}

}  // namespace

// ---------------------------------------------------------------- public

json RunSpec::to_json() const {
  json j;
  j["subcommand"] = subcommand;
  j["model"] = model;
  j["beta"] = beta ? json(*beta) : json(nullptr);
  j["t"] = t ? json(*t) : json(nullptr);
  j["eps"] = eps;
  j["cut"] = cut;
  j["axis"] = axis;
  j["grid"] = grid;
  j["beta_grid"] = beta_grid;
  j["alphas"] = alphas;
  j["deltas"] = deltas;
  j["out"] = out;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["reps"] = reps;
  j["count"] = count;
  j["R"] = R;
  j["verify"] = verify;
  j["stages"] = stages;
  json ov = json::array();
  for (const auto& [k, v] : overrides) ov.push_back(k + "=" + v);
  j["overrides"] = ov;
  return j;
}

RunSpec RunSpec::from_json(const json& jin) {
  const json& j = jin.contains("run_spec") ? jin.at("run_spec") : jin;
  RunSpec s;
  try {
    s.subcommand = j.value("subcommand", "");
    s.model = j.value("model", "");
    if (j.contains("beta") && !j["beta"].is_null()) s.beta = j["beta"].get<double>();
    if (j.contains("t") && !j["t"].is_null()) s.t = j["t"].get<double>();
    s.eps = j.value("eps", s.eps);
    s.cut = j.value("cut", s.cut);
    s.axis = j.value("axis", "");
    s.grid = j.value("grid", "");
    s.beta_grid = j.value("beta_grid", "");
    if (j.contains("alphas")) s.alphas = j["alphas"].get<std::vector<double>>();
    if (j.contains("deltas")) s.deltas = j["deltas"].get<std::vector<double>>();
    s.out = j.value("out", s.out);
    s.seed = j.value("seed", s.seed);
    s.jobs = j.value("jobs", s.jobs);
    s.reps = j.value("reps", s.reps);
    s.count = j.value("count", s.count);
    s.R = j.value("R", s.R);
    s.verify = j.value("verify", s.verify);
    s.stages = j.value("stages", s.stages);
    if (j.contains("overrides"))
      for (const auto& o : j["overrides"]) {
        const std::string kv = o.get<std::string>();
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail(ErrorKind::Validation, "bad override in run spec: " + kv);
        s.overrides.push_back({kv.substr(0, eq), kv.substr(eq + 1)});
      }
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("run spec: ") + e.what());
  }
  return s;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  auto to_d = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::Validation, "bad grid value '" + s + "' in '" + text + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    if (parts.size() < 3 || parts.size() > 4) fail(ErrorKind::Validation, "grid must be a:b:steps[:log]");
    const double a = to_d(parts[0]), b = to_d(parts[1]);
    const double stepsd = to_d(parts[2]);
    const int steps = static_cast<int>(stepsd);
    if (steps < 1 || stepsd != steps) fail(ErrorKind::Validation, "grid steps must be a positive integer");
    const bool lg = parts.size() == 4;
    if (lg && parts[3] != "log") fail(ErrorKind::Validation, "grid suffix must be 'log'");
    if (lg && !(a > 0 && b > 0)) fail(ErrorKind::Validation, "log grid needs positive endpoints");
    for (int i = 0; i < steps; ++i) {
      const double f = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
      out.push_back(lg ? std::exp(std::log(a) + f * (std::log(b) - std::log(a))) : a + f * (b - a));
    }
    return out;
  }
  std::stringstream ss(text);
  std::string p;
  while (std::getline(ss, p, ','))
    if (!p.empty()) out.push_back(to_d(p));
  return out;
}

LatticeModel load_model_spec(const std::string& model) {
  RunSpec s;
  s.model = model;
  return load_model(model_text(s));
}

Constants constants_for(const RunSpec& spec) {
  Constants c = Constants::from_env();
  for (const auto& [k, v] : spec.overrides) c.apply_override(k, v);
  return c;
}

double max_log_bond_at(const MPO& M, double eps) {
  double best = 0.0;
  for (const auto& s : all_spectra(M)) {
    double tot = 0.0;
    for (double v : s.values) tot += v * v;
    const double budget = eps * eps * tot;
    double tail = 0.0;
    int k = static_cast<int>(s.values.size());
    for (int j = k - 1; j >= 1; --j) {
      if (tail + s.values[j] * s.values[j] > budget) break;
      tail += s.values[j] * s.values[j];
      k = j;
    }
    best = std::max(best, std::log(std::max(k, 1)));
  }
  return best;
}

json report_json(const BuildReport& r) {
  json j;
  const GibbsPlan& p = r.plan;
  json pj;
  pj["real_time"] = p.real_time;
  pj["beta"] = p.beta;
  pj["t"] = p.t;
  pj["eps"] = p.eps;
  pj["beta0"] = p.beta0;
  pj["q"] = p.q;
  pj["steps"] = p.steps();
  pj["eps0"] = p.eps0;
  pj["log_arg"] = p.log_arg;
  pj["l0"] = p.l0;
  pj["l0_formula"] = p.l0_formula;
  pj["l0_reduced"] = p.l0_reduced;
  pj["m"] = p.m;
  pj["identity"] = p.identity;
  j["plan"] = pj;
  j["n"] = r.n;
  j["d"] = r.d;
  j["certified_bound"] = r.certified_bound;
  j["certified_bound_form"] = p.real_time ? "K eps0 exp(K eps0)" : "3 eps0 q exp(3 eps0 q)";
  j["prop4_shape"] = r.prop4_shape;
  j["q_eps_shape"] = r.q_eps_shape;
  j["c_fit"] = r.c_fit;
  j["seconds_factors"] = r.seconds_factors;
  j["seconds_power"] = r.seconds_power;
  j["seconds_total"] = r.seconds_total;
  json st = json::array();
  for (const auto& s : r.stages) {
    json x;
    x["stage"] = s.stage;
    x["power"] = s.power;
    x["bonds"] = s.bonds;
    x["log_sr"] = s.log_sr;
    x["max_bond"] = s.max_bond;
    x["seconds"] = s.seconds;
    x["log_rank_bound"] = s.log_rank_bound;
    st.push_back(x);
  }
  j["stages"] = st;
  j["warnings"] = r.warnings;
  j["constants"] = constants_json(p.constants);
  if (r.oracle) j["oracle"] = oracle_json(*r.oracle, r.certified_bound);
  return j;
}

std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

int run_command(const RunSpec& spec, std::ostream& log) {
  const std::string& s = spec.subcommand;
  if (!(spec.eps > 0.0)) fail(ErrorKind::Validation, "--eps must be positive");
  if (spec.jobs < 1) fail(ErrorKind::Validation, "--jobs must be >= 1");
  std::error_code ec;
  fs::create_directories(spec.out, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory " + spec.out + ": " + ec.message());
  if (s == "build") return cmd_build(spec, log);
  if (s == "scan") return cmd_scan(spec, log);
  if (s == "calibrate") return cmd_calibrate(spec, log);
  if (s == "randomwalk") return cmd_randomwalk(spec, log);
  if (s == "sample-mps") return cmd_sample_mps(spec, log);
  if (s == "mi") return cmd_mi(spec, log);
  if (s == "cheb-frontier") return cmd_cheb_frontier(spec, log);
  fail(ErrorKind::Validation, "unknown subcommand '" + s + "'");
}

int run_command_guarded(const RunSpec& spec, std::ostream& log, std::ostream& err) {
  try {
    return run_command(spec, log);
  } catch (const Error& e) {
    err << "error[" << kind_name(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gibbsmpo
