#include "gibbsmpo/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace gibbsmpo {

namespace {

double herm_norm(const Mat& h) {
  if (h.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double get_double(const std::map<std::string, std::string>& kv, const std::string& key, double def) {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Validation, "config: cannot parse " + key + "=" + it->second);
  }
}

long long get_int(const std::map<std::string, std::string>& kv, const std::string& key, long long def) {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  try {
    size_t pos = 0;
    long long v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Validation, "config: cannot parse integer " + key + "=" + it->second);
  }
}

Mat pauli(char c) {
  Mat p = Mat::Zero(2, 2);
  switch (c) {
    case 'I': p << 1, 0, 0, 1; break;
    case 'X': p << 0, 1, 1, 0; break;
    case 'Y': p << 0, cplx(0, -1), cplx(0, 1), 0; break;
    case 'Z': p << 1, 0, 0, -1; break;
  }
  return p;
}

Mat kron2(const Mat& a, const Mat& b) {
  Mat r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

// Scale all terms so the largest site sum equals g, never exceeding it.
void normalize_budget(LatticeModel& m) {
  double s = m.site_norm_max();
  if (s <= 0.0) return;
  double f = m.g / s;
  for (auto& t : m.terms) t *= f;
  for (int guard = 0; guard < 8 && m.site_norm_max() > m.g; ++guard)
    for (auto& t : m.terms) t *= (1.0 - 4e-16);
}

LatticeModel build_tfim(int n, double J, double h) {
  LatticeModel m;
  m.n = n;
  m.d = 2;
  m.name = "tfim";
  Mat zz = kron2(pauli('Z'), pauli('Z'));
  Mat xi = kron2(pauli('X'), pauli('I'));
  Mat ix = kron2(pauli('I'), pauli('X'));
  for (int i = 0; i < n - 1; ++i) {
    double hl = (i == 0) ? 1.0 : 0.5;
    double hr = (i == n - 2) ? 1.0 : 0.5;
    m.terms.push_back(-J * zz - h * hl * xi - h * hr * ix);
  }
  return m;
}

LatticeModel build_heisenberg(int n, double J, double Jz, double h) {
  LatticeModel m;
  m.n = n;
  m.d = 2;
  m.name = "heisenberg";
  Mat xy = 0.25 * (kron2(pauli('X'), pauli('X')) + kron2(pauli('Y'), pauli('Y')));
  Mat zz = 0.25 * kron2(pauli('Z'), pauli('Z'));
  Mat zi = 0.5 * kron2(pauli('Z'), pauli('I'));
  Mat iz = 0.5 * kron2(pauli('I'), pauli('Z'));
  for (int i = 0; i < n - 1; ++i) {
    double hl = (i == 0) ? 1.0 : 0.5;
    double hr = (i == n - 2) ? 1.0 : 0.5;
    m.terms.push_back(J * xy + Jz * zz - h * hl * zi - h * hr * iz);
  }
  return m;
}

LatticeModel build_random(int n, int d, std::uint64_t seed) {
  LatticeModel m;
  m.n = n;
  m.d = d;
  m.name = "random";
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int D = d * d;
  for (int i = 0; i < n - 1; ++i) {
    Mat a(D, D);
    for (int r = 0; r < D; ++r)
      for (int c = 0; c < D; ++c) {
        double re = nd(rng);
        double im = nd(rng);
        a(r, c) = cplx(re, im);
      }
    m.terms.push_back(0.5 * (a + a.adjoint()));
  }
  return m;
}

}  // namespace

double LatticeModel::term_norm(int i) const { return herm_norm(terms.at(i)); }

double LatticeModel::site_norm_max() const {
  std::vector<double> tn(terms.size());
  for (size_t i = 0; i < terms.size(); ++i) tn[i] = term_norm(static_cast<int>(i));
  double best = 0.0;
  for (int s = 0; s < n; ++s) {
    double v = 0.0;
    if (s - 1 >= 0) v += tn[s - 1];
    if (s < n - 1) v += tn[s];
    best = std::max(best, v);
  }
  return best;
}

bool LatticeModel::is_zero() const {
  for (const auto& t : terms)
    if (t.cwiseAbs().maxCoeff() != 0.0) return false;
  return true;
}

Mat LatticeModel::dense() const {
  auto D = dim();
  if (D < 0 || D > kOracleCap)
    fail(ErrorKind::ResourceCap, "dense operator d^n exceeds the oracle cap of 4096");
  Mat H = Mat::Zero(D, D);
  for (int i = 0; i < n - 1; ++i) H += embed_two_site(terms[i], d, i, n);
  return H;
}

Mat embed_two_site(const Mat& h, int d, int pos, int nsites) {
  const std::int64_t L = ipow(d, pos);
  const std::int64_t R = ipow(d, nsites - pos - 2);
  const std::int64_t m = std::int64_t(d) * d;
  Mat out = Mat::Zero(L * m * R, L * m * R);
  for (std::int64_t l = 0; l < L; ++l)
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < m; ++j) {
        cplx v = h(i, j);
        if (v == cplx(0.0)) continue;
        const std::int64_t ri = (l * m + i) * R;
        const std::int64_t ci = (l * m + j) * R;
        for (std::int64_t r = 0; r < R; ++r) out(ri + r, ci + r) = v;
      }
  return out;
}

cplx parse_complex(const std::string& raw) {
  std::string s = trim(raw);
  if (s.empty()) fail(ErrorKind::Validation, "config: empty complex entry");
  auto num = [&](const std::string& t) {
    if (t.empty() || t == "+") return 1.0;
    if (t == "-") return -1.0;
    size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &pos);
    } catch (const std::exception&) {
      fail(ErrorKind::Validation, "config: bad complex entry '" + raw + "'");
    }
    if (pos != t.size()) fail(ErrorKind::Validation, "config: bad complex entry '" + raw + "'");
    return v;
  };
  char last = s.back();
  if (last != 'j' && last != 'i') return cplx(num(s), 0.0);
  s.pop_back();
  size_t split = std::string::npos;
  for (size_t k = s.size(); k-- > 1;) {
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  if (split == std::string::npos) return cplx(0.0, num(s));
  return cplx(num(s.substr(0, split)), num(s.substr(split)));
}

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto put = [&](const std::string& tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorKind::Validation, "config line " + std::to_string(lineno) + ": expected key=value, got '" + tok + "'");
    std::string key = trim(tok.substr(0, eq));
    std::string val = trim(tok.substr(eq + 1));
    if (kv.count(key)) fail(ErrorKind::Validation, "config: duplicate key " + key);
    kv[key] = val;
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("term[", 0) == 0) {
      put(line);
      continue;
    }
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) put(tok);
  }
  return kv;
}

void validate_model(const LatticeModel& m) {
  if (m.n < 2) fail(ErrorKind::Validation, "model: n must be >= 2");
  if (m.d < 2) fail(ErrorKind::Validation, "model: d must be >= 2");
  if (static_cast<int>(m.terms.size()) != m.n - 1)
    fail(ErrorKind::Validation, "model: expected n-1 terms");
  const int D = m.d * m.d;
  for (int i = 0; i < m.n - 1; ++i) {
    const Mat& t = m.terms[i];
    if (t.rows() != D || t.cols() != D)
      fail(ErrorKind::Validation, "model: term " + std::to_string(i + 1) + " has wrong shape");
    if (!t.allFinite()) fail(ErrorKind::Validation, "model: term " + std::to_string(i + 1) + " not finite");
    if ((t - t.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      fail(ErrorKind::Validation, "model: term " + std::to_string(i + 1) + " is not Hermitian");
  }
  std::vector<double> tn(m.n - 1);
  for (int i = 0; i < m.n - 1; ++i) tn[i] = m.term_norm(i);
  for (int s = 0; s < m.n; ++s) {
    double v = (s > 0 ? tn[s - 1] : 0.0) + (s < m.n - 1 ? tn[s] : 0.0);
    if (v > m.g * (1.0 + 1e-12))
      fail(ErrorKind::Validation, "model: norm budget g=" + std::to_string(m.g) + " violated at site " +
                                      std::to_string(s + 1) + " (sum " + std::to_string(v) + ")");
  }
}

LatticeModel load_model(const std::string& text) {
  auto kv = parse_config(text);
  const long long n = get_int(kv, "n", -1);
  if (n < 2) fail(ErrorKind::Validation, "config: n must be given and >= 2");
  if (n > 100000) fail(ErrorKind::ResourceCap, "config: n too large");
  std::string preset = kv.count("preset") ? kv["preset"] : "explicit";
  const double g = get_double(kv, "g", 1.0);
  if (!(g > 0.0)) fail(ErrorKind::Validation, "config: g must be positive");

  static const std::map<std::string, std::vector<std::string>> allowed = {
      {"tfim", {"preset", "n", "d", "g", "J", "h"}},
      {"heisenberg", {"preset", "n", "d", "g", "J", "Jz", "h"}},
      {"random", {"preset", "n", "d", "g", "seed"}},
  };
  auto al = allowed.find(preset);
  if (al != allowed.end()) {
    for (const auto& [k, v] : kv)
      if (std::find(al->second.begin(), al->second.end(), k) == al->second.end())
        fail(ErrorKind::Validation, "config: unknown key '" + k + "' for preset " + preset);
  }

  LatticeModel m;
  if (preset == "tfim" || preset == "heisenberg") {
    if (get_int(kv, "d", 2) != 2) fail(ErrorKind::Validation, "config: " + preset + " requires d=2");
    if (preset == "tfim") {
      m = build_tfim(static_cast<int>(n), get_double(kv, "J", 1.0), get_double(kv, "h", 1.0));
    } else {
      double J = get_double(kv, "J", 1.0);
      m = build_heisenberg(static_cast<int>(n), J, get_double(kv, "Jz", J), get_double(kv, "h", 0.0));
    }
    m.g = g;
    normalize_budget(m);
  } else if (preset == "random") {
    long long d = get_int(kv, "d", 2);
    if (d < 2 || d > 16) fail(ErrorKind::Validation, "config: d out of range");
    m = build_random(static_cast<int>(n), static_cast<int>(d), static_cast<std::uint64_t>(get_int(kv, "seed", 0)));
    m.g = g;
    normalize_budget(m);
  } else if (preset == "explicit") {
    long long d = get_int(kv, "d", 2);
    if (d < 2 || d > 16) fail(ErrorKind::Validation, "config: d out of range");
    m.n = static_cast<int>(n);
    m.d = static_cast<int>(d);
    m.g = g;
    m.name = "explicit";
    const int D = m.d * m.d;
    auto parse_term = [&](const std::string& val, const std::string& label) {
      std::vector<cplx> entries;
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ',')) entries.push_back(parse_complex(tok));
      if (static_cast<int>(entries.size()) != D * D)
        fail(ErrorKind::Validation, "config: " + label + " needs " + std::to_string(D * D) + " entries, got " +
                                        std::to_string(entries.size()));
      Mat t(D, D);
      for (int r = 0; r < D; ++r)
        for (int c = 0; c < D; ++c) t(r, c) = entries[r * D + c];
      return t;
    };
    m.terms.assign(m.n - 1, Mat());
    std::vector<bool> seen(m.n - 1, false);
    for (const auto& [k, v] : kv) {
      if (k == "preset" || k == "n" || k == "d" || k == "g") continue;
      if (k.rfind("term[", 0) != 0 || k.back() != ']')
        fail(ErrorKind::Validation, "config: unknown key '" + k + "'");
      std::string idx = k.substr(5, k.size() - 6);
      if (idx == "*") {
        Mat t = parse_term(v, k);
        for (int i = 0; i < m.n - 1; ++i)
          if (!seen[i]) m.terms[i] = t;
        continue;
      }
      long long i = 0;
      try {
        i = std::stoll(idx);
      } catch (const std::exception&) {
        fail(ErrorKind::Validation, "config: bad term index in " + k);
      }
      if (i < 1 || i > m.n - 1) fail(ErrorKind::Validation, "config: term index out of range in " + k);
      m.terms[i - 1] = parse_term(v, k);
      seen[i - 1] = true;
    }
    for (int i = 0; i < m.n - 1; ++i)
      if (m.terms[i].size() == 0)
        fail(ErrorKind::Validation, "config: missing term[" + std::to_string(i + 1) + "]");
  } else {
    fail(ErrorKind::Validation, "config: unknown preset '" + preset + "'");
  }
  validate_model(m);
  return m;
}

LatticeModel load_model_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open model config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_model(ss.str());
}

Mat BlockDecomposition::local_hamiltonian(const std::vector<int>& term_ids, int first, int nsites) const {
  const std::int64_t D = ipow(d, nsites);
  Mat h = Mat::Zero(D, D);
  for (int t : term_ids) {
    if (t < first || t + 1 >= first + nsites) fail(ErrorKind::Validation, "term outside local support");
    h += embed_two_site(terms[t], d, t - first, nsites);
  }
  return h;
}

Mat BlockDecomposition::dense_block(int j) const {
  return local_hamiltonian(block_terms.at(j), 0, n_padded);
}

BlockDecomposition decompose_blocks(const LatticeModel& model, int l0) {
  if (l0 < 2) fail(ErrorKind::Validation, "block length must be >= 2");
  BlockDecomposition b;
  b.l0 = l0;
  b.n = model.n;
  b.d = model.d;
  b.n_blocks = (model.n + l0 - 1) / l0;
  b.n_padded = b.n_blocks * l0;
  b.terms = model.terms;
  const int D = model.d * model.d;
  while (static_cast<int>(b.terms.size()) < b.n_padded - 1) b.terms.push_back(Mat::Zero(D, D));
  for (int j = 0; j < b.n_blocks; ++j) {
    b.blocks.push_back({j * l0, j * l0 + l0 - 1});
    std::vector<int> ids;
    for (int t = j * l0; t < (j + 1) * l0 && t < b.n_padded - 1; ++t) ids.push_back(t);
    b.block_terms.push_back(ids);
    int first = j * l0;
    int sites = std::min(l0 + 1, b.n_padded - first);
    b.support_first.push_back(first);
    b.support_sites.push_back(sites);
  }
  for (int j = 0; j < b.n_blocks; ++j)
    b.block_hamiltonians.push_back(b.local_hamiltonian(b.block_terms[j], b.support_first[j], b.support_sites[j]));
  return b;
}

ShiftResult shift_positive(const Mat& h) {
  ShiftResult r;
  if (h.size() == 0) return r;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  r.lambda_min = es.eigenvalues()(0);
  r.shifted = h - r.lambda_min * Mat::Identity(h.rows(), h.cols());
  return r;
}

}  // namespace gibbsmpo
