#pragma once

#include <string>
#include <vector>

#include "gibbsmpo/model.hpp"

namespace gibbsmpo {

// Renyi entropy (nats) of a probability vector; alpha = 1 is von Neumann.
double renyi_entropy(const RVec& probs, double alpha);
// Eigenvalues of a density matrix, clipped at 0.
RVec density_spectrum(const Mat& rho);

struct EntropyReport {
  int n = 0;
  int cut = 0;  // L = sites [0, cut), R = [cut, n)
  double beta = 0.0;
  double I = 0.0;
  double S_L = 0.0, S_R = 0.0, S_LR = 0.0;
  std::vector<double> alphas;
  std::vector<double> S_alpha;  // Renyi entropies of rho_L
  std::vector<double> E_alpha;  // purification entropies across (L,L')|(R,R')
  std::string E_label = "upper estimate";
  double h_cut_norm = 0.0;
  double bound_eq1 = 0.0;      // 2 beta ||h_cut||
  double trend_shape = 0.0;    // beta^{2/3} log(beta), log clamped at 1
  std::vector<double> purif_trend_shape;  // max(beta^{2/3} log beta, (1-a) beta/a log(beta/a)) per alpha
  bool area_law_ok = true;
  bool purification_chain_ok = true;  // I <= 2 E_1 (when E_1 computed)
};

EntropyReport mutual_information(const LatticeModel& model, double beta, int cut,
                                 const std::vector<double>& alphas = {1.0, 2.0});

// Every cut 1..n-1 from one eigendecomposition; E_alpha filled when
// `with_purification`.
std::vector<EntropyReport> entropy_sweep(const LatticeModel& model, double beta, const std::vector<double>& alphas,
                                         bool with_purification);

// Thermofield purification Z^{-1/2} (e^{-beta H/2} x 1) sum_j |j>|j>, stored
// as psi[j * d^n + j'] (system index major).
struct Purification {
  int n = 0, d = 2;
  double beta = 0.0;
  std::string model_name;
  Vec psi;
  // tr over the copy
  Mat reduced_system() const;
};

Purification purify(const LatticeModel& model, double beta);

// E_alpha from the operator-Schmidt spectrum of e^{-beta H/2}/sqrt(Z).
EntropyReport purification_entropies(const LatticeModel& model, double beta, int cut,
                                     const std::vector<double>& alphas);

struct Fit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};

Fit fit_linear(const std::vector<double>& x, const std::vector<double>& y);
// log y = intercept + slope log x; requires positive data
Fit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct TbRow {
  std::string mode;  // "real" or "imag"
  double x = 0.0;    // t or beta
  double sqrt_var = 0.0;
  double edge_mass = 0.0;
};

// Single particle hopping on x in [-R, R] started at |0>.
std::vector<TbRow> tight_binding_demo(int R, const std::vector<double>& times, const std::vector<double>& betas);

struct GrowthRow {
  double beta = 0.0;
  double S1 = 0.0;
};

// S_1 at the cut of e^{-beta H}|P>/norm for a computational basis product state.
std::vector<GrowthRow> entanglement_growth_product_state(const LatticeModel& model, const std::vector<double>& betas,
                                                         int cut, const std::vector<int>& digits = {});

}  // namespace gibbsmpo
