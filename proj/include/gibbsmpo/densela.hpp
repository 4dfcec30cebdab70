#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "gibbsmpo/model.hpp"

namespace gibbsmpo {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DenseOperator {
  int n = 0;
  int d = 2;
  Mat data;
  std::int64_t dim() const { return data.rows(); }
};

struct GibbsState {
  DenseOperator rho;
  double Z = 0.0;
  double log_Z = 0.0;
  RVec energies;  // ascending spectrum of H
};

GibbsState exact_gibbs(const LatticeModel& model, double beta);

// Hermitian eigendecomposition, ascending eigenvalues (LAPACK zheevr).
struct Eigh {
  RVec values;
  Mat vectors;  // empty when vectors == false
};
Eigh eigh(const Mat& H, bool vectors = true);

// Thin SVD X = U diag(s) V^dag, s descending. All singular values are
// returned; with `keep`, only the first keep(s) vector pairs are computed.
struct Svd {
  Mat U;
  RVec s;
  Mat V;
};
Svd svd_thin(const Mat& X, const std::function<int(const RVec&)>& keep = {});

// exp(factor * H) for Hermitian H via eigendecomposition.
Mat herm_exp(const Mat& H, cplx factor);
// e^{-beta H}, unnormalized.
Mat exact_exp(const LatticeModel& model, double beta);
// e^{-i H t}
Mat exact_unitary(const LatticeModel& model, double t);

RVec singular_values(const Mat& O);
// p >= 1, or kInf for the operator norm.
double schatten_norm(const Mat& O, double p);
double schatten_norm_from_sv(const RVec& sv, double p);
double op_norm(const Mat& O);

// Rows index the left sites' (ket, bra) pairs, columns the right sites'.
Mat cut_reshape(const Mat& O, int n, int d, int cut);
Mat uncut_reshape(const Mat& T, int n, int d, int cut);
RVec operator_schmidt_values(const Mat& O, int n, int d, int cut);

// Trace over the sites in [cut, n) or [0, cut) of an operator on n sites.
Mat trace_right(const Mat& O, int n, int d, int cut);
Mat trace_left(const Mat& O, int n, int d, int cut);

struct PowerLemmaReport {
  int q = 1;
  double p = 1;
  double delta = 0.0;       // measured in the 2qp norm
  bool precondition = true; // delta <= 1
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  // q = 1 specialization, delta measured in the 2p norm
  double delta_sq = 0.0;
  double lhs_sq = 0.0;
  double rhs_sq = 0.0;
  bool pass_sq = false;
};

PowerLemmaReport power_lemma_check(const Mat& O, const Mat& Ot, int q, double p);

struct EckartYoungReport {
  int D = 0;
  int D_requested = 0;
  bool clamped = false;
  int full_rank = 0;
  double truncation_residual = 0.0;  // ||O - O_D||_2^2
  double tail = 0.0;                 // sum_{m>D} mu_m^2
  double best_competitor = 0.0;      // smallest competitor residual seen
  int competitors = 0;
  bool pass = false;
};

EckartYoungReport eckart_young_check(const Mat& O, int n, int d, int cut, int D, std::uint64_t seed,
                                     int competitors = 50);

}  // namespace gibbsmpo
