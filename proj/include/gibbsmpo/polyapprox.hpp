#pragma once

#include <string>
#include <vector>

#include "gibbsmpo/types.hpp"

namespace gibbsmpo {

struct TaylorPoly {
  int degree = 0;
  std::vector<double> coeffs;  // 1/s!
};

TaylorPoly taylor_poly(int m);
cplx eval_taylor(const TaylorPoly& p, cplx x);

// Truncated expansion of e^{-x} on [0, b] in T_r(y), x = b(1+y)/2.
struct ChebyshevExpansion {
  double b = 0.0;
  int degree = 0;
  std::vector<double> coeffs;
  double tail_estimate = 0.0;  // sum of |c_r| for r > degree, estimated
  std::string path;            // "quadrature" | "walk"
};

// offsets -max..max, p[offset + max]
struct WalkKernel {
  int delta_max = 0;
  std::vector<double> p;
  double tail_mass = 0.0;

  double at(int delta) const;
  double total() const;
  double variance() const;
  double max_asymmetry() const;
};

WalkKernel walk_kernel(int delta_max = 32);

// Production path, any real b > 0.
ChebyshevExpansion cheb_exp_coeffs(double b, int m);
// b-step random walk from r = 0; integer b only.
ChebyshevExpansion cheb_exp_coeffs_walk(int b, int m, int delta_max = 32);

double eval_cheb(const ChebyshevExpansion& c, double x);
// max |F_m(x) - e^{-x}| over an equispaced grid on [0, b]
double cheb_sup_error(const ChebyshevExpansion& c, int grid = 10000);

struct DegreeResult {
  int degree = 0;
  double sup_error = 0.0;
  double formula = 0.0;  // c_f sqrt(max(b, log 1/delta) log 1/delta)
  double c_f = 1.0;
  bool degenerate = false;
  std::string warning;
};

DegreeResult required_degree(double b, double delta, double c_f = 1.0);
double degree_shape(double b, double delta);

struct SpectrumCheck {
  bool ok = true;
  double lo = 0.0, hi = 0.0;  // spectrum bounds of scale*A
  double margin = 0.0;        // distance outside [0, b]; <= 0 when inside
  bool exact = false;         // bounds came from an eigensolve
};

SpectrumCheck check_cheb_spectrum(const Mat& A, double scale, double b);

Mat eval_poly_matrix(const TaylorPoly& p, const Mat& A, double scale);
Mat eval_poly_matrix(const TaylorPoly& p, const Mat& A, cplx scale);
Mat eval_poly_matrix(const ChebyshevExpansion& c, const Mat& A, double scale);

}  // namespace gibbsmpo
