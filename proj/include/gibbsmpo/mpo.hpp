#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gibbsmpo/types.hpp"

namespace gibbsmpo {

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Index order [left, ket, bra, right], row-major.
struct SiteTensor {
  int Dl = 1, d = 2, Dr = 1;
  std::vector<cplx> data;

  SiteTensor() = default;
  SiteTensor(int dl, int dd, int dr) : Dl(dl), d(dd), Dr(dr), data(std::size_t(dl) * dd * dd * dr, cplx(0.0)) {}

  cplx& operator()(int l, int s, int t, int r) { return data[((std::size_t(l) * d + s) * d + t) * Dr + r]; }
  cplx operator()(int l, int s, int t, int r) const { return data[((std::size_t(l) * d + s) * d + t) * Dr + r]; }

  // (l, s, t) x r
  RowMap left_view() { return RowMap(data.data(), Eigen::Index(Dl) * d * d, Dr); }
  ConstRowMap left_view() const { return ConstRowMap(data.data(), Eigen::Index(Dl) * d * d, Dr); }
  // l x (s, t, r)
  RowMap right_view() { return RowMap(data.data(), Dl, Eigen::Index(d) * d * Dr); }
  ConstRowMap right_view() const { return ConstRowMap(data.data(), Dl, Eigen::Index(d) * d * Dr); }
};

enum class Canonical { None, Left, Right };

struct MPO {
  int n = 0;
  int d = 2;
  std::vector<SiteTensor> A;
  Canonical canon = Canonical::None;

  std::vector<int> bond_dims() const;  // n - 1 internal bonds
  int max_bond() const;
  void check_shapes() const;
};

inline constexpr double kLosslessCut = 1e-13;
inline constexpr double kRankCut = 1e-12;

MPO mpo_identity(int n, int d);
MPO mpo_from_dense(const Mat& O, int n, int d, double rel_cut = kLosslessCut);
Mat mpo_to_dense(const MPO& M);
// (A B)[s, t] = sum_u A[s, u] B[u, t]; bond dimensions multiply, no truncation
MPO mpo_multiply(const MPO& A, const MPO& B);
MPO mpo_adjoint(const MPO& M);
MPO mpo_scale(const MPO& M, cplx f);

struct CompressPolicy {
  bool lossless = true;
  int max_bond = 0;
  double tol = 0.0;  // relative 2-norm budget per cut (lossy); ignored when 0
  double p = 2.0;

  static CompressPolicy exact() { return {}; }
  static CompressPolicy lossy(int D, double tol = 0.0) { return {false, D, tol, 2.0}; }
};

struct TruncationReport {
  double threshold = kLosslessCut;
  std::vector<double> discarded;     // per cut, sum of dropped mu^2 in the original spectrum
  std::vector<double> sequential;    // per cut, dropped mu^2 during the sweep
  std::vector<int> kept;
  double norm2 = 0.0;                // ||M||_2 before compression
  double global_bound = 0.0;         // sqrt(2 * sum discarded), absolute 2-norm
  double sequential_bound = 0.0;     // sqrt(sum sequential)
  double relative_bound() const { return norm2 > 0 ? global_bound / norm2 : 0.0; }
};

std::pair<MPO, TruncationReport> mpo_compress(const MPO& M, const CompressPolicy& policy = CompressPolicy::exact());

// Left QR sweep then right SVD sweep; all cut spectra in one pass.
struct SchmidtSpectrum {
  int cut = 0;  // bond between sites cut-1 and cut (0-based), 1 <= cut < n
  std::vector<double> values;
  int rank = 0;  // count above kRankCut * mu_1
};

SchmidtSpectrum schmidt_spectrum(const MPO& M, int cut);
std::vector<SchmidtSpectrum> all_spectra(const MPO& M);

MPO canonicalize(const MPO& M, Canonical dir);
bool is_left_canonical(const MPO& M, int upto, double tol = 1e-10);
bool is_right_canonical(const MPO& M, int from, double tol = 1e-10);

double mpo_norm2(const MPO& M);
cplx mpo_trace(const MPO& M);
// Product M A followed by exact compression; inputs may have any gauge.
MPO mpo_multiply_compress(const MPO& A, const MPO& B, double rel_cut = kLosslessCut);
// Trace out sites >= keep, dividing by d per site.
MPO mpo_trace_tail(const MPO& M, int keep);

// Incremental product M <- M * F for F supported on a window of sites. The
// orthogonality center only moves rightwards, so a full factor sweep is O(n).
class WindowedProduct {
 public:
  WindowedProduct(int n, int d);
  // F is an MPO on sites [first, first + F.n)
  void apply_right(const MPO& F, int first, double rel_cut = kLosslessCut);
  MPO finish();
  const MPO& current() const { return M_; }

 private:
  void move_center(int to);
  MPO M_;
  int center_ = 0;
};

// Vectors are bond-1-bra tensors [left, ket, right].
struct MpsTensor {
  int Dl = 1, d = 2, Dr = 1;
  std::vector<cplx> data;
  cplx operator()(int l, int s, int r) const { return data[(std::size_t(l) * d + s) * Dr + r]; }
};

struct Mps {
  int n = 0;
  int d = 2;
  std::vector<MpsTensor> A;
  Vec to_dense() const;
  double norm() const;
  void scale(cplx f);
};

// M |basis> with basis digits (site 0 first)
Mps mpo_apply_basis(const MPO& M, const std::vector<int>& digits);

std::vector<std::uint8_t> mpo_serialize(const MPO& M);
MPO mpo_deserialize(const std::vector<std::uint8_t>& bytes);
void mpo_save(const MPO& M, const std::string& path);
MPO mpo_load(const std::string& path);

}  // namespace gibbsmpo
