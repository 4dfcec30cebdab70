#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gibbsmpo/types.hpp"

namespace gibbsmpo {

// Nearest-neighbour chain. terms[i] acts on sites (i, i+1), 0-based, row-major
// over the pair index s_i*d + s_{i+1}.
struct LatticeModel {
  int n = 0;
  int d = 2;
  std::vector<Mat> terms;
  double g = 1.0;
  std::string name;

  std::int64_t dim() const { return ipow(d, n); }
  double term_norm(int i) const;
  // max over sites of the summed norms of the terms touching it
  double site_norm_max() const;
  Mat dense() const;
  bool is_zero() const;
};

LatticeModel load_model(const std::string& config_text);
LatticeModel load_model_file(const std::string& path);
void validate_model(const LatticeModel& m);

// key=value pairs of a config, whitespace or newline separated. Explicit term
// lines are kept whole.
std::map<std::string, std::string> parse_config(const std::string& text);
cplx parse_complex(const std::string& tok);

// I ⊗ h ⊗ I with the two-site h placed on (pos, pos+1) of an nsites chain.
Mat embed_two_site(const Mat& h, int d, int pos, int nsites);

struct BlockDecomposition {
  int l0 = 0;
  int n = 0;
  int n_padded = 0;
  int n_blocks = 0;
  int d = 2;
  std::vector<Mat> terms;                     // padded with zeros, n_padded - 1 of them
  std::vector<std::pair<int, int>> blocks;    // inclusive site ranges
  std::vector<std::vector<int>> block_terms;  // term indices owned by H_j
  std::vector<int> support_first;             // H_j acts on [support_first, +support_sites)
  std::vector<int> support_sites;
  std::vector<Mat> block_hamiltonians;

  // sum of the given terms as a dense operator on [first, first + nsites)
  Mat local_hamiltonian(const std::vector<int>& term_ids, int first, int nsites) const;
  // H_j on the full padded chain (oracle use)
  Mat dense_block(int j) const;
};

BlockDecomposition decompose_blocks(const LatticeModel& model, int l0);

struct ShiftResult {
  Mat shifted;
  double lambda_min = 0.0;
};
ShiftResult shift_positive(const Mat& h);

}  // namespace gibbsmpo
