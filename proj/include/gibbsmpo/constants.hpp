#pragma once

#include <map>
#include <string>

namespace gibbsmpo {

// Calibrated O(1) constants. Built-ins are used when no constants file is
// found; reports then carry calibrated = false.
struct Constants {
  double c0 = 0.2;           // block length  l0 = ceil(c0 log(6n/eps0))
  double c1 = 0.6;           // Taylor degree m  = ceil(c1 log(6n/eps0))
  double c_f = 1.0;          // Chebyshev degree prefactor
  double c_prime = 1.0;      // Schmidt-rank bound prefactor
  double beta0_cap = 1.0 / 16.0;
  double local_dim_cap = 1024;  // max d^(sites) of a dense factor support
  bool calibrated = false;
  std::string source = "builtin";
  std::map<std::string, std::string> grids;  // key -> fitting grid description

  static Constants builtin();
  static Constants from_text(const std::string& text, const std::string& source);
  static Constants load(const std::string& path);
  // GIBBSMPO_CONSTANTS if set and readable, else built-ins
  static Constants from_env();

  std::string to_text() const;
  void apply_override(const std::string& key, const std::string& value);
};

}  // namespace gibbsmpo
