#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gibbsmpo {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Largest d^n handled by the dense oracle.
inline constexpr std::int64_t kOracleCap = 4096;

enum class ErrorKind { Validation, ResourceCap, Acceptance, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& msg);
int exit_code(ErrorKind kind);
const char* kind_name(ErrorKind kind);

// d^k with overflow guard; returns -1 past 2^62.
std::int64_t ipow(std::int64_t d, int k);

}  // namespace gibbsmpo
