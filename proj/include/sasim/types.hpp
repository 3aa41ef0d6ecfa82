#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace sasim {

using cplx = std::complex<double>;
using SparseOp = Eigen::SparseMatrix<cplx>;
using SparseRealOp = Eigen::SparseMatrix<double>;
using DenseOp = Eigen::MatrixXcd;
using StateVec = Eigen::VectorXcd;

/// Internal levels of one superatom. G couples to W through the waveguide;
/// W dephases irreversibly into the dark reservoir D.
enum class Level : int { G = 0, W = 1, D = 2 };

inline constexpr int kLevels = 3;

constexpr const char* level_name(Level a) {
  switch (a) {
    case Level::G: return "G";
    case Level::W: return "W";
    case Level::D: return "D";
  }
  return "?";
}

/// Raised for invalid parameters, malformed configs and malformed input files.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when an integration cannot proceed (step-size underflow and
/// similar). Carries the time at which the solver gave up.
struct NumericalError : std::runtime_error {
  double t_fail;
  NumericalError(const std::string& msg, double t)
      : std::runtime_error(msg + " at t=" + std::to_string(t) + " us"), t_fail(t) {}
};

}  // namespace sasim
