#pragma once

#include <vector>

#include "sasim/propagator.hpp"

namespace sasim {

/// Input and output photon rates on the state's grid. The output operator is
/// O(t) = alpha(t) * 1 - i * L0 with L0 the collective forward emitter; this
/// relative quadrature is the one under which photon number is conserved
/// with the Hamiltonian as written (checked by conservation_residual).
struct RateTrace {
  std::vector<double> times;
  std::vector<double> r_in;
  std::vector<double> r_out;
};

RateTrace output_rate(const DensityState& st, const ChainConfig& cfg);

struct PulseMetrics {
  double n_in = 0.0;
  double n_out = 0.0;
  double n_subtracted = 0.0; // n_in - n_out
};

/// Trapezoid integrals of the rate trace over its grid. First order at the
/// pulse edges; use exact_metrics for solver-accuracy numbers.
PulseMetrics pulse_metrics(const RateTrace& tr);

/// Metrics from the co-integrated rate integrals carried by the state.
PulseMetrics exact_metrics(const DensityState& st);

/// | n_in - n_out - P_Ryd(T) - Gamma * int P_Ryd dt | from the co-integrated
/// integrals. Photons are either transmitted, still stored, or lost through
/// the Raman channel; anything else signals a sign error in the drive/output
/// pairing.
double conservation_residual(const DensityState& st, const ChainConfig& cfg);

/// P_G, P_W, P_D of one absorber over the grid (columns G, W, D).
Eigen::MatrixXd populations(const DensityState& st, int site);

/// Total Rydberg population sum_i (P_W,i + P_D,i) over the grid.
std::vector<double> total_rydberg(const DensityState& st);

/// Normalized two-time correlation of the transmitted field on a subgrid.
/// Entries where either marginal rate falls below mask_ratio * max(R_out)
/// carry g2 = NaN and masked = true.
struct G2Map {
  std::vector<double> times;
  Eigen::MatrixXd g2;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> masked;
};

/// grid must be a subset of cfg.t_grid (values, not indices). threads > 1
/// parallelizes over t1 columns; the assembled map does not depend on the
/// schedule. mask_ratio defaults to the 1e-3 rate floor.
G2Map g2_map(const ChainConfig& cfg, const std::vector<double>& grid,
             int threads = 1, double mask_ratio = 1e-3);

double trapezoid(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sasim
