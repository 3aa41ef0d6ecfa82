#pragma once

#include <cstdint>
#include <vector>

#include "sasim/model.hpp"

namespace sasim {

/// One measured transmission trace: output rate over time for a pulse with
/// a known mean input photon number. Weights default to 1 where
/// R_in > 10% of its peak and 0 elsewhere when left empty.
struct TransmissionTrace {
  double mean_photons_in = 0.0;
  std::vector<double> times;
  std::vector<double> r_out;
  std::vector<double> weight; // optional, same length as times when present
};

struct TransmissionDataset {
  std::vector<TransmissionTrace> traces;
};

struct FitOptions {
  int max_iterations = 500;
  double spread_tol = 1e-6; // relative simplex spread in log-rate space
  SolverOptions solver{1e-7, 1e-9, 0.1, 0, 0, 1};
};

struct FitResult {
  SuperatomParams params;
  double residual = 0.0; // weighted sum of squares at the returned point
  int iterations = 0;
  bool converged = false;
};

/// Least-squares fit of (kappa, gamma_raman, gamma_d) to the dataset with a
/// Nelder-Mead simplex over the log-rates (positivity is built in). `base`
/// fixes everything except the three rates; each trace reuses its pulse
/// shape with the trace's mean photon number and is evaluated on the trace's
/// own time grid.
FitResult fit_params(const TransmissionDataset& data, const ChainConfig& base,
                     const SuperatomParams& init, const FitOptions& opts = {});

/// Weighted sum of squared residuals of the model against the dataset at
/// the given rates. The quantity fit_params minimizes.
double fit_objective(const TransmissionDataset& data, const ChainConfig& base,
                     const SuperatomParams& rates, const SolverOptions& solver);

/// Synthesizes traces from the model with multiplicative Gaussian noise of
/// relative strength sigma (clipped at zero). Deterministic per seed.
TransmissionDataset simulate_dataset(const ChainConfig& base,
                                     const std::vector<double>& mean_photons,
                                     double sigma, std::uint64_t seed);

}  // namespace sasim
