#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sasim/liouvillian.hpp"
#include "sasim/model.hpp"
#include "sasim/types.hpp"

namespace sasim {

/// Density matrix sampled on the output grid, plus running integrals of the
/// Raman loss Gamma * P_Ryd, the input rate and the output rate, all
/// co-integrated to solver accuracy (grid trapezoids are first order at the
/// pulse edges, too coarse for conservation checks).
struct DensityState {
  int n_sites = 0;
  std::vector<double> times;
  std::vector<DenseOp> rho;
  std::vector<double> raman_integral;
  std::vector<double> input_integral;
  std::vector<double> output_integral;
};

/// Integrates the master equation from the ground state over cfg.t_grid.
DensityState evolve_me(const ChainConfig& cfg);

/// As evolve_me but starting from the given state at t_grid.front().
DensityState evolve_me_from(const ChainConfig& cfg, const DenseOp& rho0);

/// Linearly transports an operator (not necessarily normalized) from t1 to
/// t2 >= t1 under the same generator. Trace is preserved.
DenseOp propagate_conditional(const DenseOp& rho_tilde, double t1, double t2,
                              const ChainConfig& cfg);

/// As above, sampling the transported operator at each time in t2s
/// (sorted, all >= t1) in a single sweep.
void propagate_conditional_sampled(
    const DenseOp& rho_tilde, double t1, const std::vector<double>& t2s,
    const ChainConfig& cfg,
    const std::function<void(std::size_t, const DenseOp&)>& on_sample);

struct JumpRecord {
  double time;
  JumpTag tag;
  int site; // -1 for the collective channel
};

struct TrajectoryEnsemble {
  int n_traj = 0;
  std::uint64_t seed = 0;
  std::vector<double> sample_times;
  std::vector<StateVec> final_states;             // normalized
  std::vector<std::vector<JumpRecord>> jumps;     // per trajectory, time-ordered
  /// Ensemble mean of the per-site level populations on sample_times.
  /// Row layout: site * 3 + level, one column per sample time.
  Eigen::MatrixXd mean_populations;

  /// Mean Raman jump count (bright + dark) up to t, and its standard error.
  double raman_mean(double t) const;
  double raman_mean_stderr(double t) const;
};

/// Unravels the master equation into norm-threshold quantum jumps. Each
/// trajectory k draws from an independent substream of `seed`, so the result
/// is bit-identical for a fixed (seed, n_traj) regardless of threading.
TrajectoryEnsemble run_trajectories(const ChainConfig& cfg, int n_traj,
                                    std::uint64_t seed);

}  // namespace sasim
