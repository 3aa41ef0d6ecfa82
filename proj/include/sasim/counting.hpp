#pragma once

#include <vector>

#include "sasim/propagator.hpp"

namespace sasim {

/// Master equation extended by a Raman-count register: block m holds the
/// unnormalized state conditioned on m Raman jumps so far. The Raman
/// sandwich terms feed block m-1 into block m; everything else acts within
/// a block. Block M absorbs overflow so the total trace stays 1.
struct CountingState {
  int n_sites = 0;
  int max_count = 0;
  std::vector<double> times;
  Eigen::MatrixXd prob;              // (max_count+1) x T, P(m, t) = tr rho_m
  std::vector<double> loss_integral; // Gamma * int P_Ryd dt, co-integrated
  std::vector<DenseOp> marginal;     // sum_m rho_m on the grid
  bool overflow = false;             // P(max_count) exceeded 1e-6 somewhere
};

/// max_count < 0 picks ceil(mean + 6 sqrt(mean) + 5) from a cheap
/// plain-master-equation pre-run (counts are close to Poissonian).
CountingState evolve_counting(const ChainConfig& cfg, int max_count = -1);

struct RamanMoments {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> variance;
};

RamanMoments raman_moments(const CountingState& cs);

/// Histogram of Raman jump counts at time t across a trajectory ensemble,
/// with binomial standard errors.
struct CountDistribution {
  std::vector<int> m;
  std::vector<double> prob;
  std::vector<double> stderr_;
};

CountDistribution trajectory_count_distribution(const TrajectoryEnsemble& ens,
                                                double t);

}  // namespace sasim
