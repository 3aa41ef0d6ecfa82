#pragma once

#include <cstdint>
#include <vector>

#include "sasim/rng.hpp"

namespace sasim {

/// Field-ionization readout of one absorber. The detected count is
///   Bernoulli(eta * p_ryd) + Poisson(eta * p2 * n_in + noise_scale * dark_mean):
/// one real Rydberg excitation seen with efficiency eta, plus false positives
/// from double excitations (p2 per input photon, also thinned by eta) and
/// detector dark counts.
struct DetectionParams {
  double eta = 0.2;
  double p2 = 5.0e-4;
  double dark_mean = 6.75e-4; // 9 kHz dark rate * 75 ns gate
  double noise_scale = 1.0;

  void validate() const;
};

struct IonChannelStats {
  double mean = 0.0;
  double variance = 0.0;
  double mandel_q = 0.0; // variance / mean - 1
};

struct IonStats {
  IonChannelStats total;
  std::vector<IonChannelStats> per_absorber;
};

/// Closed-form moments. p_ryd[i] is the Rydberg (W + D) population of
/// absorber i at readout; detection[i] its readout parameters. Absorbers are
/// read out independently, so means and variances add.
IonStats ion_statistics(const std::vector<double>& p_ryd, double n_in,
                        const std::vector<DetectionParams>& detection);

/// One Monte Carlo readout of a whole chain; returns per-absorber counts.
std::vector<long> sample_ion_counts(Rng& rng, const std::vector<double>& p_ryd,
                                    double n_in,
                                    const std::vector<DetectionParams>& detection);

/// Sample mean, unbiased sample variance and Mandel Q of count data.
IonChannelStats mandel_q_empirical(const std::vector<long>& counts);

}  // namespace sasim
