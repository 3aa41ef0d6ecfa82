#pragma once

#include <cstdint>
#include <vector>

#include "sasim/types.hpp"

namespace sasim {

/// Effective rates of a single superatom, all in 1/us.
///  kappa        forward (waveguide) emission rate of the bright state W
///  gamma_raman  Raman decay rate back to G, acts on both W and D
///  gamma_d      dephasing rate W -> D
struct SuperatomParams {
  double kappa = 0.0;
  double gamma_raman = 0.0;
  double gamma_d = 0.0;

  void validate() const;
};

/// Microscopic ensemble and laser parameters from which the effective
/// rates derive. Rates in 1/us, frequencies in rad/us.
struct MicroscopicParams {
  double gamma_e = 0.0;   // intermediate-state decay rate
  double omega_c = 0.0;   // control Rabi frequency
  double delta = 0.0;     // single-photon detuning, must be nonzero
  double g0 = 0.0;        // single-atom vacuum coupling
  long n_atoms = 0;       // atoms inside one blockade volume
  double c6 = 0.0;        // van der Waals coefficient
  double linewidth = 0.0; // two-photon linewidth entering the blockade radius

  void validate() const;
};

/// Two-photon scaling of the dressed rates: both the collective coupling and
/// the Raman leak inherit the factor Omega_c^2 / (2*Delta)^2.
SuperatomParams effective_rates(const MicroscopicParams& mp);

/// r_b = (c6 / linewidth)^(1/6). Both arguments must be positive.
double blockade_radius(double c6, double linewidth);

/// Input photon rate envelope R_in(t). The coherent drive amplitude is
/// alpha(t) = sqrt(R_in(t)), real and non-negative; shaping acts on the rate,
/// not on the amplitude.
struct PulseSpec {
  enum class Shape { Flat, Tukey, Samples };

  Shape shape = Shape::Tukey;
  double mean_photons = 0.0; // integral of R_in over the support
  double fwhm_us = 0.0;      // full width at half maximum of the rate
  double ramp_us = 0.0;      // cosine ramp duration (tukey only)
  double start_us = 0.0;

  // shape == Samples: piecewise-linear rate through (times_us, rates_per_us),
  // rescaled so the integral equals mean_photons when mean_photons > 0.
  std::vector<double> times_us;
  std::vector<double> rates_per_us;

  void validate() const;

  double rate(double t) const;      // photons / us
  double amplitude(double t) const; // sqrt(rate)

  /// Plateau rate. For tukey this is mean_photons / fwhm: the plateau lasts
  /// fwhm - ramp and each cosine ramp integrates to half a plateau-equivalent
  /// ramp, so the integral is peak * fwhm.
  double peak_rate() const;

  double support_begin() const;
  double support_end() const;

  /// Times where the rate is not smooth. Integration restarts there.
  std::vector<double> breakpoints() const;

 private:
  double sample_scale() const;
};

struct SolverOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step_us = 0.1;
  int n_traj = 1000;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

/// Full description of one run: chain size, per-absorber rates (index 0 is
/// the first absorber hit by the pulse), drive pulse, output grid and solver
/// settings.
struct ChainConfig {
  int n_sub = 1;
  std::vector<SuperatomParams> params; // size 1 (shared) or size n_sub
  PulseSpec pulse;
  std::vector<double> t_grid;
  SolverOptions solver;

  void validate() const;

  /// Rates of absorber i, honouring a shared single entry.
  const SuperatomParams& site(int i) const;

  Eigen::Index dim() const; // 3^n_sub
};

/// Uniform-by-segment output grid from 0 to t_end covering the pulse support,
/// with at least points_per_unit points per 1/max(kappa, gamma_d,
/// sqrt(kappa*R_peak)) and segment edges on the pulse breakpoints.
std::vector<double> make_time_grid(const PulseSpec& pulse,
                                   const std::vector<SuperatomParams>& params,
                                   double t_end = -1.0,
                                   double points_per_unit = 40.0);

}  // namespace sasim
