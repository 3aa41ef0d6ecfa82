#pragma once

#include <vector>

#include "sasim/model.hpp"

namespace sasim {

/// Adiabatic single-absorber transfer rate
///   gamma_eff = 4 kappa R_in gamma_d / ((kappa + gamma_raman + gamma_d)^2
///               + 4 kappa R_in),
/// approaching 4 kappa R_in / gamma_d when dephasing dominates.
double gamma_eff(double kappa, double r_in, double gamma_d,
                 double gamma_raman);

/// Two-level rate model d rho_GG/dt = -gamma_eff(R_in(t)) rho_GG with
/// rho_DD = 1 - rho_GG. Valid for a single absorber in the overdamped
/// regime. Integrated tightly enough that constant drive reproduces the
/// exact exponential to 1e-9.
struct RateModelResult {
  std::vector<double> times;
  std::vector<double> rho_gg;
  std::vector<double> rho_dd;
};

RateModelResult evolve_rate_equation(const ChainConfig& cfg);

}  // namespace sasim
