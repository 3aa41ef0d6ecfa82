#include "sasim/reduced.hpp"

#include <cmath>

#include "sasim/ode.hpp"

namespace sasim {

double gamma_eff(double kappa, double r_in, double gamma_d,
                 double gamma_raman) {
  const double total = kappa + gamma_raman + gamma_d;
  const double drive = 4.0 * kappa * r_in;
  return drive * gamma_d / (total * total + drive);
}

RateModelResult evolve_rate_equation(const ChainConfig& cfg) {
  cfg.validate();
  if (cfg.n_sub != 1)
    throw ConfigError("the reduced rate model describes a single absorber");
  const SuperatomParams& p = cfg.site(0);

  using V1 = Eigen::VectorXd;
  V1 y(1);
  y[0] = 1.0;

  RateModelResult rm;
  rm.times = cfg.t_grid;
  rm.rho_gg.resize(cfg.t_grid.size());
  rm.rho_dd.resize(cfg.t_grid.size());

  auto rhs = [&p, &cfg](double t, const V1& yv, V1& out) {
    out[0] = -gamma_eff(p.kappa, cfg.pulse.rate(t), p.gamma_d, p.gamma_raman) *
             yv[0];
  };
  typename Dopri5<V1>::Options opts{1e-12, 1e-14, cfg.solver.max_step_us, 0.0};

  const double t0 = cfg.t_grid.front(), t1 = cfg.t_grid.back();
  std::vector<double> brk;
  for (double b : cfg.pulse.breakpoints())
    if (b > t0 && b < t1) brk.push_back(b);

  integrate_piecewise<V1>(rhs, opts, t0, t1, y, brk, cfg.t_grid,
                          [&](std::size_t i, double, const V1& yv) {
                            rm.rho_gg[i] = yv[0];
                            rm.rho_dd[i] = 1.0 - yv[0];
                          });
  return rm;
}

}  // namespace sasim
