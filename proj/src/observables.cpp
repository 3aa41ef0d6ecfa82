#include "sasim/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sasim/harness.hpp"
#include "sasim/propagator.hpp"

namespace sasim {

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("trapezoid: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return acc;
}

namespace {

double output_rate_at(const Generator& gen, const DenseOp& rho, double t) {
  return gen.output_flux(gen.config().pulse.amplitude(t), rho);
}

}  // namespace

RateTrace output_rate(const DensityState& st, const ChainConfig& cfg) {
  const Generator gen(cfg);
  RateTrace tr;
  tr.times = st.times;
  tr.r_in.resize(st.times.size());
  tr.r_out.resize(st.times.size());
  for (std::size_t i = 0; i < st.times.size(); ++i) {
    tr.r_in[i] = cfg.pulse.rate(st.times[i]);
    tr.r_out[i] = output_rate_at(gen, st.rho[i], st.times[i]);
  }
  return tr;
}

PulseMetrics pulse_metrics(const RateTrace& tr) {
  PulseMetrics m;
  m.n_in = trapezoid(tr.times, tr.r_in);
  m.n_out = trapezoid(tr.times, tr.r_out);
  m.n_subtracted = m.n_in - m.n_out;
  return m;
}

PulseMetrics exact_metrics(const DensityState& st) {
  PulseMetrics m;
  m.n_in = st.input_integral.back();
  m.n_out = st.output_integral.back();
  m.n_subtracted = m.n_in - m.n_out;
  return m;
}

double conservation_residual(const DensityState& st, const ChainConfig& cfg) {
  const PulseMetrics m = exact_metrics(st);
  const Generator gen(cfg);
  double ryd_final = 0.0;
  const DenseOp& rho_t = st.rho.back();
  for (int site = 0; site < cfg.n_sub; ++site) {
    const auto& w = gen.level_mask(site, Level::W);
    const auto& d = gen.level_mask(site, Level::D);
    for (Eigen::Index s = 0; s < gen.dim(); ++s)
      ryd_final += (w[s] + d[s]) * rho_t(s, s).real();
  }
  return std::abs(m.n_in - m.n_out - ryd_final - st.raman_integral.back());
}

Eigen::MatrixXd populations(const DensityState& st, int site) {
  if (site < 0 || site >= st.n_sites) throw ConfigError("site out of range");
  const Eigen::Index dim = st.rho.front().rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(st.times.size()), 3);
  Eigen::Index p3 = 1;
  for (int i = 0; i < site; ++i) p3 *= 3;
  for (std::size_t i = 0; i < st.times.size(); ++i) {
    double p[3] = {0.0, 0.0, 0.0};
    for (Eigen::Index s = 0; s < dim; ++s)
      p[(s / p3) % 3] += st.rho[i](s, s).real();
    for (int a = 0; a < 3; ++a) out(static_cast<Eigen::Index>(i), a) = p[a];
  }
  return out;
}

std::vector<double> total_rydberg(const DensityState& st) {
  std::vector<double> out(st.times.size(), 0.0);
  for (int site = 0; site < st.n_sites; ++site) {
    const Eigen::MatrixXd p = populations(st, site);
    for (std::size_t i = 0; i < st.times.size(); ++i)
      out[i] += p(static_cast<Eigen::Index>(i), 1) + p(static_cast<Eigen::Index>(i), 2);
  }
  return out;
}

G2Map g2_map(const ChainConfig& cfg, const std::vector<double>& grid,
             int threads, double mask_ratio) {
  cfg.validate();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0 && grid[i] <= grid[i - 1])
      throw ConfigError("g2 grid must be strictly increasing");
    if (!std::binary_search(cfg.t_grid.begin(), cfg.t_grid.end(), grid[i]))
      throw ConfigError("g2 grid times must lie on cfg.t_grid");
  }
  const std::size_t nt = grid.size();
  if (nt == 0) throw ConfigError("g2 grid is empty");

  // single-time flux on the full solver grid, then restricted to `grid`
  const DensityState st = evolve_me(cfg);
  const Generator gen0(cfg);
  std::vector<double> flux_grid(nt);
  std::vector<DenseOp> rho_grid(nt);
  {
    std::size_t j = 0;
    for (std::size_t i = 0; i < nt; ++i) {
      while (j < st.times.size() && st.times[j] < grid[i] - 1e-12) ++j;
      if (j >= st.times.size())
        throw ConfigError("g2 grid time beyond the solver grid");
      flux_grid[i] = output_rate_at(gen0, st.rho[j], st.times[j]);
      rho_grid[i] = st.rho[j];
    }
  }

  double flux_max = 0.0;
  for (double f : flux_grid) flux_max = std::max(flux_max, f);
  const double flux_floor = mask_ratio * flux_max;
  std::vector<char> below(nt);
  for (std::size_t i = 0; i < nt; ++i) below[i] = flux_grid[i] <= flux_floor;

  G2Map map;
  map.times = grid;
  map.g2 = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(nt),
                                     static_cast<Eigen::Index>(nt),
                                     std::numeric_limits<double>::quiet_NaN());
  map.masked.setConstant(static_cast<Eigen::Index>(nt),
                         static_cast<Eigen::Index>(nt), false);

  parallel_for(nt, threads, [&](std::size_t i1) {
    if (below[i1]) return;
    // conditional state after a detection at t1, transported to each t2
    const Generator gen(cfg);
    const double t1 = grid[i1];
    const double alpha1 = cfg.pulse.amplitude(t1);
    const DenseOp o_rho = alpha1 * rho_grid[i1] -
                          cplx(0.0, 1.0) * (gen.collective() * rho_grid[i1]).eval();
    DenseOp sandwich = o_rho * alpha1;
    sandwich.noalias() += o_rho * (cplx(0.0, 1.0) * gen.collective_adj());
    const std::vector<double> later(grid.begin() + static_cast<std::ptrdiff_t>(i1),
                                    grid.end());
    propagate_conditional_sampled(
        sandwich, t1, later, cfg, [&](std::size_t k, const DenseOp& m) {
          const std::size_t i2 = i1 + k;
          if (below[i2]) return;
          const double joint = output_rate_at(gen, m, grid[i2]);
          map.g2(static_cast<Eigen::Index>(i1), static_cast<Eigen::Index>(i2)) =
              joint / (flux_grid[i1] * flux_grid[i2]);
        });
  });

  for (std::size_t i1 = 0; i1 < nt; ++i1)
    for (std::size_t i2 = 0; i2 < nt; ++i2)
      if (below[i1] || below[i2])
        map.masked(static_cast<Eigen::Index>(i1), static_cast<Eigen::Index>(i2)) = true;

  // fill t2 < t1 by symmetry of the two-time correlation
  for (std::size_t i1 = 0; i1 < nt; ++i1)
    for (std::size_t i2 = 0; i2 < i1; ++i2)
      map.g2(static_cast<Eigen::Index>(i1), static_cast<Eigen::Index>(i2)) =
          map.g2(static_cast<Eigen::Index>(i2), static_cast<Eigen::Index>(i1));

  return map;
}

}  // namespace sasim
