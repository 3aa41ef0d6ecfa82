#include "sasim/counting.hpp"

#include <algorithm>
#include <cmath>

#include "sasim/ode.hpp"

namespace sasim {

namespace {

struct CountingRhs {
  const Generator* gen;
  Eigen::Index dim;
  int blocks; // max_count + 1
  const std::vector<SparseOp>* raman;
  const std::vector<SparseOp>* raman_adj;
  mutable DenseOp sandwich, prev, scratch;

  // state layout: blocks * dim^2 entries, then the loss integral.
  // gen->rhs already contains the in-block Raman sandwich, so routing m-1 -> m
  // means: subtract the block's own sandwich (except in the top block, which
  // keeps it and thereby absorbs overflow) and add the previous block's.
  void operator()(double t, const StateVec& y, StateVec& out) const {
    if (out.size() != y.size()) out.resize(y.size());
    const Eigen::Index bs = dim * dim;
    double flux_total = 0.0;
    for (int m = 0; m < blocks; ++m) {
      Eigen::Map<const DenseOp> rho(y.data() + m * bs, dim, dim);
      Eigen::Map<DenseOp> drho(out.data() + m * bs, dim, dim);
      gen->rhs(t, rho, drho);
      flux_total += gen->raman_flux(rho);
      if (m + 1 < blocks) {
        sandwich.setZero(dim, dim);
        for (std::size_t c = 0; c < raman->size(); ++c) {
          scratch.noalias() = (*raman)[c] * rho;
          sandwich.noalias() += scratch * (*raman_adj)[c];
        }
        drho -= sandwich;
      }
      if (m > 0) drho += prev;
      prev.swap(sandwich); // prev now holds this block's sandwich
    }
    out[blocks * bs] = flux_total;
  }
};

}  // namespace

CountingState evolve_counting(const ChainConfig& cfg, int max_count) {
  cfg.validate();
  if (max_count < 0) {
    ChainConfig pre = cfg;
    pre.solver.rtol = std::max(cfg.solver.rtol, 1e-6);
    pre.solver.atol = std::max(cfg.solver.atol, 1e-9);
    const DensityState st = evolve_me(pre);
    const double mean = std::max(0.0, st.raman_integral.back());
    max_count = static_cast<int>(std::ceil(mean + 6.0 * std::sqrt(mean) + 5.0));
  }

  const Generator gen(cfg);
  const Eigen::Index dim = gen.dim();
  const int blocks = max_count + 1;

  std::vector<SparseOp> raman, raman_adj;
  for (const auto& j : gen.jumps())
    if (j.tag == JumpTag::RamanBright || j.tag == JumpTag::RamanDark) {
      raman.push_back(j.mat);
      raman_adj.emplace_back(j.mat.adjoint());
    }

  const Eigen::Index bs = dim * dim;
  StateVec y = StateVec::Zero(blocks * bs + 1);
  y[0] = 1.0; // ground state in block 0

  CountingState cs;
  cs.n_sites = cfg.n_sub;
  cs.max_count = max_count;
  cs.times = cfg.t_grid;
  const Eigen::Index nt = static_cast<Eigen::Index>(cfg.t_grid.size());
  cs.prob.setZero(blocks, nt);
  cs.loss_integral.resize(cfg.t_grid.size());
  cs.marginal.resize(cfg.t_grid.size());

  CountingRhs rhs{&gen,   dim,       blocks,    &raman,
                  &raman_adj, DenseOp(), DenseOp(), DenseOp()};
  typename Dopri5<StateVec>::Options opts{cfg.solver.rtol, cfg.solver.atol,
                                          cfg.solver.max_step_us, 0.0};
  const double t0 = cfg.t_grid.front(), t1 = cfg.t_grid.back();
  std::vector<double> brk;
  for (double b : cfg.pulse.breakpoints())
    if (b > t0 && b < t1) brk.push_back(b);

  integrate_piecewise<StateVec>(
      rhs, opts, t0, t1, y, brk, cfg.t_grid,
      [&](std::size_t i, double, const StateVec& yv) {
        DenseOp marg = DenseOp::Zero(dim, dim);
        for (int m = 0; m < blocks; ++m) {
          Eigen::Map<const DenseOp> rho(yv.data() + m * bs, dim, dim);
          cs.prob(m, static_cast<Eigen::Index>(i)) = rho.trace().real();
          marg += rho;
        }
        cs.marginal[i] = std::move(marg);
        cs.loss_integral[i] = yv[blocks * bs].real();
      });

  cs.overflow = (cs.prob.row(blocks - 1).maxCoeff() > 1e-6);
  return cs;
}

RamanMoments raman_moments(const CountingState& cs) {
  RamanMoments rm;
  rm.times = cs.times;
  rm.mean.resize(cs.times.size());
  rm.variance.resize(cs.times.size());
  for (std::size_t i = 0; i < cs.times.size(); ++i) {
    double m1 = 0.0, m2 = 0.0;
    for (int m = 0; m <= cs.max_count; ++m) {
      const double p = cs.prob(m, static_cast<Eigen::Index>(i));
      m1 += m * p;
      m2 += static_cast<double>(m) * m * p;
    }
    rm.mean[i] = m1;
    rm.variance[i] = m2 - m1 * m1;
  }
  return rm;
}

CountDistribution trajectory_count_distribution(const TrajectoryEnsemble& ens,
                                                double t) {
  std::vector<int> counts(ens.jumps.size(), 0);
  int cmax = 0;
  for (std::size_t k = 0; k < ens.jumps.size(); ++k) {
    for (const auto& r : ens.jumps[k])
      if (r.time <= t &&
          (r.tag == JumpTag::RamanBright || r.tag == JumpTag::RamanDark))
        ++counts[k];
    cmax = std::max(cmax, counts[k]);
  }
  CountDistribution d;
  const double n = static_cast<double>(std::max<std::size_t>(1, counts.size()));
  for (int m = 0; m <= cmax; ++m) {
    const double hits = static_cast<double>(
        std::count(counts.begin(), counts.end(), m));
    const double p = hits / n;
    d.m.push_back(m);
    d.prob.push_back(p);
    d.stderr_.push_back(std::sqrt(std::max(0.0, p * (1.0 - p) / n)));
  }
  return d;
}

}  // namespace sasim
