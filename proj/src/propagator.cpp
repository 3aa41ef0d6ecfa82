#include "sasim/propagator.hpp"

#include <algorithm>
#include <cmath>

#include "sasim/harness.hpp"
#include "sasim/ode.hpp"
#include "sasim/rng.hpp"

namespace sasim {

namespace {

// flattened master equation state: dim*dim entries of rho (column major)
// plus trailing slots for the Raman loss, input and output rate integrals
struct MeRhs {
  const Generator* gen;
  Eigen::Index dim;

  void operator()(double t, const StateVec& y, StateVec& out) const {
    Eigen::Map<const DenseOp> rho(y.data(), dim, dim);
    if (out.size() != y.size()) out.resize(y.size());
    Eigen::Map<DenseOp> drho(out.data(), dim, dim);
    gen->rhs(t, rho, drho);
    const double alpha = gen->config().pulse.amplitude(t);
    out[dim * dim] = gen->raman_flux(rho);
    out[dim * dim + 1] = alpha * alpha;
    out[dim * dim + 2] = gen->output_flux(alpha, rho);
  }
};

std::vector<double> clip_breakpoints(const PulseSpec& pulse, double t0,
                                     double t1) {
  std::vector<double> b;
  for (double x : pulse.breakpoints())
    if (x > t0 && x < t1) b.push_back(x);
  return b;
}

}  // namespace

DensityState evolve_me(const ChainConfig& cfg) {
  const Eigen::Index dim = cfg.dim();
  DenseOp rho0 = DenseOp::Zero(dim, dim);
  rho0(0, 0) = 1.0;
  return evolve_me_from(cfg, rho0);
}

DensityState evolve_me_from(const ChainConfig& cfg, const DenseOp& rho0) {
  cfg.validate();
  const Generator gen(cfg);
  const Eigen::Index dim = gen.dim();
  if (rho0.rows() != dim || rho0.cols() != dim)
    throw ConfigError("initial state has the wrong dimension");

  StateVec y = StateVec::Zero(dim * dim + 3);
  Eigen::Map<DenseOp>(y.data(), dim, dim) = rho0;

  DensityState st;
  st.n_sites = cfg.n_sub;
  st.times = cfg.t_grid;
  st.rho.resize(st.times.size());
  st.raman_integral.resize(st.times.size());
  st.input_integral.resize(st.times.size());
  st.output_integral.resize(st.times.size());

  typename Dopri5<StateVec>::Options opts{cfg.solver.rtol, cfg.solver.atol,
                                          cfg.solver.max_step_us, 0.0};
  const double t0 = cfg.t_grid.front(), t1 = cfg.t_grid.back();
  integrate_piecewise<StateVec>(
      MeRhs{&gen, dim}, opts, t0, t1, y, clip_breakpoints(cfg.pulse, t0, t1),
      cfg.t_grid, [&](std::size_t i, double, const StateVec& yv) {
        st.rho[i] = Eigen::Map<const DenseOp>(yv.data(), dim, dim);
        st.raman_integral[i] = yv[dim * dim].real();
        st.input_integral[i] = yv[dim * dim + 1].real();
        st.output_integral[i] = yv[dim * dim + 2].real();
      });
  return st;
}

DenseOp propagate_conditional(const DenseOp& rho_tilde, double t1, double t2,
                              const ChainConfig& cfg) {
  if (t2 < t1) throw ConfigError("propagate_conditional needs t2 >= t1");
  DenseOp out = rho_tilde;
  propagate_conditional_sampled(rho_tilde, t1, {t2}, cfg,
                                [&](std::size_t, const DenseOp& m) { out = m; });
  return out;
}

void propagate_conditional_sampled(
    const DenseOp& rho_tilde, double t1, const std::vector<double>& t2s,
    const ChainConfig& cfg,
    const std::function<void(std::size_t, const DenseOp&)>& on_sample) {
  cfg.validate();
  const Generator gen(cfg);
  const Eigen::Index dim = gen.dim();
  if (rho_tilde.rows() != dim || rho_tilde.cols() != dim)
    throw ConfigError("conditional state has the wrong dimension");
  for (std::size_t i = 0; i < t2s.size(); ++i) {
    if (t2s[i] < t1) throw ConfigError("conditional sample before t1");
    if (i > 0 && t2s[i] < t2s[i - 1])
      throw ConfigError("conditional sample times must be sorted");
  }
  if (t2s.empty()) return;

  StateVec y = StateVec::Zero(dim * dim + 3);
  Eigen::Map<DenseOp>(y.data(), dim, dim) = rho_tilde;

  typename Dopri5<StateVec>::Options opts{cfg.solver.rtol, cfg.solver.atol,
                                          cfg.solver.max_step_us, 0.0};
  const double t_end = t2s.back();
  integrate_piecewise<StateVec>(
      MeRhs{&gen, dim}, opts, t1, t_end, y,
      clip_breakpoints(cfg.pulse, t1, t_end), t2s,
      [&](std::size_t i, double, const StateVec& yv) {
        on_sample(i, Eigen::Map<const DenseOp>(yv.data(), dim, dim));
      });
}

// ---- quantum-jump unraveling ---------------------------------------------

namespace {

using RealVec = Eigen::VectorXd;

// wavefunction split into real and imaginary halves; all model operators
// have real matrix elements once -i H_eff is expanded, so the propagation
// stays in real arithmetic
struct TrajRhs {
  const Generator* gen;
  Eigen::Index dim;
  mutable RealVec mx, my, dx, dy;

  void operator()(double t, const RealVec& y, RealVec& out) const {
    const double alpha = gen->config().pulse.amplitude(t);
    const auto& m = gen->nh_real();
    const auto& d = gen->drive_real();
    if (out.size() != y.size()) out.resize(y.size());
    mx.noalias() = m * y.head(dim);
    my.noalias() = m * y.tail(dim);
    if (alpha != 0.0) {
      dx.noalias() = d * y.head(dim);
      dy.noalias() = d * y.tail(dim);
      out.head(dim) = mx + alpha * dy;
      out.tail(dim) = my - alpha * dx;
    } else {
      out.head(dim) = mx;
      out.tail(dim) = my;
    }
  }
};

// squared norm of the dense-output polynomial as a degree-8 polynomial in
// theta, from the Gram matrix of the five interpolation vectors; jump times
// then come from scalar bisection instead of repeated vector evaluations
struct NormPoly {
  double q[9];

  explicit NormPoly(const Dopri5<RealVec>::DenseSpan& s) {
    // psi(theta) = A0 + A1 th + A2 th^2 + A3 th^3 + A4 th^4
    const RealVec a1 = s.c2 + s.c3;
    const RealVec a2 = s.c4 + s.c5 - s.c3;
    const RealVec a3 = -s.c4 - 2.0 * s.c5;
    const RealVec* a[5] = {&s.c1, &a1, &a2, &a3, &s.c5};
    for (int m = 0; m <= 8; ++m) q[m] = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) q[i + j] += a[i]->dot(*a[j]);
  }

  double operator()(double th) const {
    double v = 0.0;
    for (int m = 8; m >= 0; --m) v = v * th + q[m];
    return v;
  }
};

struct ChunkResult {
  std::vector<StateVec> final_states;
  std::vector<std::vector<JumpRecord>> jumps;
  Eigen::MatrixXd pop_sum; // (3n) x T
};

}  // namespace

double TrajectoryEnsemble::raman_mean(double t) const {
  double acc = 0.0;
  for (const auto& tj : jumps)
    for (const auto& r : tj)
      if (r.time <= t &&
          (r.tag == JumpTag::RamanBright || r.tag == JumpTag::RamanDark))
        acc += 1.0;
  return acc / std::max(1, n_traj);
}

double TrajectoryEnsemble::raman_mean_stderr(double t) const {
  const double mean = raman_mean(t);
  double ss = 0.0;
  for (const auto& tj : jumps) {
    double c = 0.0;
    for (const auto& r : tj)
      if (r.time <= t &&
          (r.tag == JumpTag::RamanBright || r.tag == JumpTag::RamanDark))
        c += 1.0;
    ss += (c - mean) * (c - mean);
  }
  const int n = std::max(2, n_traj);
  return std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
}

TrajectoryEnsemble run_trajectories(const ChainConfig& cfg, int n_traj,
                                    std::uint64_t seed) {
  cfg.validate();
  if (n_traj < 1) throw ConfigError("n_traj must be at least 1");
  const Generator gen(cfg);
  const Eigen::Index dim = gen.dim();
  const int n_levels_total = 3 * cfg.n_sub;
  const std::size_t n_times = cfg.t_grid.size();
  const auto& jumps_real = gen.jumps_real();
  const auto& jump_meta = gen.jumps();
  const std::size_t n_chan = jumps_real.size();

  const double t_begin = cfg.t_grid.front(), t_end = cfg.t_grid.back();
  std::vector<double> edges{t_begin};
  for (double b : clip_breakpoints(cfg.pulse, t_begin, t_end)) edges.push_back(b);
  edges.push_back(t_end);
  std::sort(edges.begin(), edges.end());

  // fixed chunking keeps reductions bit-identical for any worker count
  constexpr int kChunk = 64;
  const int n_chunks = (n_traj + kChunk - 1) / kChunk;
  std::vector<ChunkResult> chunks(static_cast<std::size_t>(n_chunks));

  parallel_for(static_cast<std::size_t>(n_chunks), cfg.solver.threads,
               [&](std::size_t ci) {
    const int k0 = static_cast<int>(ci) * kChunk;
    const int k1 = std::min(n_traj, k0 + kChunk);
    ChunkResult& res = chunks[ci];
    res.final_states.resize(static_cast<std::size_t>(k1 - k0));
    res.jumps.resize(static_cast<std::size_t>(k1 - k0));
    res.pop_sum = Eigen::MatrixXd::Zero(n_levels_total, static_cast<Eigen::Index>(n_times));

    TrajRhs rhs{&gen, dim, RealVec(dim), RealVec(dim), RealVec(dim), RealVec(dim)};
    typename Dopri5<RealVec>::Options opts{cfg.solver.rtol, cfg.solver.atol,
                                           cfg.solver.max_step_us, 0.0};
    RealVec psi(2 * dim), scratch(dim);
    // stage times capped one ulp under the segment top, as integrate_piecewise
    // does, so flat pulse edges see their one-sided limit
    double seg_cap = 0.0;
    auto capped_rhs = [&rhs, &seg_cap](double t, const RealVec& yv, RealVec& out) {
      rhs(std::min(t, seg_cap), yv, out);
    };

    for (int k = k0; k < k1; ++k) {
      Rng rng(substream_seed(seed, static_cast<std::uint64_t>(k)));
      psi.setZero();
      psi[0] = 1.0; // ground state, real amplitude
      double threshold = rng.uniform();
      auto& jrec = res.jumps[static_cast<std::size_t>(k - k0)];

      Dopri5<RealVec> stepper(capped_rhs, opts);
      std::size_t next_sample = 0;

      auto sampler = [&](std::size_t, double, const RealVec& yv) {
        const double nrm2 = yv.squaredNorm();
        auto col = res.pop_sum.col(static_cast<Eigen::Index>(next_sample));
        for (int site = 0; site < cfg.n_sub; ++site)
          for (int a = 0; a < 3; ++a) {
            const auto& mask = gen.level_mask(site, static_cast<Level>(a));
            const double p =
                (mask.array() * (yv.head(dim).array().square() +
                                 yv.tail(dim).array().square()))
                    .sum() /
                nrm2;
            col[site * 3 + a] += p;
          }
        ++next_sample;
      };

      auto hook = [&](const Dopri5<RealVec>::DenseSpan& span)
          -> std::optional<double> {
        RealVec end_state = span.c1 + span.c2; // exact state at span end
        if (end_state.squaredNorm() > threshold) return std::nullopt;
        const NormPoly poly(span);
        double lo = 0.0, hi = 1.0;
        const double t_scale = std::max(1.0, std::abs(span.t0) + span.h);
        while ((hi - lo) * span.h > 1e-10 * t_scale) {
          const double mid = 0.5 * (lo + hi);
          (poly(mid) > threshold ? lo : hi) = mid;
        }
        return span.t0 + 0.5 * (lo + hi) * span.h;
      };

      for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
        double t = edges[e];
        const double b = edges[e + 1];
        seg_cap = std::nextafter(b, t);
        while (t < b) {
          // samples not yet emitted that fall inside (t, b]
          std::size_t s_end = next_sample;
          while (s_end < n_times && cfg.t_grid[s_end] <= b + 1e-15) ++s_end;
          const double reached = stepper.integrate(
              t, b, psi, cfg.t_grid.data() + next_sample, s_end - next_sample,
              sampler, hook);
          if (reached >= b) {
            t = b;
            break;
          }
          // jump: pick a channel with probability || L_c psi ||^2
          double wsum = 0.0;
          std::vector<double> w(n_chan);
          for (std::size_t c = 0; c < n_chan; ++c) {
            const double wx = (jumps_real[c] * psi.head(dim)).squaredNorm();
            const double wy = (jumps_real[c] * psi.tail(dim)).squaredNorm();
            w[c] = wx + wy;
            wsum += w[c];
          }
          const double u = rng.uniform() * wsum;
          std::size_t chosen = 0;
          double acc = 0.0;
          for (std::size_t c = 0; c < n_chan; ++c) {
            acc += w[c];
            if (u <= acc || c + 1 == n_chan) {
              chosen = c;
              break;
            }
          }
          scratch.noalias() = jumps_real[chosen] * psi.head(dim);
          psi.head(dim) = scratch;
          scratch.noalias() = jumps_real[chosen] * psi.tail(dim);
          psi.tail(dim) = scratch;
          psi /= std::sqrt(w[chosen]);
          jrec.push_back({reached, jump_meta[chosen].tag, jump_meta[chosen].site});
          threshold = rng.uniform();
          t = reached;
          stepper.set_init_step(stepper.last_step());
        }
      }

      // normalized complex final state
      StateVec fin(dim);
      fin.real() = psi.head(dim);
      fin.imag() = psi.tail(dim);
      fin /= fin.norm();
      res.final_states[static_cast<std::size_t>(k - k0)] = std::move(fin);
    }
  });

  TrajectoryEnsemble ens;
  ens.n_traj = n_traj;
  ens.seed = seed;
  ens.sample_times = cfg.t_grid;
  ens.final_states.reserve(static_cast<std::size_t>(n_traj));
  ens.jumps.reserve(static_cast<std::size_t>(n_traj));
  ens.mean_populations =
      Eigen::MatrixXd::Zero(n_levels_total, static_cast<Eigen::Index>(n_times));
  for (auto& c : chunks) {
    for (auto& f : c.final_states) ens.final_states.push_back(std::move(f));
    for (auto& j : c.jumps) ens.jumps.push_back(std::move(j));
    ens.mean_populations += c.pop_sum;
  }
  ens.mean_populations /= static_cast<double>(n_traj);
  return ens;
}

}  // namespace sasim
