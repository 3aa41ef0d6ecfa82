#include "sasim/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "sasim/observables.hpp"
#include "sasim/propagator.hpp"
#include "sasim/rng.hpp"

namespace sasim {

namespace {

std::vector<double> effective_weights(const TransmissionTrace& tr,
                                      const PulseSpec& pulse) {
  if (!tr.weight.empty()) {
    if (tr.weight.size() != tr.times.size())
      throw ConfigError("trace weight length mismatch");
    return tr.weight;
  }
  std::vector<double> w(tr.times.size());
  const double floor = 0.1 * pulse.peak_rate();
  for (std::size_t i = 0; i < tr.times.size(); ++i)
    w[i] = pulse.rate(tr.times[i]) > floor ? 1.0 : 0.0;
  return w;
}

ChainConfig trace_config(const ChainConfig& base, const TransmissionTrace& tr,
                         const SuperatomParams& rates,
                         const SolverOptions& solver) {
  if (tr.times.size() != tr.r_out.size())
    throw ConfigError("trace times/r_out length mismatch");
  ChainConfig cfg = base;
  cfg.params.assign(1, rates);
  cfg.pulse.mean_photons = tr.mean_photons_in;
  cfg.solver = solver;
  cfg.t_grid = tr.times;
  return cfg;
}

using Vec3 = Eigen::Vector3d;

SuperatomParams rates_from_log(const Vec3& x) {
  SuperatomParams p;
  p.kappa = std::exp(x[0]);
  p.gamma_raman = std::exp(x[1]);
  p.gamma_d = std::exp(x[2]);
  return p;
}

}  // namespace

double fit_objective(const TransmissionDataset& data, const ChainConfig& base,
                     const SuperatomParams& rates,
                     const SolverOptions& solver) {
  if (data.traces.empty()) throw ConfigError("dataset has no traces");
  double acc = 0.0;
  bool any_weight = false;
  for (const auto& tr : data.traces) {
    const ChainConfig cfg = trace_config(base, tr, rates, solver);
    const std::vector<double> w = effective_weights(tr, cfg.pulse);
    const DensityState st = evolve_me(cfg);
    const RateTrace model = output_rate(st, cfg);
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      if (w[i] == 0.0) continue;
      any_weight = true;
      const double d = model.r_out[i] - tr.r_out[i];
      acc += w[i] * d * d;
    }
  }
  if (!any_weight)
    throw ConfigError("all fit weights are zero; nothing constrains the rates");
  return acc;
}

FitResult fit_params(const TransmissionDataset& data, const ChainConfig& base,
                     const SuperatomParams& init, const FitOptions& opts) {
  if (!(init.kappa > 0.0 && init.gamma_raman > 0.0 && init.gamma_d > 0.0))
    throw ConfigError("initial rates must be positive (the fit works in log space)");
  if (data.traces.empty()) throw ConfigError("dataset has no traces");

  // Constant traces carry no shape information and leave the rates
  // unconstrained; reject them up front rather than wandering the simplex.
  bool informative = false;
  for (const auto& tr : data.traces) {
    if (tr.times.size() != tr.r_out.size())
      throw ConfigError("trace times/r_out length mismatch");
    PulseSpec pulse = base.pulse;
    pulse.mean_photons = tr.mean_photons_in;
    const std::vector<double> w = effective_weights(tr, pulse);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      if (w[i] == 0.0) continue;
      lo = std::min(lo, tr.r_out[i]);
      hi = std::max(hi, tr.r_out[i]);
    }
    if (hi > lo) informative = true;
  }
  if (!informative)
    throw ConfigError(
        "degenerate dataset: weighted samples are constant in every trace");

  auto objective = [&](const Vec3& x) -> double {
    for (int i = 0; i < 3; ++i)
      if (std::abs(x[i]) > 25.0) return 1e100; // absurd rate, steer away
    try {
      return fit_objective(data, base, rates_from_log(x), opts.solver);
    } catch (const NumericalError&) {
      return 1e100; // stiff blow-up at this vertex
    }
  };

  // Nelder-Mead on the log-rates
  std::array<Vec3, 4> xs;
  std::array<double, 4> fs;
  xs[0] = Vec3(std::log(init.kappa), std::log(init.gamma_raman),
               std::log(init.gamma_d));
  for (int i = 1; i < 4; ++i) {
    xs[i] = xs[0];
    xs[i][i - 1] += 0.25;
  }
  for (int i = 0; i < 4; ++i) fs[i] = objective(xs[i]);

  auto order = [&]() {
    std::array<int, 4> idx{0, 1, 2, 3};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::array<Vec3, 4> nx;
    std::array<double, 4> nf;
    for (int i = 0; i < 4; ++i) {
      nx[i] = xs[idx[i]];
      nf[i] = fs[idx[i]];
    }
    xs = nx;
    fs = nf;
  };

  FitResult res;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    order();

    double xspread = 0.0;
    for (int i = 1; i < 4; ++i)
      xspread = std::max(xspread, (xs[i] - xs[0]).cwiseAbs().maxCoeff());
    const double fspread = fs[3] - fs[0];
    if (xspread < opts.spread_tol &&
        fspread <= opts.spread_tol * std::max(1e-12, std::abs(fs[0]))) {
      res.converged = true;
      break;
    }

    const Vec3 centroid = (xs[0] + xs[1] + xs[2]) / 3.0;
    const Vec3 xr = centroid + (centroid - xs[3]);
    const double fr = objective(xr);

    if (fr < fs[0]) {
      const Vec3 xe = centroid + 2.0 * (xr - centroid);
      const double fe = objective(xe);
      if (fe < fr) {
        xs[3] = xe;
        fs[3] = fe;
      } else {
        xs[3] = xr;
        fs[3] = fr;
      }
    } else if (fr < fs[2]) {
      xs[3] = xr;
      fs[3] = fr;
    } else {
      const bool outside = fr < fs[3];
      const Vec3 xc = outside ? centroid + 0.5 * (xr - centroid)
                              : centroid + 0.5 * (xs[3] - centroid);
      const double fc = objective(xc);
      if (fc <= std::min(fr, fs[3])) {
        xs[3] = xc;
        fs[3] = fc;
      } else {
        for (int i = 1; i < 4; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = objective(xs[i]);
        }
      }
    }
  }

  order();
  res.params = rates_from_log(xs[0]);
  res.residual = fs[0];
  res.iterations = it;
  return res;
}

TransmissionDataset simulate_dataset(const ChainConfig& base,
                                     const std::vector<double>& mean_photons,
                                     double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("noise level must be non-negative");
  TransmissionDataset ds;
  ds.traces.reserve(mean_photons.size());
  for (std::size_t k = 0; k < mean_photons.size(); ++k) {
    ChainConfig cfg = base;
    cfg.pulse.mean_photons = mean_photons[k];
    const DensityState st = evolve_me(cfg);
    const RateTrace model = output_rate(st, cfg);

    TransmissionTrace tr;
    tr.mean_photons_in = mean_photons[k];
    tr.times = cfg.t_grid;
    tr.r_out.resize(model.r_out.size());
    Rng rng(substream_seed(seed, k));
    for (std::size_t i = 0; i < model.r_out.size(); ++i)
      tr.r_out[i] = model.r_out[i] * std::max(0.0, 1.0 + sigma * rng.normal());
    ds.traces.push_back(std::move(tr));
  }
  return ds;
}

}  // namespace sasim
