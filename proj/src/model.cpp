#include "sasim/model.hpp"

#include <algorithm>
#include <cmath>

namespace sasim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void SuperatomParams::validate() const {
  if (kappa < 0.0) throw ConfigError("kappa must be non-negative");
  if (gamma_raman < 0.0) throw ConfigError("gamma_raman must be non-negative");
  if (gamma_d < 0.0) throw ConfigError("gamma_d must be non-negative");
}

void MicroscopicParams::validate() const {
  if (delta == 0.0) throw ConfigError("detuning delta must be nonzero");
  if (gamma_e < 0.0 || omega_c < 0.0 || g0 < 0.0)
    throw ConfigError("microscopic rates must be non-negative");
  if (n_atoms < 1) throw ConfigError("n_atoms must be at least 1");
}

SuperatomParams effective_rates(const MicroscopicParams& mp) {
  mp.validate();
  const double two_photon = (mp.omega_c * mp.omega_c) / (4.0 * mp.delta * mp.delta);
  SuperatomParams p;
  p.gamma_raman = mp.gamma_e * two_photon;
  p.kappa = static_cast<double>(mp.n_atoms) * mp.g0 * mp.g0 * two_photon;
  p.gamma_d = 0.0;
  return p;
}

double blockade_radius(double c6, double linewidth) {
  if (!(c6 > 0.0) || !(linewidth > 0.0))
    throw ConfigError("blockade radius needs positive c6 and linewidth");
  return std::pow(c6 / linewidth, 1.0 / 6.0);
}

void PulseSpec::validate() const {
  if (mean_photons < 0.0) throw ConfigError("mean_photons must be non-negative");
  switch (shape) {
    case Shape::Flat:
      if (!(fwhm_us > 0.0)) throw ConfigError("flat pulse needs fwhm_us > 0");
      break;
    case Shape::Tukey:
      if (!(fwhm_us > 0.0)) throw ConfigError("tukey pulse needs fwhm_us > 0");
      if (ramp_us < 0.0 || ramp_us > fwhm_us)
        throw ConfigError("tukey pulse needs 0 <= ramp_us <= fwhm_us");
      break;
    case Shape::Samples: {
      if (times_us.size() < 2 || times_us.size() != rates_per_us.size())
        throw ConfigError("sampled pulse needs matching times/rates, length >= 2");
      for (std::size_t i = 1; i < times_us.size(); ++i)
        if (!(times_us[i] > times_us[i - 1]))
          throw ConfigError("sampled pulse times must increase strictly");
      for (double r : rates_per_us)
        if (r < 0.0) throw ConfigError("sampled pulse rates must be non-negative");
      break;
    }
  }
}

double PulseSpec::sample_scale() const {
  // raw trapezoid integral of the samples; exact for a piecewise-linear rate
  double raw = 0.0;
  for (std::size_t i = 1; i < times_us.size(); ++i)
    raw += 0.5 * (rates_per_us[i] + rates_per_us[i - 1]) *
           (times_us[i] - times_us[i - 1]);
  if (mean_photons > 0.0 && raw > 0.0) return mean_photons / raw;
  return 1.0;
}

double PulseSpec::rate(double t) const {
  switch (shape) {
    case Shape::Flat: {
      const double tp = t - start_us;
      return (tp >= 0.0 && tp < fwhm_us) ? mean_photons / fwhm_us : 0.0;
    }
    case Shape::Tukey: {
      if (ramp_us == 0.0) {
        const double tp = t - start_us;
        return (tp >= 0.0 && tp < fwhm_us) ? mean_photons / fwhm_us : 0.0;
      }
      const double tp = t - start_us;
      const double peak = mean_photons / fwhm_us;
      if (tp < 0.0 || tp >= fwhm_us + ramp_us) return 0.0;
      if (tp < ramp_us) return peak * 0.5 * (1.0 - std::cos(kPi * tp / ramp_us));
      if (tp < fwhm_us) return peak;
      return peak * 0.5 * (1.0 - std::cos(kPi * (fwhm_us + ramp_us - tp) / ramp_us));
    }
    case Shape::Samples: {
      if (t <= times_us.front() || t >= times_us.back()) {
        if (t == times_us.front()) return rates_per_us.front() * sample_scale();
        return 0.0;
      }
      const auto it = std::upper_bound(times_us.begin(), times_us.end(), t);
      const std::size_t i = static_cast<std::size_t>(it - times_us.begin());
      const double w = (t - times_us[i - 1]) / (times_us[i] - times_us[i - 1]);
      return sample_scale() *
             ((1.0 - w) * rates_per_us[i - 1] + w * rates_per_us[i]);
    }
  }
  return 0.0;
}

double PulseSpec::amplitude(double t) const { return std::sqrt(rate(t)); }

double PulseSpec::peak_rate() const {
  if (shape == Shape::Samples) {
    double m = 0.0;
    for (double r : rates_per_us) m = std::max(m, r);
    return m * sample_scale();
  }
  return mean_photons / fwhm_us;
}

double PulseSpec::support_begin() const {
  return shape == Shape::Samples ? times_us.front() : start_us;
}

double PulseSpec::support_end() const {
  switch (shape) {
    case Shape::Flat: return start_us + fwhm_us;
    case Shape::Tukey: return start_us + fwhm_us + ramp_us;
    case Shape::Samples: return times_us.back();
  }
  return start_us;
}

std::vector<double> PulseSpec::breakpoints() const {
  switch (shape) {
    case Shape::Flat:
      return {start_us, start_us + fwhm_us};
    case Shape::Tukey:
      if (ramp_us == 0.0) return {start_us, start_us + fwhm_us};
      return {start_us, start_us + ramp_us, start_us + fwhm_us,
              start_us + fwhm_us + ramp_us};
    case Shape::Samples:
      return times_us;
  }
  return {};
}

void SolverOptions::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("tolerances must be positive");
  if (!(max_step_us > 0.0)) throw ConfigError("max_step_us must be positive");
  if (n_traj < 0) throw ConfigError("n_traj must be non-negative");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

void ChainConfig::validate() const {
  if (n_sub < 1) throw ConfigError("n_sub must be at least 1");
  if (params.size() != 1 && params.size() != static_cast<std::size_t>(n_sub))
    throw ConfigError("params must be shared (one entry) or one entry per absorber");
  for (const auto& p : params) p.validate();
  pulse.validate();
  solver.validate();
  if (t_grid.size() < 2) throw ConfigError("t_grid needs at least two points");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw ConfigError("t_grid must increase strictly");
  if (t_grid.front() > pulse.support_begin() + 1e-12 ||
      t_grid.back() < pulse.support_end() - 1e-12)
    throw ConfigError("t_grid must cover the pulse support");
}

const SuperatomParams& ChainConfig::site(int i) const {
  return params.size() == 1 ? params.front()
                            : params[static_cast<std::size_t>(i)];
}

Eigen::Index ChainConfig::dim() const {
  Eigen::Index d = 1;
  for (int i = 0; i < n_sub; ++i) d *= kLevels;
  return d;
}

std::vector<double> make_time_grid(const PulseSpec& pulse,
                                   const std::vector<SuperatomParams>& params,
                                   double t_end, double points_per_unit) {
  pulse.validate();
  double kappa_max = 0.0, gd_max = 0.0;
  for (const auto& p : params) {
    kappa_max = std::max(kappa_max, p.kappa);
    gd_max = std::max(gd_max, p.gamma_d);
  }
  const double drive = std::sqrt(std::max(0.0, kappa_max * pulse.peak_rate()));
  const double rate_scale = std::max({kappa_max, gd_max, drive, 0.1});
  const double dt_target = 1.0 / (points_per_unit * rate_scale);

  const double t0 = std::min(0.0, pulse.support_begin());
  if (t_end < 0.0) t_end = pulse.support_end() + 0.5;
  if (t_end < pulse.support_end()) throw ConfigError("grid ends inside the pulse");

  std::vector<double> edges{t0};
  for (double b : pulse.breakpoints())
    if (b > t0 && b < t_end) edges.push_back(b);
  edges.push_back(t_end);
  std::sort(edges.begin(), edges.end());

  std::vector<double> grid;
  grid.push_back(edges.front());
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k], b = edges[k + 1];
    const int m = std::max(1, static_cast<int>(std::ceil((b - a) / dt_target)));
    for (int i = 1; i <= m; ++i) grid.push_back(a + (b - a) * i / m);
  }
  return grid;
}

}  // namespace sasim
