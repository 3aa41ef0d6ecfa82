#include "sasim/detection.hpp"

#include <cmath>

#include "sasim/types.hpp"

namespace sasim {

void DetectionParams::validate() const {
  if (!(eta > 0.0 && eta <= 1.0))
    throw ConfigError("detection efficiency must lie in (0, 1]");
  if (p2 < 0.0 || dark_mean < 0.0 || noise_scale < 0.0)
    throw ConfigError("detection noise terms must be non-negative");
}

IonStats ion_statistics(const std::vector<double>& p_ryd, double n_in,
                        const std::vector<DetectionParams>& detection) {
  if (p_ryd.size() != detection.size())
    throw ConfigError("one detection parameter set per absorber required");
  IonStats st;
  st.per_absorber.reserve(p_ryd.size());
  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < p_ryd.size(); ++i) {
    const DetectionParams& d = detection[i];
    d.validate();
    if (p_ryd[i] < -1e-12 || p_ryd[i] > 1.0 + 1e-12)
      throw ConfigError("p_ryd must be a probability");
    const double q = std::min(1.0, std::max(0.0, d.eta * p_ryd[i]));
    const double lam = d.eta * d.p2 * n_in + d.noise_scale * d.dark_mean;
    IonChannelStats c;
    c.mean = q + lam;
    c.variance = q * (1.0 - q) + lam; // Bernoulli + independent Poisson
    c.mandel_q = c.mean > 0.0 ? c.variance / c.mean - 1.0 : 0.0;
    st.per_absorber.push_back(c);
    mean += c.mean;
    var += c.variance;
  }
  st.total.mean = mean;
  st.total.variance = var;
  st.total.mandel_q = mean > 0.0 ? var / mean - 1.0 : 0.0;
  return st;
}

std::vector<long> sample_ion_counts(Rng& rng, const std::vector<double>& p_ryd,
                                    double n_in,
                                    const std::vector<DetectionParams>& detection) {
  if (p_ryd.size() != detection.size())
    throw ConfigError("one detection parameter set per absorber required");
  std::vector<long> counts(p_ryd.size(), 0);
  for (std::size_t i = 0; i < p_ryd.size(); ++i) {
    const DetectionParams& d = detection[i];
    const double q = std::min(1.0, std::max(0.0, d.eta * p_ryd[i]));
    const double lam = d.eta * d.p2 * n_in + d.noise_scale * d.dark_mean;
    long c = rng.bernoulli(q) ? 1 : 0;
    c += rng.poisson(lam);
    counts[i] = c;
  }
  return counts;
}

IonChannelStats mandel_q_empirical(const std::vector<long>& counts) {
  IonChannelStats st;
  if (counts.size() < 2) throw ConfigError("need at least two samples");
  double mean = 0.0;
  for (long c : counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(counts.size());
  double ss = 0.0;
  for (long c : counts) {
    const double d = static_cast<double>(c) - mean;
    ss += d * d;
  }
  st.mean = mean;
  st.variance = ss / (static_cast<double>(counts.size()) - 1.0);
  st.mandel_q = mean > 0.0 ? st.variance / mean - 1.0 : 0.0;
  return st;
}

}  // namespace sasim
