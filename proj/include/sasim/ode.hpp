#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "sasim/types.hpp"

namespace sasim {

/// Embedded Dormand-Prince 5(4) step with free 4th-order dense output.
/// Self-contained so jump-time location and grid sampling can share one
/// continuous extension of the solution.
template <class Vec>
class Dopri5 {
 public:
  using Rhs = std::function<void(double t, const Vec& y, Vec& dydt)>;

  struct Options {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = 0.1;
    double init_step = 0.0; // 0 picks a heuristic
  };

  /// Polynomial interpolant over one accepted step [t0, t0+h].
  struct DenseSpan {
    double t0 = 0.0, h = 0.0;
    Vec c1, c2, c3, c4, c5;

    void eval(double t, Vec& out) const {
      const double th = (t - t0) / h;
      const double th1 = 1.0 - th;
      out = c1 + th * (c2 + th1 * (c3 + th * (c4 + th1 * c5)));
    }
  };

  /// Called after each accepted step with the interpolant. A returned time
  /// inside (span.t0, span.t0+span.h] stops the sweep there; the state is
  /// evaluated from the interpolant and integrate() returns that time.
  using StepHook = std::function<std::optional<double>(const DenseSpan& span)>;

  /// Called for every requested sample time passed in integrate().
  using Sampler = std::function<void(std::size_t index, double t, const Vec& y)>;

  Dopri5(Rhs rhs, Options opts) : rhs_(std::move(rhs)), opts_(opts) {}

  double last_step() const { return h_last_; }
  void set_init_step(double h) { opts_.init_step = h; }

  /// Advances y from t0 to t1. sample_times must be sorted and inside
  /// [t0, t1]; samples at t0 are emitted immediately. Returns the reached
  /// time: t1, or earlier if the hook stopped the sweep.
  double integrate(double t0, double t1, Vec& y,
                   const double* sample_times, std::size_t n_samples,
                   const Sampler& sampler, const StepHook& hook = nullptr) {
    // samples due at the start are owed even when the span is empty
    std::size_t next_sample = 0;
    while (next_sample < n_samples && sample_times[next_sample] <= t0) {
      if (sampler) sampler(next_sample, t0, y);
      ++next_sample;
    }

    const double span = t1 - t0;
    if (span <= 0.0) return t0;

    Vec k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()),
        k6(y.size()), k7(y.size()), ytmp(y.size()), ynew(y.size()), yerr(y.size());
    rhs_(t0, y, k1);

    double t = t0;
    double h = opts_.init_step > 0.0 ? opts_.init_step : initial_step(t0, y, k1, span);
    h = std::min(h, opts_.max_step);

    DenseSpan dense;
    bool dense_ready = false;

    while (t < t1) {
      if (t1 - t <= 1e-14 * std::max(1.0, std::abs(t1))) break;
      if (h < 1e-14 * std::max(1.0, std::abs(t)))
        throw NumericalError("step size underflow", t);
      const double hs = std::min(h, t1 - t);

      // stages (k1 carried over: first-same-as-last)
      ytmp = y + hs * (a21 * k1);
      rhs_(t + c2 * hs, ytmp, k2);
      ytmp = y + hs * (a31 * k1 + a32 * k2);
      rhs_(t + c3 * hs, ytmp, k3);
      ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      rhs_(t + c4 * hs, ytmp, k4);
      ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      rhs_(t + c5 * hs, ytmp, k5);
      ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      rhs_(t + hs, ytmp, k6);
      ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      rhs_(t + hs, ynew, k7);

      yerr = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double err = error_norm(y, ynew, yerr);

      if (err > 1.0) {
        h = hs * std::max(0.2, 0.9 * std::pow(err, -0.2));
        continue;
      }

      const double t_new = t + hs;

      dense.t0 = t;
      dense.h = hs;
      dense.c1 = y;
      dense.c2 = ynew - y;
      dense.c3 = hs * k1 - dense.c2;
      dense.c4 = dense.c2 - hs * k7 - dense.c3;
      dense.c5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      dense_ready = true;

      std::optional<double> t_stop;
      if (hook) t_stop = hook(dense);

      const double t_reach = t_stop ? *t_stop : t_new;
      while (next_sample < n_samples && sample_times[next_sample] <= t_reach + 1e-15) {
        const double ts = std::min(sample_times[next_sample], t_reach);
        dense.eval(ts, ytmp);
        if (sampler) sampler(next_sample, ts, ytmp);
        ++next_sample;
      }

      if (t_stop) {
        dense.eval(*t_stop, y);
        h_last_ = hs;
        return *t_stop;
      }

      y.swap(ynew);
      k1.swap(k7);
      t = t_new;
      h_last_ = hs;
      h = std::min(opts_.max_step,
                   hs * std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0));
    }

    (void)dense_ready;
    while (next_sample < n_samples) { // guard against rounding at t1
      if (sampler) sampler(next_sample, t1, y);
      ++next_sample;
    }
    return t1;
  }

 private:
  double error_norm(const Vec& y0, const Vec& y1, const Vec& e) const {
    const auto sc = (opts_.atol + opts_.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array());
    return std::sqrt((e.cwiseAbs().array() / sc).square().mean());
  }

  double initial_step(double t0, const Vec& y, const Vec& f, double span) const {
    const double d0 = y.cwiseAbs().maxCoeff();
    const double d1 = f.cwiseAbs().maxCoeff();
    double h = (d1 > 1e-12) ? 0.01 * std::max(d0, 1.0) / d1 : span / 100.0;
    (void)t0;
    return std::clamp(h, 1e-8 * span, std::min(opts_.max_step, span));
  }

  Rhs rhs_;
  Options opts_;
  double h_last_ = 0.0;

  // Dormand-Prince tableau
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b (5th order) minus the embedded 4th-order weights
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  // dense-output weights
  static constexpr double d1 = -12715105075.0 / 11282082432.0,
                          d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0,
                          d7 = 69997945.0 / 29380423.0;
};

/// Integrates over [t0, t1] split at the given interior breakpoints,
/// sampling on sample_times. Within each segment, stage times are capped one
/// ulp below the segment top so a right-discontinuous drive (a flat pulse
/// edge) is always evaluated on its one-sided limit; otherwise the final
/// stages of a segment sample the wrong side of the jump and the controller
/// grinds the step size down against a phantom stiffness.
template <class Vec>
double integrate_piecewise(typename Dopri5<Vec>::Rhs rhs,
                           typename Dopri5<Vec>::Options opts, double t0,
                           double t1, Vec& y,
                           const std::vector<double>& breakpoints,
                           const std::vector<double>& sample_times,
                           const typename Dopri5<Vec>::Sampler& sampler) {
  std::vector<double> edges;
  edges.push_back(t0);
  for (double b : breakpoints)
    if (b > t0 + 1e-14 && b < t1 - 1e-14) edges.push_back(b);
  edges.push_back(t1);
  std::sort(edges.begin(), edges.end());

  std::size_t s0 = 0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k], b = edges[k + 1];
    const double cap = std::nextafter(b, a);
    Dopri5<Vec> stepper(
        [&rhs, cap](double t, const Vec& yv, Vec& dydt) {
          rhs(std::min(t, cap), yv, dydt);
        },
        opts);
    std::size_t s1 = s0;
    while (s1 < sample_times.size() && sample_times[s1] <= b + 1e-15) ++s1;
    const std::size_t base = s0;
    stepper.integrate(a, b, y, sample_times.data() + s0, s1 - s0,
                      [&](std::size_t i, double t, const Vec& yv) {
                        if (sampler) sampler(base + i, t, yv);
                      });
    s0 = s1;
  }
  return t1;
}

}  // namespace sasim
