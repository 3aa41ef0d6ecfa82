#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "sasim/ode.hpp"
#include "sasim/types.hpp"

using namespace sasim;
using Vec = Eigen::VectorXd;
using Stepper = Dopri5<Vec>;

namespace {

Stepper::Options tight() {
  Stepper::Options o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  o.max_step = 0.1;
  return o;
}

}  // namespace

TEST_CASE("exponential decay to controller accuracy") {
  Stepper st([](double, const Vec& y, Vec& dy) { dy = -y; }, tight());
  Vec y(1);
  y[0] = 1.0;
  st.integrate(0.0, 5.0, y, nullptr, 0, nullptr);
  CHECK(y[0] == doctest::Approx(std::exp(-5.0)).epsilon(1e-8));
}

TEST_CASE("harmonic oscillator keeps phase and energy") {
  const double w = 3.0;
  Stepper st(
      [w](double, const Vec& y, Vec& dy) {
        dy.resize(2);
        dy[0] = y[1];
        dy[1] = -w * w * y[0];
      },
      tight());
  Vec y(2);
  y << 1.0, 0.0;
  const double t1 = 7.0;
  st.integrate(0.0, t1, y, nullptr, 0, nullptr);
  CHECK(y[0] == doctest::Approx(std::cos(w * t1)).epsilon(1e-7));
  CHECK(y[1] == doctest::Approx(-w * std::sin(w * t1)).epsilon(1e-7));
  const double energy = y[1] * y[1] + w * w * y[0] * y[0];
  CHECK(energy == doctest::Approx(w * w).epsilon(1e-8));
}

TEST_CASE("dense output samples between steps") {
  Stepper::Options o = tight();
  o.rtol = 1e-9;
  o.atol = 1e-11;
  o.max_step = 0.5; // force interpolation inside long steps
  Stepper st([](double, const Vec& y, Vec& dy) { dy = -y; }, o);

  std::vector<double> ts;
  for (int i = 0; i <= 100; ++i) ts.push_back(0.04 * i);

  std::vector<double> got(ts.size(), -1.0);
  std::vector<std::size_t> order;
  Vec y(1);
  y[0] = 1.0;
  st.integrate(0.0, 4.0, y,
               ts.data(), ts.size(),
               [&](std::size_t i, double t, const Vec& v) {
                 order.push_back(i);
                 CHECK(t == doctest::Approx(ts[i]).epsilon(1e-14));
                 got[i] = v[0];
               });

  REQUIRE(order.size() == ts.size());
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == i);
  double emax = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i)
    emax = std::max(emax, std::abs(got[i] - std::exp(-ts[i])));
  CHECK(emax < 1e-8);
}

TEST_CASE("hook stops the sweep at an interpolated event") {
  Stepper st([](double, const Vec& y, Vec& dy) { dy = -y; }, tight());
  Vec y(1);
  y[0] = 1.0;

  // stop where y crosses 1/2; the crossing is located by bisection on the
  // step interpolant
  const double reached = st.integrate(
      0.0, 5.0, y, nullptr, 0, nullptr,
      [](const Stepper::DenseSpan& span) -> std::optional<double> {
        Vec tmp(1);
        span.eval(span.t0 + span.h, tmp);
        if (tmp[0] > 0.5) return std::nullopt;
        double lo = span.t0, hi = span.t0 + span.h;
        for (int i = 0; i < 80; ++i) {
          const double mid = 0.5 * (lo + hi);
          span.eval(mid, tmp);
          (tmp[0] > 0.5 ? lo : hi) = mid;
        }
        return hi;
      });

  CHECK(reached == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("accepted steps respect max_step") {
  Stepper::Options o = tight();
  o.max_step = 0.013;
  Stepper st([](double, const Vec& y, Vec& dy) { dy = -y; }, o);
  Vec y(1);
  y[0] = 1.0;
  double h_max = 0.0;
  st.integrate(0.0, 1.0, y, nullptr, 0, nullptr,
               [&](const Stepper::DenseSpan& span) -> std::optional<double> {
                 h_max = std::max(h_max, span.h);
                 return std::nullopt;
               });
  CHECK(h_max <= 0.013 + 1e-12);
}

TEST_CASE("piecewise integration handles a discontinuous coefficient exactly") {
  // y0' = -a(t) y0 and y1' = a(t), with a jumping from 1 to 3 at t=1.
  // Splitting at the jump makes both components solver-exact; the running
  // integral y1 lands on 4 to machine precision because stage times never
  // touch the wrong side of the jump.
  const auto a = [](double t) { return t < 1.0 ? 1.0 : 3.0; };
  typename Stepper::Rhs rhs = [&a](double t, const Vec& y, Vec& dy) {
    dy.resize(2);
    dy[0] = -a(t) * y[0];
    dy[1] = a(t);
  };
  Vec y(2);
  y << 1.0, 0.0;
  integrate_piecewise<Vec>(rhs, tight(), 0.0, 2.0, y, {1.0}, {}, nullptr);
  CHECK(y[0] == doctest::Approx(std::exp(-4.0)).epsilon(1e-9));
  CHECK(std::abs(y[1] - 4.0) < 1e-12);
}

TEST_CASE("piecewise integration samples across segments in order") {
  typename Stepper::Rhs rhs = [](double t, const Vec&, Vec& dy) {
    dy.resize(1);
    dy[0] = t < 1.0 ? 1.0 : -1.0;
  };
  const std::vector<double> ts{0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<double> got(ts.size());
  Vec y(1);
  y << 0.0;
  integrate_piecewise<Vec>(rhs, tight(), 0.0, 2.0, y, {1.0}, ts,
                           [&](std::size_t i, double, const Vec& v) {
                             got[i] = v[0];
                           });
  CHECK(got[0] == doctest::Approx(0.0));
  CHECK(got[1] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(got[2] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(got[3] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(got[4] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(y[0] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("finite-time blow-up raises a numerical error") {
  Stepper st([](double, const Vec& y, Vec& dy) { dy = y.array().square(); },
             tight());
  Vec y(1);
  y[0] = 1.0; // y' = y^2 escapes at t = 1
  CHECK_THROWS_AS(st.integrate(0.0, 2.0, y, nullptr, 0, nullptr),
                  NumericalError);
  try {
    Vec z(1);
    z[0] = 1.0;
    Stepper st2([](double, const Vec& v, Vec& dv) { dv = v.array().square(); },
                tight());
    st2.integrate(0.0, 2.0, z, nullptr, 0, nullptr);
  } catch (const NumericalError& e) {
    CHECK(e.t_fail > 0.9);
    CHECK(e.t_fail < 1.1);
  }
}
