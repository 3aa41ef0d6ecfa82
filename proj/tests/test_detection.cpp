#include <doctest.h>

#include <cmath>
#include <vector>

#include "sasim/detection.hpp"
#include "sasim/types.hpp"

using namespace sasim;

namespace {

DetectionParams clean(double eta = 0.2) {
  DetectionParams d;
  d.eta = eta;
  d.p2 = 0.0;
  d.dark_mean = 0.0;
  d.noise_scale = 0.0;
  return d;
}

}  // namespace

TEST_CASE("saturated absorber with a quiet detector") {
  const IonStats st = ion_statistics({1.0}, 0.0, {clean()});
  CHECK(st.total.mean == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(st.total.variance == doctest::Approx(0.16).epsilon(1e-12));
  CHECK(st.total.mandel_q == doctest::Approx(-0.2).epsilon(1e-12));
  REQUIRE(st.per_absorber.size() == 1);
  CHECK(st.per_absorber[0].mean == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("binomial statistics scale with the excitation probability") {
  for (double p : {0.0, 0.3, 0.7, 1.0}) {
    const IonStats st = ion_statistics({p}, 0.0, {clean()});
    const double mu = 0.2 * p;
    CHECK(st.total.mean == doctest::Approx(mu).epsilon(1e-12));
    CHECK(st.total.variance == doctest::Approx(mu * (1.0 - mu)).epsilon(1e-12));
    if (p > 0.0)
      CHECK(st.total.mandel_q == doctest::Approx(-mu).epsilon(1e-10));
  }
}

TEST_CASE("independent saturated absorbers share the single-absorber Q") {
  const std::vector<double> p_ryd{1.0, 1.0, 1.0};
  const std::vector<DetectionParams> det(3, clean());
  const IonStats st = ion_statistics(p_ryd, 0.0, det);
  CHECK(st.total.mean == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(st.total.variance == doctest::Approx(0.48).epsilon(1e-12));
  // variances add, so Q stays at -eta: Q_total = -mean/3
  CHECK(st.total.mandel_q == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(st.total.mandel_q ==
        doctest::Approx(-st.total.mean / 3.0).epsilon(1e-12));
}

TEST_CASE("false positives wash the sub-binomial signature out") {
  DetectionParams d;
  d.eta = 0.2;
  d.p2 = 6.5e-4;
  d.dark_mean = 6.75e-4;
  d.noise_scale = 5.0;

  double prev_q = -1.0;
  for (double n_in : {0.0, 10.0, 40.0, 200.0, 2000.0}) {
    const IonStats st = ion_statistics({1.0}, n_in, {d});
    const double q_norm = st.total.mandel_q / st.total.mean;
    CHECK(q_norm > -1.0);
    CHECK(q_norm > prev_q);
    prev_q = q_norm;
  }
}

TEST_CASE("mean is linear in excitation and input photon number") {
  DetectionParams d = clean();
  d.p2 = 5.0e-4;
  d.noise_scale = 1.0; // dark_mean still zero
  const double a = ion_statistics({0.5}, 10.0, {d}).total.mean;
  const double b = ion_statistics({0.5}, 20.0, {d}).total.mean;
  const double c = ion_statistics({0.25}, 10.0, {d}).total.mean;
  CHECK(b - a == doctest::Approx(0.2 * 5.0e-4 * 10.0).epsilon(1e-10));
  CHECK(a - c == doctest::Approx(0.2 * 0.25).epsilon(1e-10));
}

TEST_CASE("per-absorber readout parameters are honored") {
  std::vector<DetectionParams> det(2, clean());
  det[1].p2 = 1.0e-3;
  det[1].noise_scale = 1.0;
  const IonStats st = ion_statistics({1.0, 0.0}, 100.0, det);
  REQUIRE(st.per_absorber.size() == 2);
  CHECK(st.per_absorber[0].mean == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(st.per_absorber[1].mean ==
        doctest::Approx(0.2 * 1.0e-3 * 100.0).epsilon(1e-10));
  CHECK(st.total.mean ==
        doctest::Approx(st.per_absorber[0].mean + st.per_absorber[1].mean)
            .epsilon(1e-12));
}

TEST_CASE("empirical Mandel Q on reference samples") {
  // identical counts: zero variance, Q = -1
  const std::vector<long> constant(4000, 3);
  CHECK(mandel_q_empirical(constant).mandel_q ==
        doctest::Approx(-1.0).epsilon(1e-12));

  Rng rng(1234);
  // Poisson: Q = 0
  std::vector<long> pois;
  for (int i = 0; i < 200000; ++i) pois.push_back(rng.poisson(2.5));
  const IonChannelStats ps = mandel_q_empirical(pois);
  CHECK(std::abs(ps.mandel_q) < 0.02);

  // Bernoulli(0.2): Q = -0.2
  std::vector<long> bern;
  for (int i = 0; i < 200000; ++i)
    bern.push_back(rng.uniform() < 0.2 ? 1 : 0);
  const IonChannelStats bs = mandel_q_empirical(bern);
  CHECK(std::abs(bs.mandel_q + 0.2) < 0.02);
}

TEST_CASE("sampling agrees with the closed-form moments") {
  DetectionParams d;
  d.eta = 0.2;
  d.p2 = 3.5e-4;
  d.dark_mean = 6.75e-4;
  d.noise_scale = 1.0;
  const std::vector<double> p_ryd{0.8, 0.6};
  const std::vector<DetectionParams> det{d, d};
  const double n_in = 30.0;

  const IonStats closed = ion_statistics(p_ryd, n_in, det);

  Rng rng(777);
  const int n_shot = 200000;
  std::vector<long> totals;
  totals.reserve(n_shot);
  for (int i = 0; i < n_shot; ++i) {
    const std::vector<long> c = sample_ion_counts(rng, p_ryd, n_in, det);
    totals.push_back(c[0] + c[1]);
  }
  const IonChannelStats emp = mandel_q_empirical(totals);

  const double se_mean = std::sqrt(closed.total.variance / n_shot);
  CHECK(std::abs(emp.mean - closed.total.mean) < 4.0 * se_mean);
  CHECK(emp.variance ==
        doctest::Approx(closed.total.variance).epsilon(0.05));
}

TEST_CASE("readout parameter validation") {
  DetectionParams d;
  d.eta = -0.1;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = DetectionParams{};
  d.eta = 1.5;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = DetectionParams{};
  d.p2 = -1e-4;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = DetectionParams{};
  d.dark_mean = -1.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = DetectionParams{};
  d.noise_scale = -2.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  CHECK_THROWS_AS(ion_statistics({0.5, 0.5}, 1.0, {DetectionParams{}}),
                  ConfigError);
  CHECK_THROWS_AS(ion_statistics({1.5}, 1.0, {DetectionParams{}}),
                  ConfigError);
}
