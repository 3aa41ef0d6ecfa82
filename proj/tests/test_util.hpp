#pragma once

// Independent reference machinery for the tests. Operators are assembled
// densely from single-site 3x3 blocks, time evolution is classic fixed-step
// RK4, and quadrature is adaptive Simpson. Nothing here touches the library
// beyond SuperatomParams, so agreement with the fast paths is meaningful.

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sasim/model.hpp"

namespace oracle {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;

inline int pow3(int n) {
  int r = 1;
  while (n-- > 0) r *= 3;
  return r;
}

// Embeds a 3x3 single-site operator at `site` of an n-site chain.
// Site 0 lives in the least significant base-3 digit of the basis index.
inline Mat embed(const Mat& a, int site, int n) {
  const int dim = pow3(n);
  const int stride = pow3(site);
  Mat m = Mat::Zero(dim, dim);
  for (int s = 0; s < dim; ++s) {
    const int d = (s / stride) % 3;
    for (int b = 0; b < 3; ++b) {
      if (a(b, d) == cplx(0.0)) continue;
      m(s + (b - d) * stride, s) += a(b, d);
    }
  }
  return m;
}

inline Mat op3(int to, int from) {
  Mat a = Mat::Zero(3, 3);
  a(to, from) = 1.0;
  return a;
}

inline Mat lower_wg() { return op3(0, 1); }   // |G><W|
inline Mat raise_gw() { return op3(1, 0); }   // |W><G|
inline Mat shelve() { return op3(2, 1); }     // |D><W|
inline Mat drop_dark() { return op3(0, 2); }  // |G><D|

// Dense Lindblad generator for the chiral chain, built from scratch.
// exc_sign flips the exchange Hamiltonian; the chirality test derives which
// sign makes the chain one-way before anything else relies on it.
struct DenseGenerator {
  std::vector<sasim::SuperatomParams> p;
  double exc_sign = 1.0;

  int n() const { return static_cast<int>(p.size()); }
  int dim() const { return pow3(n()); }

  Mat collective() const {
    Mat l = Mat::Zero(dim(), dim());
    for (int i = 0; i < n(); ++i)
      l += std::sqrt(p[i].kappa) * embed(lower_wg(), i, n());
    return l;
  }

  Mat h_drive(double alpha) const {
    Mat h = Mat::Zero(dim(), dim());
    for (int i = 0; i < n(); ++i)
      h += std::sqrt(p[i].kappa) * alpha *
           (embed(raise_gw(), i, n()) + embed(lower_wg(), i, n()));
    return h;
  }

  // Excitation exchange between an upstream site u and a downstream site
  // d > u, strength sqrt(kappa_u kappa_d) / 2.
  Mat h_exchange() const {
    Mat h = Mat::Zero(dim(), dim());
    for (int u = 0; u < n(); ++u)
      for (int d = u + 1; d < n(); ++d) {
        const double g = 0.5 * std::sqrt(p[u].kappa * p[d].kappa);
        const Mat t = embed(raise_gw(), u, n()) * embed(lower_wg(), d, n());
        h += exc_sign * g * cplx(0.0, 1.0) * (t - t.adjoint());
      }
    return h;
  }

  std::vector<Mat> jump_ops() const {
    std::vector<Mat> ls;
    ls.push_back(collective());
    for (int i = 0; i < n(); ++i)
      ls.push_back(std::sqrt(p[i].gamma_d) * embed(shelve(), i, n()));
    for (int i = 0; i < n(); ++i) {
      if (p[i].gamma_raman <= 0.0) continue;
      ls.push_back(std::sqrt(p[i].gamma_raman) * embed(lower_wg(), i, n()));
      ls.push_back(std::sqrt(p[i].gamma_raman) * embed(drop_dark(), i, n()));
    }
    return ls;
  }

  Mat rhs(double alpha, const Mat& rho) const {
    const Mat h = h_drive(alpha) + h_exchange();
    Mat d = cplx(0.0, -1.0) * (h * rho - rho * h);
    for (const Mat& l : jump_ops()) {
      const Mat ldag = l.adjoint();
      d += l * rho * ldag - 0.5 * (ldag * l * rho + rho * ldag * l);
    }
    return d;
  }
};

// Classic RK4 with a fixed step count. f(t, y) -> dy/dt.
template <class F>
Mat rk4(const F& f, Mat y, double t0, double t1, int steps) {
  const double h = (t1 - t0) / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    const Mat k1 = f(t, y);
    const Mat k2 = f(t + 0.5 * h, Mat(y + 0.5 * h * k1));
    const Mat k3 = f(t + 0.5 * h, Mat(y + 0.5 * h * k2));
    const Mat k4 = f(t + h, Mat(y + h * k3));
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

inline double simpson_slice(const std::function<double(double)>& f, double a,
                            double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  // keep splitting for a few levels regardless: a kink can make the two
  // estimates agree exactly while both are wrong (Simpson is split-invariant
  // on polynomial pieces)
  const bool may_stop = depth <= 42;
  if (depth <= 0 ||
      (may_stop && std::abs(left + right - whole) <= 15.0 * tol))
    return left + right + (left + right - whole) / 15.0;
  return simpson_slice(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_slice(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_slice(f, a, b, fa, fm, fb, whole, tol, 48);
}

inline Mat random_hermitian(int dim, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Mat a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = cplx(nd(gen), nd(gen));
  return 0.5 * (a + a.adjoint());
}

// Random density matrix: positive semidefinite, unit trace.
inline Mat random_density(int dim, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Mat a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = cplx(nd(gen), nd(gen));
  Mat rho = a * a.adjoint();
  rho /= rho.trace();
  return rho;
}

}  // namespace oracle
