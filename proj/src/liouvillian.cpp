#include "sasim/liouvillian.hpp"

#include <cmath>

namespace sasim {

namespace {

Eigen::Index pow3(int n) {
  Eigen::Index d = 1;
  for (int i = 0; i < n; ++i) d *= 3;
  return d;
}

int digit(Eigen::Index s, int site) {
  Eigen::Index d = s;
  for (int i = 0; i < site; ++i) d /= 3;
  return static_cast<int>(d % 3);
}

using Triplet = Eigen::Triplet<cplx>;

void add_site_transition(std::vector<Triplet>& trips, int n, int site,
                         Level to, Level from, cplx weight) {
  const Eigen::Index dim = pow3(n);
  const Eigen::Index stride = pow3(site);
  const int ifrom = static_cast<int>(from), ito = static_cast<int>(to);
  for (Eigen::Index s = 0; s < dim; ++s) {
    if (digit(s, site) != ifrom) continue;
    trips.emplace_back(s + (ito - ifrom) * stride, s, weight);
  }
}

// s+_i s-_j for i != j: |W_i G_j><G_i W_j| on the rest of the chain
void add_exchange(std::vector<Triplet>& trips, int n, int i, int j,
                  cplx weight) {
  const Eigen::Index dim = pow3(n);
  const Eigen::Index si = pow3(i), sj = pow3(j);
  const int g = static_cast<int>(Level::G), w = static_cast<int>(Level::W);
  for (Eigen::Index s = 0; s < dim; ++s) {
    if (digit(s, i) != g || digit(s, j) != w) continue;
    trips.emplace_back(s + (w - g) * si + (g - w) * sj, s, weight);
  }
}

SparseOp from_triplets(Eigen::Index dim, std::vector<Triplet>& trips) {
  SparseOp m(dim, dim);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace

ChainOperator site_operator(int n_sites, int site, Level to, Level from) {
  if (n_sites < 1) throw ConfigError("site_operator: n_sites must be >= 1");
  if (site < 0 || site >= n_sites) throw ConfigError("site_operator: site out of range");
  std::vector<Triplet> trips;
  add_site_transition(trips, n_sites, site, to, from, cplx(1.0, 0.0));
  ChainOperator op;
  op.n_sites = n_sites;
  op.dim = pow3(n_sites);
  op.mat = from_triplets(op.dim, trips);
  return op;
}

SparseOp build_hamiltonian(const ChainConfig& cfg, double t) {
  cfg.validate();
  const int n = cfg.n_sub;
  const Eigen::Index dim = pow3(n);
  const double alpha = cfg.pulse.amplitude(t);

  std::vector<Triplet> trips;
  for (int i = 0; i < n; ++i) {
    const double g = std::sqrt(cfg.site(i).kappa) * alpha;
    add_site_transition(trips, n, i, Level::W, Level::G, cplx(g, 0.0));
    add_site_transition(trips, n, i, Level::G, Level::W, cplx(g, 0.0));
  }
  for (int i = 1; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      const double k = std::sqrt(cfg.site(i).kappa * cfg.site(j).kappa);
      add_exchange(trips, n, i, j, cplx(0.0, -0.5 * k)); // -(i/2) s+_i s-_j
      add_exchange(trips, n, j, i, cplx(0.0, +0.5 * k)); // +(i/2) s+_j s-_i
    }
  }
  return from_triplets(dim, trips);
}

std::vector<JumpOp> build_jumps(const ChainConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_sub;
  const Eigen::Index dim = pow3(n);
  std::vector<JumpOp> jumps;

  {
    std::vector<Triplet> trips;
    for (int i = 0; i < n; ++i)
      add_site_transition(trips, n, i, Level::G, Level::W,
                          cplx(std::sqrt(cfg.site(i).kappa), 0.0));
    jumps.push_back({JumpTag::ForwardCollective, -1, from_triplets(dim, trips)});
  }
  for (int i = 0; i < n; ++i) {
    std::vector<Triplet> trips;
    add_site_transition(trips, n, i, Level::D, Level::W,
                        cplx(std::sqrt(cfg.site(i).gamma_d), 0.0));
    jumps.push_back({JumpTag::Dephase, i, from_triplets(dim, trips)});
  }
  for (int i = 0; i < n; ++i) {
    if (!(cfg.site(i).gamma_raman > 0.0)) continue;
    const double g = std::sqrt(cfg.site(i).gamma_raman);
    std::vector<Triplet> tb;
    add_site_transition(tb, n, i, Level::G, Level::W, cplx(g, 0.0));
    jumps.push_back({JumpTag::RamanBright, i, from_triplets(dim, tb)});
    std::vector<Triplet> td;
    add_site_transition(td, n, i, Level::G, Level::D, cplx(g, 0.0));
    jumps.push_back({JumpTag::RamanDark, i, from_triplets(dim, td)});
  }
  return jumps;
}

DenseOp apply_rhs(const SparseOp& h, const std::vector<JumpOp>& jumps,
                  const DenseOp& rho) {
  const DenseOp hd = DenseOp(h);
  DenseOp out = cplx(0.0, -1.0) * (hd * rho - rho * hd);
  for (const auto& j : jumps) {
    const DenseOp l = DenseOp(j.mat);
    const DenseOp ld = l.adjoint();
    const DenseOp ldl = ld * l;
    out += l * rho * ld - 0.5 * (ldl * rho + rho * ldl);
  }
  return out;
}

Generator::Generator(const ChainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  n_ = cfg_.n_sub;
  dim_ = pow3(n_);

  {
    std::vector<Triplet> trips;
    for (int i = 0; i < n_; ++i) {
      const double g = std::sqrt(cfg_.site(i).kappa);
      add_site_transition(trips, n_, i, Level::W, Level::G, cplx(g, 0.0));
      add_site_transition(trips, n_, i, Level::G, Level::W, cplx(g, 0.0));
    }
    drive_ = from_triplets(dim_, trips);
  }

  jumps_ = build_jumps(cfg_);
  collective_ = jumps_.front().mat;
  collective_adj_ = SparseOp(collective_.adjoint());
  quanta_ = SparseOp(collective_adj_ * collective_);
  quanta_.makeCompressed();

  // H_exc - (i/2) sum_c L_c^dag L_c
  {
    std::vector<Triplet> trips;
    for (int i = 1; i < n_; ++i)
      for (int j = 0; j < i; ++j) {
        const double k = std::sqrt(cfg_.site(i).kappa * cfg_.site(j).kappa);
        add_exchange(trips, n_, i, j, cplx(0.0, -0.5 * k));
        add_exchange(trips, n_, j, i, cplx(0.0, +0.5 * k));
      }
    SparseOp h_exc = from_triplets(dim_, trips);

    SparseOp k_sum = quanta_;
    std::vector<Triplet> diag;
    for (int i = 0; i < n_; ++i) {
      const auto& p = cfg_.site(i);
      const Eigen::Index stride = pow3(i);
      (void)stride;
      for (Eigen::Index s = 0; s < dim_; ++s) {
        const int d = digit(s, i);
        double w = 0.0;
        if (d == static_cast<int>(Level::W)) w = p.gamma_d + p.gamma_raman;
        if (d == static_cast<int>(Level::D)) w = p.gamma_raman;
        if (w != 0.0) diag.emplace_back(s, s, cplx(w, 0.0));
      }
    }
    SparseOp local = from_triplets(dim_, diag);
    k_sum = SparseOp(k_sum + local);
    nh_const_ = SparseOp(h_exc - cplx(0.0, 0.5) * k_sum);
    nh_const_.makeCompressed();
    nh_const_adj_ = SparseOp(nh_const_.adjoint());
    nh_const_adj_.makeCompressed();

    // -i * nh_const has purely real entries for this model
    SparseOp minus_i_nh = SparseOp(cplx(0.0, -1.0) * nh_const_);
    nh_real_ = minus_i_nh.real();
    nh_real_.makeCompressed();
  }

  drive_real_ = drive_.real();
  drive_real_.makeCompressed();

  jump_adj_.reserve(jumps_.size());
  jumps_real_.reserve(jumps_.size());
  for (const auto& j : jumps_) {
    jump_adj_.emplace_back(j.mat.adjoint());
    SparseRealOp r = j.mat.real();
    r.makeCompressed();
    jumps_real_.push_back(std::move(r));
  }

  level_masks_.resize(static_cast<std::size_t>(n_) * 3);
  for (int i = 0; i < n_; ++i)
    for (int a = 0; a < 3; ++a) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
      for (Eigen::Index s = 0; s < dim_; ++s)
        if (digit(s, i) == a) m[s] = 1.0;
      level_masks_[static_cast<std::size_t>(i) * 3 + a] = std::move(m);
    }

  raman_weight_ = Eigen::VectorXd::Zero(dim_);
  for (Eigen::Index s = 0; s < dim_; ++s) {
    double w = 0.0;
    for (int i = 0; i < n_; ++i)
      if (digit(s, i) != static_cast<int>(Level::G)) w += cfg_.site(i).gamma_raman;
    raman_weight_[s] = w;
  }
}

const Eigen::VectorXd& Generator::level_mask(int site, Level a) const {
  return level_masks_[static_cast<std::size_t>(site) * 3 + static_cast<int>(a)];
}

void Generator::rhs(double t, Eigen::Ref<const DenseOp> rho,
                    Eigen::Ref<DenseOp> out) const {
  rhs_at_amplitude(cfg_.pulse.amplitude(t), rho, out);
}

void Generator::rhs_at_amplitude(double alpha, Eigen::Ref<const DenseOp> rho,
                                 Eigen::Ref<DenseOp> out) const {
  scratch_a_.noalias() = nh_const_ * rho;
  scratch_b_.noalias() = rho * nh_const_adj_;
  if (alpha != 0.0) {
    scratch_a_.noalias() += alpha * (drive_ * rho);
    scratch_b_.noalias() += alpha * (rho * drive_);
  }
  out = cplx(0.0, -1.0) * (scratch_a_ - scratch_b_);
  for (std::size_t k = 0; k < jumps_.size(); ++k) {
    scratch_a_.noalias() = jumps_[k].mat * rho;
    out.noalias() += scratch_a_ * jump_adj_[k];
  }
}

cplx Generator::expect(const SparseOp& op, Eigen::Ref<const DenseOp> rho) {
  cplx acc = 0.0;
  for (Eigen::Index k = 0; k < op.outerSize(); ++k)
    for (SparseOp::InnerIterator it(op, k); it; ++it)
      acc += it.value() * rho(it.col(), it.row());
  return acc;
}

double Generator::output_flux(double alpha, Eigen::Ref<const DenseOp> rho) const {
  const double norm = std::real(rho.trace());
  const cplx l0 = expect(collective_, rho);
  const double quanta = std::real(expect(quanta_, rho));
  return alpha * alpha * norm + 2.0 * alpha * l0.imag() + quanta;
}

double Generator::raman_flux(Eigen::Ref<const DenseOp> rho) const {
  double acc = 0.0;
  for (Eigen::Index s = 0; s < dim_; ++s)
    acc += raman_weight_[s] * rho(s, s).real();
  return acc;
}

}  // namespace sasim
