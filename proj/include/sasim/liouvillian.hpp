#pragma once

#include <vector>

#include "sasim/model.hpp"
#include "sasim/types.hpp"

namespace sasim {

/// Operator on the 3^n chain space. Basis index s encodes absorber i in the
/// base-3 digit s / 3^i % 3, so absorber 0 (first one hit by the pulse) is
/// the least significant digit.
struct ChainOperator {
  int n_sites = 0;
  Eigen::Index dim = 0;
  SparseOp mat;
};

/// |to><from| embedded at one site.
ChainOperator site_operator(int n_sites, int site, Level to, Level from);

enum class JumpTag : int {
  ForwardCollective = 0, // one photon leaves through the waveguide
  Dephase = 1,           // W -> D on one absorber
  RamanBright = 2,       // W -> G
  RamanDark = 3,         // D -> G
};

constexpr const char* jump_tag_name(JumpTag tag) {
  switch (tag) {
    case JumpTag::ForwardCollective: return "forward_collective";
    case JumpTag::Dephase: return "dephase";
    case JumpTag::RamanBright: return "raman_bright";
    case JumpTag::RamanDark: return "raman_dark";
  }
  return "?";
}

struct JumpOp {
  JumpTag tag;
  int site; // -1 for the collective channel
  SparseOp mat;
};

/// H(t) = sum_i sqrt(kappa_i) alpha(t) (s+_i + s-_i)
///        - (i/2) sum_{i>j} sqrt(kappa_i kappa_j) (s+_i s-_j - s+_j s-_i)
/// with alpha(t) = sqrt(R_in(t)). The exchange part propagates excitations
/// only downstream; together with the collective jump it makes the chain
/// strictly unidirectional.
SparseOp build_hamiltonian(const ChainConfig& cfg, double t);

/// One collective forward channel, one dephasing channel per absorber, and
/// two Raman channels per absorber when gamma_raman > 0 there.
std::vector<JumpOp> build_jumps(const ChainConfig& cfg);

/// Plain Lindblad right-hand side, spelled out term by term. Reference
/// implementation; the cached Generator below is the fast path and is tested
/// against this one.
DenseOp apply_rhs(const SparseOp& h, const std::vector<JumpOp>& jumps,
                  const DenseOp& rho);

/// Precomputed operators for one config. All matrices of the printed model
/// have real entries once -iH is expanded, which the trajectory propagator
/// exploits; density-matrix paths use the complex forms.
class Generator {
 public:
  explicit Generator(const ChainConfig& cfg);

  int n_sites() const { return n_; }
  Eigen::Index dim() const { return dim_; }
  const ChainConfig& config() const { return cfg_; }

  const SparseOp& drive() const { return drive_; }          // sum sqrt(k_i)(s+_i + s-_i)
  const SparseOp& collective() const { return collective_; } // L0 = sum sqrt(k_i) s-_i
  const SparseOp& collective_adj() const { return collective_adj_; }
  const SparseOp& quanta() const { return quanta_; }         // L0^dag L0
  const std::vector<JumpOp>& jumps() const { return jumps_; }

  // real forms for the wavefunction propagator: -i H_eff = M + alpha(t) * (-i) D
  const SparseRealOp& nh_real() const { return nh_real_; }
  const SparseRealOp& drive_real() const { return drive_real_; }
  const std::vector<SparseRealOp>& jumps_real() const { return jumps_real_; }

  /// d rho / dt at time t (drive evaluated from the config's pulse).
  /// Not thread safe: parallel callers build one Generator per worker.
  void rhs(double t, Eigen::Ref<const DenseOp> rho, Eigen::Ref<DenseOp> out) const;

  /// Same with the unitary drive replaced by a fixed amplitude.
  void rhs_at_amplitude(double alpha, Eigen::Ref<const DenseOp> rho,
                        Eigen::Ref<DenseOp> out) const;

  /// Raman loss rate sum_i Gamma_i (P_W,i + P_D,i) evaluated on rho.
  double raman_flux(Eigen::Ref<const DenseOp> rho) const;

  /// tr(op * rho) without forming the product, O(nnz(op)).
  static cplx expect(const SparseOp& op, Eigen::Ref<const DenseOp> rho);

  /// Output photon rate tr(O rho O^dag) with O = alpha - i L0; rho may be
  /// any Hermitian operator (unnormalized conditional states included).
  double output_flux(double alpha, Eigen::Ref<const DenseOp> rho) const;

  /// diag weight vectors for populations: entry s counts site i iff the
  /// digit of s at site i equals the level.
  const Eigen::VectorXd& level_mask(int site, Level a) const;
  const Eigen::VectorXd& raman_weight() const { return raman_weight_; } // sum_i Gamma_i [digit_i != G]

 private:
  ChainConfig cfg_;
  int n_;
  Eigen::Index dim_;
  SparseOp drive_, collective_, collective_adj_, quanta_;
  SparseOp nh_const_, nh_const_adj_; // H_exc - (i/2) sum L^dag L, and its adjoint
  std::vector<JumpOp> jumps_;
  std::vector<SparseOp> jump_adj_;
  SparseRealOp nh_real_, drive_real_;
  std::vector<SparseRealOp> jumps_real_;
  std::vector<Eigen::VectorXd> level_masks_; // [site * 3 + level]
  Eigen::VectorXd raman_weight_;
  mutable DenseOp scratch_a_, scratch_b_;
};

}  // namespace sasim
