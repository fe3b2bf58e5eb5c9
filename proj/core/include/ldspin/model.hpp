#pragma once

#include <optional>
#include <vector>

#include "ldspin/lattice.hpp"

namespace ldspin {

inline constexpr long long kDefaultDimCap = 4096;
inline constexpr double kDefaultBetaMax = 50.0;

// One anchored base term of a translation-invariant potential. The shape's
// lexicographic minimum must be the origin, which makes every finite set a
// translate of at most one listed shape.
struct BaseInteraction {
  SiteList shape;
  OperatorMatrix op;
};

// Translation-invariant finite-range interaction, given by anchored base
// terms with pairwise distinct shapes.
class Potential {
 public:
  Potential(int site_dim, std::vector<BaseInteraction> terms);

  int site_dim() const { return site_dim_; }
  int range() const { return range_; }
  const std::vector<BaseInteraction>& terms() const { return terms_; }
  double term_norm(int i) const { return norms_[i]; }
  double max_term_norm() const;
  long long max_shape_size() const;

  // The base term translated to A when A is a translate of a listed shape
  // (the matrix itself is translation covariant); nullopt encodes Zero.
  std::optional<OperatorMatrix> phi_of(const SiteList& a) const;
  // Index of the base term whose translate A is, or -1.
  int term_index_of(const SiteList& a) const;

 private:
  int site_dim_;
  std::vector<BaseInteraction> terms_;
  std::vector<double> norms_;  // spectral norms, cached per shape
  int range_ = 0;
};

struct Model {
  OperatorMatrix x;  // single-site observable
  Potential potential;

  int site_dim() const { return potential.site_dim(); }
  double x_norm() const { return spectral_norm(x); }
};

// H_Lambda = sum of embedded base-term translates supported inside the box.
OperatorMatrix hamiltonian(const Potential& pot, const LatticeBox& box,
                           long long dim_cap = kDefaultDimCap);

// W_{Lambda,Lambda'} = sum over terms inside `outer` meeting both `box` and
// its complement, embedded in the outer volume.
OperatorMatrix boundary_term(const Potential& pot, const LatticeBox& box,
                             const LatticeBox& outer,
                             long long dim_cap = kDefaultDimCap);

// Margin of the summability condition
//   a - sum_{B ni 0} e^{2a|B|} (e^{beta0 ||Phi(B)||} - 1);
// nonnegative margin certifies convergence of the cluster expansion for
// 0 <= beta <= beta0 and every real tilt.
double kp_condition(const Potential& pot, double a, double beta0);

// Margin of the strip variant
//   a - sum_{B ni 0} (e^{2a} / (2 - e^{delta ||X||}))^{|B|}
//                    (e^{beta0 ||Phi(B)||} - 1);
// nonnegative margin certifies weights and cluster sums for complex tilts
// with |Im t| < delta and |beta| < beta0. Requires delta*||X|| < ln 2.
double kp_condition_analytic(const Potential& pot, double x_norm, double a,
                             double delta, double beta0);

// sum_{B ni 0} e^{eps |B|} ||Phi(B)||; always finite at finite range.
double exp_summability(const Potential& pot, double eps);

struct Certificate {
  double a = 0.0;
  double beta0 = 0.0;
  double delta = 0.0;
};

// For each a in the grid, bisect for the largest beta0 with nonnegative
// margin (tolerance 1e-8, capped at beta_max); returns the best pair.
Certificate find_beta0(const Potential& pot, double x_norm,
                       const std::vector<double>& a_grid, double delta,
                       double beta_max = kDefaultBetaMax);

}  // namespace ldspin
