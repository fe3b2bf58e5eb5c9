#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "ldspin/polymer.hpp"

namespace ldspin {

struct EngineOptions {
  long long term_cap = 2'000'000;
  int max_cluster_polymers = 8;
  // -1 evaluates the literal-sign variant: restricted tilt regions use
  // e^{-t X} per site instead of e^{+t X}.
  int tilt_sign = +1;
};

// Cluster-expansion engine for the polymer model of one translation-invariant
// potential under a tilted product reference state. Polymers and clusters are
// enumerated once per truncation degree, modulo translation, in a
// deterministic canonical order; ordered operator products are summed over a
// shared-prefix DFS, so all multiplicity classes of a collection come out of
// one pass.
//
// Evaluation parallelizes internally over collections with a deterministic
// reduction order; a single instance memoizes the last tilt and is not meant
// for concurrent calls from multiple threads.
class ClusterExpansion {
 public:
  explicit ClusterExpansion(Model model, EngineOptions opt = {});
  ~ClusterExpansion();
  ClusterExpansion(ClusterExpansion&&) noexcept;
  ClusterExpansion& operator=(ClusterExpansion&&) noexcept;

  const Model& model() const;

  // beta-degree coefficients c_1..c_K of Xi_f(t) = sum_{C ni 0} w^{t,beta}(C)/|C|.
  std::vector<Complex> xi_coeffs(Complex t, int K);
  // Same with a general per-site tilt: site weights proportional to e^{g_j}
  // in the X eigenbasis, g indexed by ascending eigenvalue.
  std::vector<Complex> xi_coeffs_general(const std::vector<Complex>& g, int K);

  // Truncated Xi_f(t) at inverse temperature beta, with the last-order
  // estimate and, when the certificate applies, the support-size tail bound
  // a e^{-a m} on the omitted clusters with |C| > m = K * max shape size.
  TruncatedSeries xi_free(Complex t, Complex beta, int K,
                          const std::optional<Certificate>& cert = std::nullopt);

  // beta-degree coefficients of sum_{C subset box} w^{t,beta}(C); matches the
  // beta-Taylor coefficients of log omega^t_box(e^{-beta H_box}) exactly.
  std::vector<Complex> finite_volume_coeffs(const LatticeBox& box, Complex t,
                                            int K);

  // sum_{C ni 0} |w^{t,beta}(C)| truncated at degree K; certified to stay
  // below the certificate's `a`.
  double abs_cluster_sum(double t, double beta, int K);
  std::vector<double> abs_cluster_sums_by_degree(double t, double beta, int K);

  // sum over polymers with 0 in the support, degree <= K, of
  // e^{a |Supp|} |rho^{t,beta}|.
  double kp_weighted_sum(double a, double t, double beta, int K);
  std::vector<double> kp_weighted_sums_by_degree(double a, double t,
                                                 double beta, int K);

  // sum over clusters C inside `outer` meeting both `box` and its
  // complement of the restricted-tilt weights w~(C), truncated at degree K.
  Complex boundary_cluster_sum(const LatticeBox& box, const LatticeBox& outer,
                               double t, double beta, int K);

  // CSV: support, degree, polymers, a_T, symmetry, weight at (t, beta).
  void dump_cluster_table(std::ostream& os, double t, double beta, int K);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct GeneralCertificate {
  double a = 0;
  std::vector<double> deltas;
};

// Margin of the multi-potential summability condition
//   a - sum_{B ni 0} e^{2a|B|} (e^{sum_i delta_i ||Phi_i(B)||} - 1).
double kp_condition_general(const std::vector<Potential>& pots, double a,
                            const std::vector<double>& deltas);

// Expansion of (1/|Lambda|) log omega(e^{z_1 H_1} ... e^{z_n H_n}) with the
// normalized trace as reference state. Polymers carry non-decreasing block
// labels; coefficients are indexed by per-block degree vectors and are
// independent of z.
class GeneralizedExpansion {
 public:
  GeneralizedExpansion(int site_dim, std::vector<Potential> potentials,
                       EngineOptions opt = {});
  ~GeneralizedExpansion();
  GeneralizedExpansion(GeneralizedExpansion&&) noexcept;
  GeneralizedExpansion& operator=(GeneralizedExpansion&&) noexcept;

  int blocks() const;

  // Anchored coefficients: key = degree per block, 1 <= total degree <= K.
  std::map<std::vector<int>, Complex> xi_coeffs(int K);
  // Coefficients of sum_{C subset box} w^z(C), same keys.
  std::map<std::vector<int>, Complex> finite_volume_coeffs(const LatticeBox& box,
                                                           int K);

  // Requires |z_i| <= cert.deltas[i], unless `uncertified` is set.
  TruncatedSeries xi(const std::vector<Complex>& z, int K,
                     const std::optional<GeneralCertificate>& cert = std::nullopt,
                     bool uncertified = false);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// z-dependent part of the generating-function density for sums of translates
// of a multi-site observable `x_loc` on shape D under the Gibbs state at
// `beta`: assembled from the two-block expansion with couplings (-beta, z).
TruncatedSeries local_observable_F(
    const Model& model, const SiteList& shape_d, const OperatorMatrix& x_loc,
    Complex z, double beta, int K,
    const std::optional<GeneralCertificate>& cert = std::nullopt,
    bool uncertified = false, EngineOptions opt = {});

// Margin of the strip condition certifying the complex-tilt weight bounds at
// |Im t| <= y, inverse temperature |beta|; requires |y| ||X|| < ln 2 where
// the damping factor 1/(2 - e^{|y| ||X||}) stays finite.
double complex_margin(const Potential& pot, double x_norm, double a, double y,
                      double beta);

}  // namespace ldspin
