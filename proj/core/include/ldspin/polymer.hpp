#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ldspin/model.hpp"

namespace ldspin {

// Ordered sequence of interaction supports whose pairwise-overlap graph is
// connected. The order matters: the weight involves a product of
// noncommuting operators.
struct Polymer {
  std::vector<SiteList> sets;

  int degree() const { return static_cast<int>(sets.size()); }
  SiteList support() const;
  bool connected() const;
};

// One term of the cluster expansion: an ordered tuple of polymers with a
// connected support-overlap graph, its Ursell coefficient and total degree.
struct ClusterTerm {
  std::vector<Polymer> polymers;
  long long ursell = 0;
  SiteList support;
  int degree = 0;
};

// Truncation of a cluster series at total degree `order`, with the heuristic
// last-order error estimate and, when a convergence certificate applies, a
// rigorous bound on the omitted large-support weights.
struct TruncatedSeries {
  int order = 0;
  Complex value{0, 0};
  double next_order_estimate = 0;  // |value(K) - value(K-1)|
  std::optional<double> support_tail_bound;
  std::vector<Complex> coeffs;  // per total degree, 1..order
};

// Expectation of the ordered operator product under the tilted product
// state: per-site density e^{tX}/Tr e^{tX} on tilted sites (all sites when
// tilt_region is empty) and the normalized trace elsewhere. Defined on the
// union of the supports; independent of any larger volume.
Complex omega_t(const std::vector<std::pair<SiteList, OperatorMatrix>>& ops,
                Complex t, const Model& model,
                const std::optional<SiteList>& tilt_region = std::nullopt,
                int tilt_sign = +1);

// rho^{t,beta}(A_1..A_k) = ((-beta)^k / k!) g_C omega^t(Phi(A_1)...Phi(A_k)).
Complex rho_weight(const Polymer& polymer, Complex t, Complex beta,
                   const Model& model);

// Same weight with the tilt restricted to `tilted`; coincides with
// rho_weight(t) for supports inside and rho_weight(0) for supports outside.
Complex rho_tilde_weight(const Polymer& polymer, Complex t, Complex beta,
                         const Model& model, const SiteList& tilted,
                         int tilt_sign = +1);

// Ursell coefficient of a polymer tuple: the alternating sum over connected
// spanning subgraphs of the support-overlap graph; 1 for a single polymer,
// 0 when the graph is disconnected. Exact integer arithmetic; tuples above
// the cap are rejected.
long long ursell(const std::vector<Polymer>& polymers, int cap = 8);
long long ursell_graph(int n, const std::vector<std::pair<int, int>>& edges);

struct EnumerationLimits {
  long long term_cap = 2'000'000;
  int max_cluster_polymers = 8;
};

// Reference enumeration of all cluster terms with the anchor in the support
// and total degree <= K: every ordered tuple of ordered-sequence polymers,
// one entry per distinct tuple. Exponential in K; meant for small cross
// checks and table dumps.
std::vector<ClusterTerm> enumerate_clusters(const Model& model, int K,
                                            const Site& anchor,
                                            const EnumerationLimits& limits = {});

}  // namespace ldspin
