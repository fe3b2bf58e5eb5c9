#include "ldspin/polymer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <numeric>

namespace ldspin {

namespace {

long long ipow(long long base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

bool graph_connected(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n <= 1) return true;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  int components = n;
  for (auto [a, b] : edges) {
    const int ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

std::vector<std::pair<int, int>> overlap_edges(
    const std::vector<SiteList>& sets) {
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j)
      if (intersects(sets[i], sets[j]))
        edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return edges;
}

}  // namespace

SiteList Polymer::support() const {
  SiteList s;
  for (const auto& a : sets) s = set_union(s, a);
  return s;
}

bool Polymer::connected() const {
  return graph_connected(static_cast<int>(sets.size()), overlap_edges(sets));
}

Complex omega_t(const std::vector<std::pair<SiteList, OperatorMatrix>>& ops,
                Complex t, const Model& model,
                const std::optional<SiteList>& tilt_region, int tilt_sign) {
  SiteList volume;
  for (const auto& [sites, op] : ops) volume = set_union(volume, sites);
  const int n = static_cast<int>(volume.size());
  const int d = model.site_dim();
  const long long dim = ipow(d, n);

  const auto x_eig = herm_eig(model.x);

  OperatorMatrix density = OperatorMatrix::Identity(1, 1);
  for (const auto& site : volume) {
    const bool tilted = !tilt_region || contains(*tilt_region, site);
    OperatorMatrix site_density;
    if (tilted) {
      Eigen::VectorXcd w(d);
      Complex z = 0;
      double max_re = 0;
      for (int j = 0; j < d; ++j)
        max_re = std::max(
            max_re, std::real(static_cast<double>(tilt_sign) * t *
                              x_eig.eigenvalues(j)));
      for (int j = 0; j < d; ++j) {
        w(j) = std::exp(static_cast<double>(tilt_sign) * t *
                            x_eig.eigenvalues(j) -
                        max_re);
        z += w(j);
      }
      if (std::abs(z) < 1e-300)
        throw DomainError("omega_t: Tr e^{tX} vanishes");
      site_density = x_eig.eigenvectors * (w / z).asDiagonal() *
                     x_eig.eigenvectors.adjoint();
    } else {
      site_density = OperatorMatrix::Identity(d, d) / static_cast<double>(d);
    }
    density = kron(density, site_density).eval();
  }

  OperatorMatrix product = OperatorMatrix::Identity(dim, dim);
  for (const auto& [sites, op] : ops)
    product = (product * embed(op, sites, volume, d)).eval();
  return (density.transpose().cwiseProduct(product)).sum();
}

namespace {

Complex rho_common(const Polymer& polymer, Complex t, Complex beta,
                   const Model& model,
                   const std::optional<SiteList>& tilt_region, int tilt_sign) {
  const int k = polymer.degree();
  if (k == 0) throw DomainError("rho: empty polymer");
  if (!polymer.connected()) return Complex(0, 0);
  std::vector<std::pair<SiteList, OperatorMatrix>> ops;
  ops.reserve(k);
  for (const auto& a : polymer.sets) {
    auto phi = model.potential.phi_of(a);
    if (!phi) return Complex(0, 0);
    ops.emplace_back(a, *phi);
  }
  Complex factor(1, 0);
  double kfact = 1;
  for (int i = 1; i <= k; ++i) {
    factor *= -beta;
    kfact *= i;
  }
  return factor / kfact * omega_t(ops, t, model, tilt_region, tilt_sign);
}

}  // namespace

Complex rho_weight(const Polymer& polymer, Complex t, Complex beta,
                   const Model& model) {
  return rho_common(polymer, t, beta, model, std::nullopt, +1);
}

Complex rho_tilde_weight(const Polymer& polymer, Complex t, Complex beta,
                         const Model& model, const SiteList& tilted,
                         int tilt_sign) {
  return rho_common(polymer, t, beta, model, tilted, tilt_sign);
}

long long ursell_graph(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n <= 0) throw DomainError("ursell: empty tuple");
  if (n > 20) throw CapError("ursell: tuple too large");
  if (n == 1) return 1;
  std::vector<std::uint32_t> adj(n, 0);
  for (auto [a, b] : edges) {
    adj[a] |= 1u << b;
    adj[b] |= 1u << a;
  }
  const std::uint32_t full = (1u << n) - 1;
  // g(U) = sum over edge subsets within U of (-1)^{|E'|}; this telescopes to
  // 1 when U spans no edge and 0 otherwise.
  auto g = [&](std::uint32_t u) -> long long {
    for (int v = 0; v < n; ++v)
      if ((u >> v) & 1u)
        if (adj[v] & u & ~(1u << v)) return 0;
    return 1;
  };
  // f(U) = alternating sum over connected spanning subgraphs of U. Moebius
  // inversion over the component containing U's lowest vertex:
  //   g(U) = sum_{S subset U, S ni low(U)} f(S) g(U \ S).
  std::vector<long long> f(static_cast<std::size_t>(full) + 1, 0);
  for (std::uint32_t u = 1; u <= full; ++u) {
    const std::uint32_t low_bit = u & (~u + 1);
    if (u == low_bit) {
      f[u] = 1;
      continue;
    }
    const std::uint32_t rest = u & ~low_bit;
    long long val = g(u);
    // Proper subsets S = low_bit | T with T a proper submask of rest.
    std::uint32_t t = rest;
    for (;;) {
      t = (t - 1) & rest;  // first iteration skips T = rest (S = U)
      val -= f[low_bit | t] * g(u & ~(low_bit | t));
      if (t == 0) break;
    }
    f[u] = val;
  }
  return f[full];
}

long long ursell(const std::vector<Polymer>& polymers, int cap) {
  const int n = static_cast<int>(polymers.size());
  if (n > cap) throw CapError("ursell: tuple above the configured cap");
  std::vector<SiteList> supports;
  supports.reserve(n);
  for (const auto& p : polymers) supports.push_back(p.support());
  return ursell_graph(n, overlap_edges(supports));
}

std::vector<ClusterTerm> enumerate_clusters(const Model& model, int K,
                                            const Site& anchor,
                                            const EnumerationLimits& limits) {
  if (K < 1) throw DomainError("enumerate_clusters: K >= 1 required");
  if (model.potential.terms().empty()) return {};

  long long budget = limits.term_cap;
  auto spend = [&](long long cost) {
    budget -= cost;
    if (budget < 0) throw CapError("enumerate_clusters: term cap exceeded");
  };

  // Candidate interaction sets within reach of the anchor. Any set of a
  // cluster whose support contains the anchor sits within K(R+1) of it.
  std::vector<SiteList> candidates;
  {
    const int reach = K * (model.potential.range() + 1);
    int dims = 1;
    for (const auto& term : model.potential.terms())
      for (const auto& s : term.shape) {
        if (s.c[1] != 0) dims = std::max(dims, 2);
        if (s.c[2] != 0) dims = std::max(dims, 3);
      }
    const int ry = dims >= 2 ? reach : 0;
    const int rz = dims >= 3 ? reach : 0;
    for (const auto& term : model.potential.terms())
      for (int x = -reach; x <= reach; ++x)
        for (int y = -ry; y <= ry; ++y)
          for (int z = -rz; z <= rz; ++z)
            candidates.push_back(
                translate(term.shape, anchor + Site(x, y, z)));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
  }

  // All connected ordered sequences of candidate sets with length <= K.
  // Prefixes need not be connected, so sequences are grown freely and
  // filtered at each length.
  std::vector<Polymer> all_polymers;
  std::vector<std::vector<SiteList>> current;  // sequences of length k
  current.push_back({});
  for (int k = 1; k <= K; ++k) {
    std::vector<std::vector<SiteList>> next;
    for (const auto& base : current) {
      for (const auto& c : candidates) {
        spend(1);
        auto seq = base;
        seq.push_back(c);
        next.push_back(std::move(seq));
      }
    }
    for (const auto& seq : next) {
      Polymer p{seq};
      if (p.connected()) all_polymers.push_back(std::move(p));
    }
    current = std::move(next);
  }

  // Ordered tuples of polymers with total degree <= K, nonzero Ursell
  // coefficient and the anchor inside the total support.
  std::vector<ClusterTerm> out;
  std::vector<int> chosen;
  std::function<void(int)> extend = [&](int degree_used) {
    if (!chosen.empty()) {
      spend(1);
      std::vector<SiteList> supports;
      supports.reserve(chosen.size());
      for (int idx : chosen) supports.push_back(all_polymers[idx].support());
      SiteList total;
      for (const auto& s : supports) total = set_union(total, s);
      if (contains(total, anchor)) {
        const long long a_t = ursell_graph(
            static_cast<int>(supports.size()), overlap_edges(supports));
        if (a_t != 0) {
          ClusterTerm term;
          for (int idx : chosen) term.polymers.push_back(all_polymers[idx]);
          term.ursell = a_t;
          term.support = std::move(total);
          term.degree = degree_used;
          out.push_back(std::move(term));
        }
      }
    }
    if (static_cast<int>(chosen.size()) >= limits.max_cluster_polymers) return;
    for (std::size_t i = 0; i < all_polymers.size(); ++i) {
      const int deg = all_polymers[i].degree();
      if (degree_used + deg > K) continue;
      chosen.push_back(static_cast<int>(i));
      extend(degree_used + deg);
      chosen.pop_back();
    }
  };
  extend(0);
  return out;
}

}  // namespace ldspin
