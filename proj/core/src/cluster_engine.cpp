#include "ldspin/cluster_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string>

#include "ldspin/parallel.hpp"

namespace ldspin {

namespace {

long long ipow(long long base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// ---------------------------------------------------------------------------
// Enumeration structures. An Element is one placed interaction set, tagged by
// the block (potential index) it came from; a Collection is a connected set
// of distinct Elements, canonically translated so the support's lexicographic
// minimum is the origin.

struct Element {
  int block = 0;
  int term = 0;
  Site shift;
  auto operator<=>(const Element&) const = default;
};

struct Collection {
  std::vector<Element> elems;            // sorted, distinct
  SiteList support;                      // sorted union
  std::vector<SiteList> elem_sites;      // per element
  std::map<std::vector<int>, int> mult_to_class;  // filled after class assignment
};

struct PolymerClass {
  int collection = 0;
  std::vector<int> mult;          // per element of the collection, >= 1
  int degree = 0;                 // total
  std::vector<int> block_degree;  // per block
  double inv_kfact = 1;           // 1 / prod_b (block_degree_b)!
};

struct InstanceRef {
  int pclass = 0;
  Site shift;
  auto operator<=>(const InstanceRef&) const = default;
};

struct ClusterClass {
  std::vector<InstanceRef> instances;  // sorted; repeats encode multiplicity
  SiteList support;                    // canonical, lex-min at origin
  int degree = 0;
  std::vector<int> block_degree;
  long long a_t = 0;
  double inv_sym = 1;  // 1 / prod n_j! over identical instances
  Site bbox_lo, bbox_hi;
};

struct Enumeration {
  std::vector<Collection> collections;
  std::vector<PolymerClass> pclasses;
  std::vector<ClusterClass> clusters;
  int built_K = 0;
};

std::vector<int> elems_key(const std::vector<Element>& elems) {
  std::vector<int> key;
  key.reserve(elems.size() * 5);
  for (const auto& e : elems) {
    key.push_back(e.block);
    key.push_back(e.term);
    key.push_back(e.shift.c[0]);
    key.push_back(e.shift.c[1]);
    key.push_back(e.shift.c[2]);
  }
  return key;
}

std::vector<int> instances_key(const std::vector<InstanceRef>& inst) {
  std::vector<int> key;
  key.reserve(inst.size() * 4);
  for (const auto& i : inst) {
    key.push_back(i.pclass);
    key.push_back(i.shift.c[0]);
    key.push_back(i.shift.c[1]);
    key.push_back(i.shift.c[2]);
  }
  return key;
}

SiteList shape_of(const std::vector<const Potential*>& blocks,
                  const Element& e) {
  return translate(blocks[e.block]->terms()[e.term].shape, e.shift);
}

void bounding_box(const SiteList& s, Site& lo, Site& hi) {
  lo = hi = s.front();
  for (const auto& p : s)
    for (int a = 0; a < 3; ++a) {
      lo.c[a] = std::min(lo.c[a], p.c[a]);
      hi.c[a] = std::max(hi.c[a], p.c[a]);
    }
}

// Memoized Ursell coefficients keyed by (n, upper-triangle edge mask).
class UrsellCache {
 public:
  long long get(int n, std::uint64_t edge_mask) {
    const auto key = std::make_pair(n, edge_mask);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<std::pair<int, int>> edges;
    int bit = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j, ++bit)
        if ((edge_mask >> bit) & 1u) edges.emplace_back(i, j);
    const long long v = ursell_graph(n, edges);
    cache_.emplace(key, v);
    return v;
  }

 private:
  std::map<std::pair<int, std::uint64_t>, long long> cache_;
};

// ---------------------------------------------------------------------------
// Shared enumeration: collections by overlap growth, polymer classes as
// multiplicity vectors, cluster classes as connected multisets of placed
// polymer classes. Everything is canonicalized modulo translation and
// deduplicated through sorted maps, which also fixes a deterministic order.

Enumeration build_enumeration(const std::vector<const Potential*>& blocks,
                              int K, const EngineOptions& opt) {
  Enumeration en;
  en.built_K = K;
  long long budget = opt.term_cap;
  auto spend = [&](long long cost, const char* what) {
    budget -= cost;
    if (budget < 0)
      throw CapError(std::string("cluster engine: term cap exceeded while "
                                 "enumerating ") +
                     what);
  };

  bool any_terms = false;
  for (const auto* b : blocks) any_terms |= !b->terms().empty();
  if (!any_terms) return en;

  auto canonicalize = [&](std::vector<Element> elems) {
    SiteList support;
    for (const auto& e : elems) support = set_union(support, shape_of(blocks, e));
    const Site base = support.front();
    for (auto& e : elems) e.shift = e.shift - base;
    std::sort(elems.begin(), elems.end());
    return elems;
  };

  std::map<std::vector<int>, int> seen;
  std::vector<std::vector<Element>> frontier;

  // Level 1: each base term, anchored (its shape already starts at origin).
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t t = 0; t < blocks[b]->terms().size(); ++t) {
      auto canon = canonicalize({Element{static_cast<int>(b),
                                         static_cast<int>(t), Site()}});
      const auto key = elems_key(canon);
      if (seen.emplace(key, static_cast<int>(en.collections.size())).second) {
        Collection col;
        col.elems = std::move(canon);
        en.collections.push_back(std::move(col));
        frontier.push_back(en.collections.back().elems);
      }
    }

  for (int size = 2; size <= K; ++size) {
    std::vector<std::vector<Element>> next;
    for (const auto& elems : frontier) {
      SiteList support;
      for (const auto& e : elems) support = set_union(support, shape_of(blocks, e));
      // Extend by every placement overlapping the current support.
      std::set<Element> candidates;
      for (const auto& u : support)
        for (std::size_t b = 0; b < blocks.size(); ++b)
          for (std::size_t t = 0; t < blocks[b]->terms().size(); ++t)
            for (const auto& v : blocks[b]->terms()[t].shape)
              candidates.insert(Element{static_cast<int>(b),
                                        static_cast<int>(t), u - v});
      for (const auto& cand : candidates) {
        if (std::binary_search(elems.begin(), elems.end(), cand)) continue;
        spend(1, "collections");
        auto grown = elems;
        grown.insert(
            std::upper_bound(grown.begin(), grown.end(), cand), cand);
        auto canon = canonicalize(std::move(grown));
        const auto key = elems_key(canon);
        if (seen.emplace(key, static_cast<int>(en.collections.size())).second) {
          Collection col;
          col.elems = std::move(canon);
          en.collections.push_back(std::move(col));
          next.push_back(en.collections.back().elems);
        }
      }
    }
    frontier = std::move(next);
  }

  // Fill per-collection geometry.
  for (auto& col : en.collections) {
    for (const auto& e : col.elems) {
      col.elem_sites.push_back(shape_of(blocks, e));
      col.support = set_union(col.support, col.elem_sites.back());
    }
  }

  // Polymer classes: multiplicity vectors over each collection.
  const int nblocks = static_cast<int>(blocks.size());
  for (std::size_t ci = 0; ci < en.collections.size(); ++ci) {
    auto& col = en.collections[ci];
    const int l = static_cast<int>(col.elems.size());
    std::vector<int> mult(l, 1);
    // `total` = sum of multiplicities with every position at pos.. still 1.
    std::function<void(int, int)> emit = [&](int pos, int total) {
      if (pos == l) {
        spend(1, "polymer classes");
        PolymerClass pc;
        pc.collection = static_cast<int>(ci);
        pc.mult = mult;
        pc.degree = total;
        pc.block_degree.assign(nblocks, 0);
        for (int i = 0; i < l; ++i)
          pc.block_degree[col.elems[i].block] += mult[i];
        pc.inv_kfact = 1;
        for (int b = 0; b < nblocks; ++b)
          pc.inv_kfact /= factorial(pc.block_degree[b]);
        col.mult_to_class.emplace(mult, static_cast<int>(en.pclasses.size()));
        en.pclasses.push_back(std::move(pc));
        return;
      }
      for (int m = 1; total + (m - 1) <= K; ++m) {
        mult[pos] = m;
        emit(pos + 1, total + (m - 1));
        mult[pos] = 1;
      }
    };
    if (l <= K) emit(0, l);
  }

  // Cluster classes: connected multisets of placed polymer classes, grown by
  // support overlap and deduplicated modulo translation.
  UrsellCache ursell_cache;
  std::map<std::vector<int>, int> cluster_seen;
  std::vector<int> cluster_frontier;

  auto support_of_instances = [&](const std::vector<InstanceRef>& inst) {
    SiteList s;
    for (const auto& i : inst)
      s = set_union(
          s, translate(en.collections[en.pclasses[i.pclass].collection].support,
                       i.shift));
    return s;
  };

  auto push_cluster = [&](std::vector<InstanceRef> inst) -> int {
    SiteList support = support_of_instances(inst);
    const Site base = support.front();
    for (auto& i : inst) i.shift = i.shift - base;
    std::sort(inst.begin(), inst.end());
    const auto key = instances_key(inst);
    auto it = cluster_seen.find(key);
    if (it != cluster_seen.end()) return -1;
    spend(1, "clusters");

    ClusterClass cc;
    cc.instances = std::move(inst);
    cc.support = translate(support, Site() - base);
    cc.degree = 0;
    cc.block_degree.assign(nblocks, 0);
    for (const auto& i : cc.instances) {
      cc.degree += en.pclasses[i.pclass].degree;
      for (int b = 0; b < nblocks; ++b)
        cc.block_degree[b] += en.pclasses[i.pclass].block_degree[b];
    }
    const int n = static_cast<int>(cc.instances.size());
    if (n > opt.max_cluster_polymers)
      throw CapError("cluster engine: cluster polymer count above cap");
    // Incompatibility graph on instances (support overlap).
    std::vector<SiteList> supports(n);
    for (int i = 0; i < n; ++i)
      supports[i] = translate(
          en.collections[en.pclasses[cc.instances[i].pclass].collection].support,
          cc.instances[i].shift);
    std::uint64_t mask = 0;
    int bit = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j, ++bit)
        if (intersects(supports[i], supports[j])) mask |= 1ull << bit;
    cc.a_t = ursell_cache.get(n, mask);
    cc.inv_sym = 1;
    for (int i = 0; i < n;) {
      int j = i;
      while (j < n && cc.instances[j] == cc.instances[i]) ++j;
      cc.inv_sym /= factorial(j - i);
      i = j;
    }
    bounding_box(cc.support, cc.bbox_lo, cc.bbox_hi);
    const int id = static_cast<int>(en.clusters.size());
    cluster_seen.emplace(key, id);
    en.clusters.push_back(std::move(cc));
    return id;
  };

  for (std::size_t p = 0; p < en.pclasses.size(); ++p) {
    const int id = push_cluster({InstanceRef{static_cast<int>(p), Site()}});
    if (id >= 0) cluster_frontier.push_back(id);
  }
  while (!cluster_frontier.empty()) {
    std::vector<int> next;
    for (const int cid : cluster_frontier) {
      // Copy: en.clusters may reallocate while growing.
      const ClusterClass cur = en.clusters[cid];
      for (std::size_t p = 0; p < en.pclasses.size(); ++p) {
        const auto& pc = en.pclasses[p];
        if (cur.degree + pc.degree > K) continue;
        const SiteList& psupport = en.collections[pc.collection].support;
        std::set<Site> shifts;
        for (const auto& u : cur.support)
          for (const auto& v : psupport) shifts.insert(u - v);
        for (const auto& shift : shifts) {
          auto inst = cur.instances;
          inst.push_back(InstanceRef{static_cast<int>(p), shift});
          const int id = push_cluster(std::move(inst));
          if (id >= 0) next.push_back(id);
        }
      }
    }
    cluster_frontier = std::move(next);
  }

  // A_T = 0 clusters contribute nothing anywhere; drop them.
  std::vector<ClusterClass> kept;
  kept.reserve(en.clusters.size());
  for (auto& c : en.clusters)
    if (c.a_t != 0) kept.push_back(std::move(c));
  en.clusters = std::move(kept);
  return en;
}

// ---------------------------------------------------------------------------
// Ordered-product evaluation. For one collection, a single DFS over
// sequences (with coverage pruning and, for multi-block alphabets, the
// non-decreasing block-label constraint) accumulates the ordered and
// absolute sums for every multiplicity vector at once.

struct ApplyOp {
  long long dm = 0;
  std::vector<long long> offsets;  // local composite -> index offset
  std::vector<long long> base;     // per column: column with local digits zeroed
  std::vector<int> colq;           // per column: local composite
  const OperatorMatrix* local = nullptr;
};

struct EvalAccum {
  Complex ordered{0, 0};
  double abs = 0;
};

struct CollectionEval {
  // Per multiplicity vector of the collection.
  std::map<std::vector<int>, EvalAccum> sums;
};

// Weight spec: per support position, a normalized complex weight vector of
// size d (diagonal of the per-site reference density in the working basis).
CollectionEval eval_collection(
    const Collection& col, const std::vector<const OperatorMatrix*>& local_ops,
    const std::vector<Eigen::VectorXcd>& site_weights, int d, int K) {
  CollectionEval out;
  const int l = static_cast<int>(col.elems.size());
  const int n = static_cast<int>(col.support.size());
  const long long D = ipow(d, n);

  // Diagonal reference weights over the support.
  Eigen::VectorXcd W(D);
  for (long long idx = 0; idx < D; ++idx) {
    Complex w(1, 0);
    long long rem = idx;
    for (int pos = n - 1; pos >= 0; --pos) {
      w *= site_weights[pos](static_cast<int>(rem % d));
      rem /= d;
    }
    W(idx) = w;
  }

  // Column tables for right-multiplication by each embedded element.
  std::vector<ApplyOp> ops(l);
  for (int e = 0; e < l; ++e) {
    const auto pos = positions_in(col.elem_sites[e], col.support);
    const int m = static_cast<int>(pos.size());
    ApplyOp& op = ops[e];
    op.dm = ipow(d, m);
    op.local = local_ops[e];
    std::vector<long long> stride(m);
    for (int k = 0; k < m; ++k) stride[k] = ipow(d, n - 1 - pos[k]);
    op.offsets.assign(op.dm, 0);
    for (long long s = 0; s < op.dm; ++s) {
      long long rem = s;
      for (int k = m - 1; k >= 0; --k) {
        op.offsets[s] += (rem % d) * stride[k];
        rem /= d;
      }
    }
    op.base.resize(D);
    op.colq.resize(D);
    for (long long b = 0; b < D; ++b) {
      long long composite = 0;
      for (int k = 0; k < m; ++k)
        composite = composite * d + (b / stride[k]) % d;
      op.colq[b] = static_cast<int>(composite);
      op.base[b] = b - op.offsets[composite];
    }
  }

  std::vector<OperatorMatrix> stack(K + 1);
  stack[0] = OperatorMatrix::Identity(D, D);
  for (int k = 1; k <= K; ++k) stack[k].resize(D, D);

  std::vector<int> counts(l, 0);
  std::vector<int> blocks(l);
  for (int e = 0; e < l; ++e) blocks[e] = col.elems[e].block;

  std::function<void(int, int)> dfs = [&](int depth, int last_block) {
    if (depth == K) return;
    int uncovered = 0;
    for (int e = 0; e < l; ++e) uncovered += counts[e] == 0;
    for (int e = 0; e < l; ++e) {
      if (blocks[e] < last_block) continue;
      // Choosing block b forever closes lower blocks: they must be covered.
      bool orphan = false;
      for (int e2 = 0; e2 < l; ++e2)
        if (blocks[e2] < blocks[e] && counts[e2] == 0) {
          orphan = true;
          break;
        }
      if (orphan) continue;
      const int uncovered_after = uncovered - (counts[e] == 0 ? 1 : 0);
      if (depth + 1 + uncovered_after > K) continue;

      // stack[depth+1] = stack[depth] * embedded op e.
      const ApplyOp& op = ops[e];
      OperatorMatrix& dst = stack[depth + 1];
      const OperatorMatrix& src = stack[depth];
      dst.setZero();
      for (long long b = 0; b < D; ++b) {
        const int bq = op.colq[b];
        const long long base = op.base[b];
        for (long long cq = 0; cq < op.dm; ++cq) {
          const Complex coeff = (*op.local)(cq, bq);
          if (coeff == Complex(0, 0)) continue;
          dst.col(b) += coeff * src.col(base + op.offsets[cq]);
        }
      }

      ++counts[e];
      if (uncovered_after == 0) {
        const Complex val =
            (W.array() * dst.diagonal().array()).sum();
        auto& acc = out.sums[counts];
        acc.ordered += val;
        acc.abs += std::abs(val);
      }
      dfs(depth + 1, blocks[e]);
      --counts[e];
    }
  };
  dfs(0, 0);
  return out;
}

Eigen::VectorXcd normalized_weights(const std::vector<Complex>& g) {
  const int d = static_cast<int>(g.size());
  double max_re = g[0].real();
  for (const auto& v : g) max_re = std::max(max_re, v.real());
  Eigen::VectorXcd q(d);
  Complex z(0, 0);
  for (int j = 0; j < d; ++j) {
    q(j) = std::exp(g[j] - max_re);
    z += q(j);
  }
  if (std::abs(z) < 1e-300)
    throw DomainError("cluster engine: Tr e^{tX} vanishes");
  return q / z;
}

}  // namespace

// ---------------------------------------------------------------------------
// Level-1 engine.

struct ClusterExpansion::Impl {
  Model model;
  EngineOptions opt;
  SpectralDecomposition x_eig;
  std::vector<OperatorMatrix> term_ops;  // conjugated into the X eigenbasis
  Enumeration en;
  std::vector<const Potential*> blocks;

  // Cached polymer sums of the last uniform-tilt evaluation.
  struct WeightCache {
    bool valid = false;
    std::vector<Complex> g;
    int K = 0;
    std::vector<Complex> ordered;  // per pclass
    std::vector<double> abs;       // per pclass
  } cache;

  explicit Impl(Model m, EngineOptions o) : model(std::move(m)), opt(o) {
    require_hermitian(model.x, "ClusterExpansion");
    x_eig = herm_eig(model.x);
    for (const auto& term : model.potential.terms()) {
      // Conjugate into the X eigenbasis so tilted site densities become
      // diagonal weight vectors.
      OperatorMatrix u = OperatorMatrix::Identity(1, 1);
      for (std::size_t i = 0; i < term.shape.size(); ++i)
        u = kron(u, x_eig.eigenvectors).eval();
      term_ops.push_back(u.adjoint() * term.op * u);
    }
    blocks = {&model.potential};
  }

  void ensure_built(int K) {
    if (en.built_K >= K) return;
    en = build_enumeration(blocks, K, opt);
    cache.valid = false;
  }

  // The bulk tilted state always uses e^{+tX}; `sign` = -1 reproduces the
  // literal-sign variant for restricted tilt regions only.
  std::vector<Complex> tilt_exponents(Complex t, int sign = +1) const {
    std::vector<Complex> g(model.site_dim());
    for (int j = 0; j < model.site_dim(); ++j)
      g[j] = static_cast<double>(sign) * t * x_eig.eigenvalues(j);
    return g;
  }

  // Evaluate all polymer-class sums for the uniform tilt with exponents g.
  void eval_uniform(const std::vector<Complex>& g, int K) {
    ensure_built(K);
    if (cache.valid && cache.K >= K && cache.g == g) return;
    const Eigen::VectorXcd p = normalized_weights(g);
    std::vector<CollectionEval> evals(en.collections.size());
    parallel_for(en.collections.size(), [&](std::size_t ci) {
      const auto& col = en.collections[ci];
      std::vector<const OperatorMatrix*> local_ops;
      for (const auto& e : col.elems) local_ops.push_back(&term_ops[e.term]);
      std::vector<Eigen::VectorXcd> weights(col.support.size(), p);
      evals[ci] =
          eval_collection(col, local_ops, weights, model.site_dim(), K);
    });
    cache.g = g;
    cache.K = K;
    cache.ordered.assign(en.pclasses.size(), Complex(0, 0));
    cache.abs.assign(en.pclasses.size(), 0.0);
    for (std::size_t ci = 0; ci < en.collections.size(); ++ci) {
      for (const auto& [mult, acc] : evals[ci].sums) {
        const auto it = en.collections[ci].mult_to_class.find(mult);
        if (it == en.collections[ci].mult_to_class.end()) continue;
        cache.ordered[it->second] = acc.ordered;
        cache.abs[it->second] = acc.abs;
      }
    }
    cache.valid = true;
  }

  // (-1)^k / k! * ordered sum: the beta-degree coefficient of the polymer
  // weight aggregated over its internal orderings.
  Complex pclass_coef(int pid) const {
    const auto& pc = en.pclasses[pid];
    const double sign = pc.degree % 2 == 0 ? 1.0 : -1.0;
    return sign * pc.inv_kfact * cache.ordered[pid];
  }

  // Cluster-class coefficient of beta^{degree}.
  Complex cluster_coef(const ClusterClass& cc) const {
    Complex prod(static_cast<double>(cc.a_t) * cc.inv_sym, 0);
    for (const auto& i : cc.instances) prod *= pclass_coef(i.pclass);
    return prod;
  }
};

ClusterExpansion::ClusterExpansion(Model model, EngineOptions opt)
    : impl_(std::make_unique<Impl>(std::move(model), opt)) {}
ClusterExpansion::~ClusterExpansion() = default;
ClusterExpansion::ClusterExpansion(ClusterExpansion&&) noexcept = default;
ClusterExpansion& ClusterExpansion::operator=(ClusterExpansion&&) noexcept =
    default;

const Model& ClusterExpansion::model() const { return impl_->model; }

std::vector<Complex> ClusterExpansion::xi_coeffs_general(
    const std::vector<Complex>& g, int K) {
  if (K < 1) throw DomainError("xi: K >= 1 required");
  if (static_cast<int>(g.size()) != impl_->model.site_dim())
    throw DomainError("xi: tilt exponent vector must have site_dim entries");
  impl_->eval_uniform(g, K);
  std::vector<Complex> coeffs(K, Complex(0, 0));
  for (const auto& cc : impl_->en.clusters) {
    if (cc.degree > K) continue;
    coeffs[cc.degree - 1] += impl_->cluster_coef(cc);
  }
  return coeffs;
}

std::vector<Complex> ClusterExpansion::xi_coeffs(Complex t, int K) {
  return xi_coeffs_general(impl_->tilt_exponents(t), K);
}

TruncatedSeries ClusterExpansion::xi_free(
    Complex t, Complex beta, int K, const std::optional<Certificate>& cert) {
  TruncatedSeries s;
  s.order = K;
  s.coeffs = xi_coeffs(t, K);
  Complex value(0, 0), beta_pow(1, 0);
  for (int k = 1; k <= K; ++k) {
    beta_pow *= beta;
    value += s.coeffs[k - 1] * beta_pow;
  }
  s.value = value;
  s.next_order_estimate = std::abs(s.coeffs[K - 1] * beta_pow);
  if (impl_->model.potential.terms().empty()) {
    s.support_tail_bound = 0.0;
  } else if (cert && std::abs(beta) <= cert->beta0 &&
             (std::abs(t.imag()) == 0.0 ||
              (cert->delta > 0 && std::abs(t.imag()) <= cert->delta))) {
    const double m =
        static_cast<double>(K) *
        static_cast<double>(impl_->model.potential.max_shape_size());
    s.support_tail_bound = cert->a * std::exp(-cert->a * m);
  }
  return s;
}

std::vector<Complex> ClusterExpansion::finite_volume_coeffs(
    const LatticeBox& box, Complex t, int K) {
  impl_->eval_uniform(impl_->tilt_exponents(t), K);
  std::vector<Complex> coeffs(K, Complex(0, 0));
  for (const auto& cc : impl_->en.clusters) {
    if (cc.degree > K) continue;
    long long placements = 1;
    for (int a = 0; a < 3; ++a) {
      const int len = a < box.d ? box.lengths[a] : 1;
      const int extent = cc.bbox_hi.c[a] - cc.bbox_lo.c[a] + 1;
      placements *= std::max(0, len - extent + 1);
    }
    if (placements == 0) continue;
    coeffs[cc.degree - 1] +=
        static_cast<double>(placements) * impl_->cluster_coef(cc);
  }
  return coeffs;
}

std::vector<double> ClusterExpansion::abs_cluster_sums_by_degree(double t,
                                                                 double beta,
                                                                 int K) {
  impl_->eval_uniform(impl_->tilt_exponents(Complex(t, 0)), K);
  // Group clusters by canonical support; |w(C)| needs the full signed sum
  // per support before the absolute value.
  std::map<SiteList, std::vector<Complex>> by_support;  // per degree values
  for (const auto& cc : impl_->en.clusters) {
    if (cc.degree > K) continue;
    auto& v = by_support[cc.support];
    if (v.empty()) v.assign(K, Complex(0, 0));
    v[cc.degree - 1] += impl_->cluster_coef(cc);
  }
  std::vector<double> out(K, 0.0);
  for (const auto& [support, per_degree] : by_support) {
    // |C| translates of C contain the origin.
    const double size = static_cast<double>(support.size());
    Complex w(0, 0);
    double beta_pow = 1;
    for (int k = 1; k <= K; ++k) {
      beta_pow *= beta;
      w += per_degree[k - 1] * beta_pow;
      out[k - 1] += size * std::abs(w);
    }
  }
  return out;
}

double ClusterExpansion::abs_cluster_sum(double t, double beta, int K) {
  return abs_cluster_sums_by_degree(t, beta, K).back();
}

std::vector<double> ClusterExpansion::kp_weighted_sums_by_degree(double a,
                                                                 double t,
                                                                 double beta,
                                                                 int K) {
  impl_->eval_uniform(impl_->tilt_exponents(Complex(t, 0)), K);
  std::vector<double> out(K, 0.0);
  for (std::size_t pid = 0; pid < impl_->en.pclasses.size(); ++pid) {
    const auto& pc = impl_->en.pclasses[pid];
    if (pc.degree > K) continue;
    const auto& support =
        impl_->en.collections[pc.collection].support;
    const double size = static_cast<double>(support.size());
    const double term = size * std::exp(a * size) *
                        std::pow(std::abs(beta), pc.degree) /
                        factorial(pc.degree) * impl_->cache.abs[pid];
    out[pc.degree - 1] += term;
  }
  for (int k = 1; k < K; ++k) out[k] += out[k - 1];
  return out;
}

double ClusterExpansion::kp_weighted_sum(double a, double t, double beta,
                                         int K) {
  return kp_weighted_sums_by_degree(a, t, beta, K).back();
}

Complex ClusterExpansion::boundary_cluster_sum(const LatticeBox& box,
                                               const LatticeBox& outer,
                                               double t, double beta, int K) {
  if (!box.inside(outer))
    throw DomainError("boundary_cluster_sum: box not inside outer");
  impl_->ensure_built(K);
  const int d = impl_->model.site_dim();
  const auto g_tilt =
      impl_->tilt_exponents(Complex(t, 0), impl_->opt.tilt_sign);
  const Eigen::VectorXcd p_tilt = normalized_weights(g_tilt);
  const Eigen::VectorXcd p_plain =
      Eigen::VectorXcd::Constant(d, Complex(1.0 / d, 0));

  // Ordered sums per (collection, membership mask of the support in `box`).
  std::map<std::pair<int, std::uint64_t>,
           std::map<std::vector<int>, Complex>>
      memo;
  auto masked_sums = [&](int ci, std::uint64_t mask)
      -> const std::map<std::vector<int>, Complex>& {
    const auto key = std::make_pair(ci, mask);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    const auto& col = impl_->en.collections[ci];
    std::vector<const OperatorMatrix*> local_ops;
    for (const auto& e : col.elems)
      local_ops.push_back(&impl_->term_ops[e.term]);
    std::vector<Eigen::VectorXcd> weights;
    for (std::size_t ps = 0; ps < col.support.size(); ++ps)
      weights.push_back(((mask >> ps) & 1u) ? p_tilt : p_plain);
    auto eval = eval_collection(col, local_ops, weights, d, K);
    std::map<std::vector<int>, Complex> sums;
    for (const auto& [mult, acc] : eval.sums) sums[mult] = acc.ordered;
    return memo.emplace(key, std::move(sums)).first->second;
  };

  Complex total(0, 0);
  for (const auto& cc : impl_->en.clusters) {
    if (cc.degree > K) continue;
    // Placements of the cluster support inside `outer`.
    std::array<int, 3> from{}, to{};
    bool any = true;
    for (int a = 0; a < 3; ++a) {
      const int len = a < outer.d ? outer.lengths[a] : 1;
      from[a] = outer.corner[a] - cc.bbox_lo.c[a];
      to[a] = outer.corner[a] + len - 1 - cc.bbox_hi.c[a];
      if (to[a] < from[a]) any = false;
    }
    if (!any) continue;
    for (int x = from[0]; x <= to[0]; ++x)
      for (int y = from[1]; y <= to[1]; ++y)
        for (int z = from[2]; z <= to[2]; ++z) {
          const Site shift(x, y, z);
          bool meets_box = false, meets_rest = false;
          for (const auto& s : cc.support) {
            if (box.contains_site(s + shift))
              meets_box = true;
            else
              meets_rest = true;
            if (meets_box && meets_rest) break;
          }
          if (!meets_box || !meets_rest) continue;

          Complex prod(static_cast<double>(cc.a_t) * cc.inv_sym, 0);
          for (const auto& inst : cc.instances) {
            const auto& pc = impl_->en.pclasses[inst.pclass];
            const auto& col = impl_->en.collections[pc.collection];
            std::uint64_t mask = 0;
            for (std::size_t ps = 0; ps < col.support.size(); ++ps)
              if (box.contains_site(col.support[ps] + inst.shift + shift))
                mask |= 1ull << ps;
            const auto& sums = masked_sums(pc.collection, mask);
            const auto it = sums.find(pc.mult);
            if (it == sums.end())
              throw InvariantError("boundary_cluster_sum: missing class sum");
            const double sign = pc.degree % 2 == 0 ? 1.0 : -1.0;
            prod *= sign * pc.inv_kfact * it->second;
          }
          total += prod * std::pow(beta, cc.degree);
        }
  }
  return total;
}

void ClusterExpansion::dump_cluster_table(std::ostream& os, double t,
                                          double beta, int K) {
  impl_->eval_uniform(impl_->tilt_exponents(Complex(t, 0)), K);
  os << "support,degree,polymers,a_T,inv_sym,weight_re,weight_im\n";
  char buf[64];
  for (const auto& cc : impl_->en.clusters) {
    if (cc.degree > K) continue;
    std::string support;
    for (const auto& s : cc.support) {
      if (!support.empty()) support += ';';
      support += '(' + std::to_string(s.c[0]) + ' ' + std::to_string(s.c[1]) +
                 ' ' + std::to_string(s.c[2]) + ')';
    }
    const Complex w =
        impl_->cluster_coef(cc) * std::pow(Complex(beta, 0), cc.degree);
    os << '"' << support << '"' << ',' << cc.degree << ','
       << cc.instances.size() << ',' << cc.a_t << ',' << cc.inv_sym << ',';
    std::snprintf(buf, sizeof buf, "%.17g", w.real());
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", w.imag());
    os << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// Multi-potential expansion with the trace reference state.

double kp_condition_general(const std::vector<Potential>& pots, double a,
                            const std::vector<double>& deltas) {
  if (pots.empty() || pots.size() != deltas.size())
    throw DomainError("kp_condition_general: blocks/deltas mismatch");
  if (a <= 0) throw DomainError("kp_condition_general: a > 0 required");
  // Group shapes across potentials: the condition couples them through the
  // summed exponent.
  std::map<SiteList, double> exponent;  // shape -> sum_i delta_i ||Phi_i||
  for (std::size_t i = 0; i < pots.size(); ++i)
    for (std::size_t t = 0; t < pots[i].terms().size(); ++t)
      exponent[pots[i].terms()[t].shape] +=
          deltas[i] * pots[i].term_norm(static_cast<int>(t));
  double sum = 0;
  for (const auto& [shape, expsum] : exponent) {
    const double size = static_cast<double>(shape.size());
    sum += size * std::exp(2.0 * a * size) * std::expm1(expsum);
  }
  return a - sum;
}

struct GeneralizedExpansion::Impl {
  int site_dim;
  std::vector<Potential> pots;
  EngineOptions opt;
  std::vector<const Potential*> blocks;
  Enumeration en;
  bool evaluated = false;
  int eval_K = 0;
  std::vector<Complex> ordered;  // per pclass

  Impl(int d, std::vector<Potential> p, EngineOptions o)
      : site_dim(d), pots(std::move(p)), opt(o) {
    if (pots.empty())
      throw DomainError("GeneralizedExpansion: at least one potential");
    for (const auto& pot : pots)
      if (pot.site_dim() != site_dim)
        throw DomainError("GeneralizedExpansion: site_dim mismatch");
    for (const auto& pot : pots) blocks.push_back(&pot);
  }

  void ensure_eval(int K) {
    if (evaluated && eval_K >= K) return;
    en = build_enumeration(blocks, K, opt);
    const Eigen::VectorXcd p =
        Eigen::VectorXcd::Constant(site_dim, Complex(1.0 / site_dim, 0));
    std::vector<CollectionEval> evals(en.collections.size());
    parallel_for(en.collections.size(), [&](std::size_t ci) {
      const auto& col = en.collections[ci];
      std::vector<const OperatorMatrix*> local_ops;
      for (const auto& e : col.elems)
        local_ops.push_back(&blocks[e.block]->terms()[e.term].op);
      std::vector<Eigen::VectorXcd> weights(col.support.size(), p);
      evals[ci] = eval_collection(col, local_ops, weights, site_dim, K);
    });
    ordered.assign(en.pclasses.size(), Complex(0, 0));
    for (std::size_t ci = 0; ci < en.collections.size(); ++ci)
      for (const auto& [mult, acc] : evals[ci].sums) {
        const auto it = en.collections[ci].mult_to_class.find(mult);
        if (it != en.collections[ci].mult_to_class.end())
          ordered[it->second] = acc.ordered;
      }
    evaluated = true;
    eval_K = K;
  }

  Complex cluster_coef(const ClusterClass& cc) const {
    Complex prod(static_cast<double>(cc.a_t) * cc.inv_sym, 0);
    for (const auto& i : cc.instances) {
      const auto& pc = en.pclasses[i.pclass];
      prod *= pc.inv_kfact * ordered[i.pclass];
    }
    return prod;
  }
};

GeneralizedExpansion::GeneralizedExpansion(int site_dim,
                                           std::vector<Potential> potentials,
                                           EngineOptions opt)
    : impl_(std::make_unique<Impl>(site_dim, std::move(potentials), opt)) {}
GeneralizedExpansion::~GeneralizedExpansion() = default;
GeneralizedExpansion::GeneralizedExpansion(GeneralizedExpansion&&) noexcept =
    default;
GeneralizedExpansion& GeneralizedExpansion::operator=(
    GeneralizedExpansion&&) noexcept = default;

int GeneralizedExpansion::blocks() const {
  return static_cast<int>(impl_->pots.size());
}

std::map<std::vector<int>, Complex> GeneralizedExpansion::xi_coeffs(int K) {
  if (K < 1) throw DomainError("generalized xi: K >= 1 required");
  impl_->ensure_eval(K);
  std::map<std::vector<int>, Complex> out;
  for (const auto& cc : impl_->en.clusters) {
    if (cc.degree > K) continue;
    out[cc.block_degree] += impl_->cluster_coef(cc);
  }
  return out;
}

std::map<std::vector<int>, Complex> GeneralizedExpansion::finite_volume_coeffs(
    const LatticeBox& box, int K) {
  if (K < 1) throw DomainError("generalized xi: K >= 1 required");
  impl_->ensure_eval(K);
  std::map<std::vector<int>, Complex> out;
  for (const auto& cc : impl_->en.clusters) {
    if (cc.degree > K) continue;
    long long placements = 1;
    for (int a = 0; a < 3; ++a) {
      const int len = a < box.d ? box.lengths[a] : 1;
      const int extent = cc.bbox_hi.c[a] - cc.bbox_lo.c[a] + 1;
      placements *= std::max(0, len - extent + 1);
    }
    if (placements == 0) continue;
    out[cc.block_degree] +=
        static_cast<double>(placements) * impl_->cluster_coef(cc);
  }
  return out;
}

TruncatedSeries GeneralizedExpansion::xi(
    const std::vector<Complex>& z, int K,
    const std::optional<GeneralCertificate>& cert, bool uncertified) {
  if (static_cast<int>(z.size()) != blocks())
    throw DomainError("generalized xi: z size must match the block count");
  if (cert) {
    if (static_cast<int>(cert->deltas.size()) != blocks())
      throw DomainError("generalized xi: certificate delta count mismatch");
    for (std::size_t i = 0; i < z.size(); ++i)
      if (std::abs(z[i]) > cert->deltas[i])
        throw CapError("generalized xi: |z_i| outside the certified polydisc");
  } else if (!uncertified) {
    throw DomainError(
        "generalized xi: no certificate; pass uncertified=true to override");
  }
  const auto coeffs = xi_coeffs(K);
  TruncatedSeries s;
  s.order = K;
  s.coeffs.assign(K, Complex(0, 0));
  for (const auto& [deg, c] : coeffs) {
    Complex mono(1, 0);
    int total = 0;
    for (std::size_t b = 0; b < z.size(); ++b) {
      for (int k = 0; k < deg[b]; ++k) mono *= z[b];
      total += deg[b];
    }
    s.coeffs[total - 1] += c * mono;
  }
  for (const auto& c : s.coeffs) s.value += c;
  s.next_order_estimate = std::abs(s.coeffs[K - 1]);
  return s;
}

TruncatedSeries local_observable_F(const Model& model, const SiteList& shape_d,
                                   const OperatorMatrix& x_loc, Complex z,
                                   double beta, int K,
                                   const std::optional<GeneralCertificate>& cert,
                                   bool uncertified, EngineOptions opt) {
  std::vector<BaseInteraction> obs_terms;
  obs_terms.push_back(BaseInteraction{shape_d, x_loc});
  Potential obs(model.site_dim(), std::move(obs_terms));
  GeneralizedExpansion ge(model.site_dim(), {model.potential, obs}, opt);
  const std::vector<Complex> zvec = {Complex(-beta, 0), z};
  if (cert) {
    if (cert->deltas.size() != 2)
      throw DomainError("local_observable_F: certificate must carry 2 deltas");
    for (int i = 0; i < 2; ++i)
      if (std::abs(zvec[i]) > cert->deltas[i])
        throw CapError("local_observable_F: couplings outside the polydisc");
  } else if (!uncertified) {
    throw DomainError("local_observable_F: no certificate supplied");
  }
  const auto coeffs = ge.xi_coeffs(K);
  TruncatedSeries s;
  s.order = K;
  s.coeffs.assign(K, Complex(0, 0));
  for (const auto& [deg, c] : coeffs) {
    if (deg[1] == 0) continue;  // pressure part, subtracted
    Complex mono(1, 0);
    for (int k = 0; k < deg[0]; ++k) mono *= Complex(-beta, 0);
    for (int k = 0; k < deg[1]; ++k) mono *= z;
    s.coeffs[deg[0] + deg[1] - 1] += c * mono;
  }
  for (const auto& c : s.coeffs) s.value += c;
  s.next_order_estimate = std::abs(s.coeffs[K - 1]);
  return s;
}

double complex_margin(const Potential& pot, double x_norm, double a, double y,
                      double beta) {
  return kp_condition_analytic(pot, x_norm, a, std::abs(y), std::abs(beta));
}

}  // namespace ldspin
