#include "ldspin/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ldspin {

namespace {

long long ipow(long long base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

void check_dim_cap(int site_dim, long long volume, long long cap,
                   const char* where) {
  long long dim = 1;
  for (long long i = 0; i < volume; ++i) {
    dim *= site_dim;
    if (dim > cap)
      throw CapError(std::string(where) + ": site_dim^|volume| exceeds the " +
                     "dimension cap " + std::to_string(cap));
  }
}

// All translates of the shape contained in the box, as shifts. The box
// contains a set iff it contains its bounding box.
std::vector<Site> shifts_inside(const SiteList& shape, const LatticeBox& box) {
  std::vector<Site> out;
  std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < 3; ++a) {
    lo[a] = hi[a] = shape.front().c[a];
    for (const auto& s : shape) {
      lo[a] = std::min(lo[a], s.c[a]);
      hi[a] = std::max(hi[a], s.c[a]);
    }
  }
  std::array<int, 3> from{0, 0, 0}, to{0, 0, 0};
  for (int a = 0; a < 3; ++a) {
    const int len = a < box.d ? box.lengths[a] : 1;
    from[a] = box.corner[a] - lo[a];
    to[a] = box.corner[a] + len - 1 - hi[a];
    if (to[a] < from[a]) return out;
  }
  for (int x = from[0]; x <= to[0]; ++x)
    for (int y = from[1]; y <= to[1]; ++y)
      for (int z = from[2]; z <= to[2]; ++z) out.push_back(Site(x, y, z));
  return out;
}

}  // namespace

Potential::Potential(int site_dim, std::vector<BaseInteraction> terms)
    : site_dim_(site_dim), terms_(std::move(terms)) {
  if (site_dim_ < 2) throw DomainError("Potential: site_dim must be >= 2");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    auto& t = terms_[i];
    t.shape = sorted_unique(std::move(t.shape));
    if (t.shape.empty()) throw DomainError("Potential: empty shape");
    if (t.shape.front() != Site(0, 0, 0))
      throw DomainError(
          "Potential: shape must be anchored at its lexicographic minimum");
    const long long dim = ipow(site_dim_, static_cast<int>(t.shape.size()));
    if (t.op.rows() != dim || t.op.cols() != dim)
      throw DomainError("Potential: term dimension != site_dim^|shape|");
    require_hermitian(t.op, "Potential");
    for (std::size_t j = 0; j < i; ++j)
      if (terms_[j].shape == t.shape)
        throw DomainError("Potential: duplicate shape");
    norms_.push_back(spectral_norm(t.op));
    range_ = std::max(range_, diameter(t.shape));
  }
}

double Potential::max_term_norm() const {
  double m = 0;
  for (double n : norms_) m = std::max(m, n);
  return m;
}

long long Potential::max_shape_size() const {
  long long m = 0;
  for (const auto& t : terms_)
    m = std::max<long long>(m, static_cast<long long>(t.shape.size()));
  return m;
}

int Potential::term_index_of(const SiteList& a) const {
  if (a.empty()) return -1;
  const Site shift = a.front();
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto& shape = terms_[i].shape;
    if (shape.size() != a.size()) continue;
    bool match = true;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (shape[k] + shift != a[k]) {
        match = false;
        break;
      }
    if (match) return static_cast<int>(i);
  }
  return -1;
}

std::optional<OperatorMatrix> Potential::phi_of(const SiteList& a) const {
  const int i = term_index_of(sorted_unique(a));
  if (i < 0) return std::nullopt;
  return terms_[i].op;
}

OperatorMatrix hamiltonian(const Potential& pot, const LatticeBox& box,
                           long long dim_cap) {
  check_dim_cap(pot.site_dim(), box.volume(), dim_cap, "hamiltonian");
  const SiteList volume = box.sites();
  const long long dim = ipow(pot.site_dim(), static_cast<int>(volume.size()));
  OperatorMatrix h = OperatorMatrix::Zero(dim, dim);
  for (const auto& term : pot.terms()) {
    for (const auto& shift : shifts_inside(term.shape, box)) {
      const SiteList placed = translate(term.shape, shift);
      add_embedded(h, term.op, positions_in(placed, volume), pot.site_dim());
    }
  }
  return h;
}

OperatorMatrix boundary_term(const Potential& pot, const LatticeBox& box,
                             const LatticeBox& outer, long long dim_cap) {
  if (!box.inside(outer))
    throw DomainError("boundary_term: box not contained in the outer box");
  check_dim_cap(pot.site_dim(), outer.volume(), dim_cap, "boundary_term");
  const SiteList volume = outer.sites();
  const long long dim = ipow(pot.site_dim(), static_cast<int>(volume.size()));
  OperatorMatrix w = OperatorMatrix::Zero(dim, dim);
  for (const auto& term : pot.terms()) {
    for (const auto& shift : shifts_inside(term.shape, outer)) {
      const SiteList placed = translate(term.shape, shift);
      const bool meets_box = std::any_of(
          placed.begin(), placed.end(),
          [&](const Site& s) { return box.contains_site(s); });
      const bool meets_complement = std::any_of(
          placed.begin(), placed.end(),
          [&](const Site& s) { return !box.contains_site(s); });
      if (meets_box && meets_complement)
        add_embedded(w, term.op, positions_in(placed, volume), pot.site_dim());
    }
  }
  return w;
}

double kp_condition(const Potential& pot, double a, double beta0) {
  if (a <= 0 || beta0 < 0)
    throw DomainError("kp_condition: requires a > 0 and beta0 >= 0");
  double sum = 0;
  for (std::size_t i = 0; i < pot.terms().size(); ++i) {
    const double size = static_cast<double>(pot.terms()[i].shape.size());
    // |shape| translates of the shape contain the origin.
    sum += size * std::exp(2.0 * a * size) * std::expm1(beta0 * pot.term_norm(i));
  }
  return a - sum;
}

double kp_condition_analytic(const Potential& pot, double x_norm, double a,
                             double delta, double beta0) {
  if (a <= 0 || beta0 < 0 || delta < 0)
    throw DomainError("kp_condition_analytic: requires a > 0, delta, beta0 >= 0");
  const double damping = 2.0 - std::exp(delta * x_norm);
  if (damping <= 0)
    throw DomainError(
        "kp_condition_analytic: delta*||X|| >= ln 2, strip condition void");
  const double factor = std::exp(2.0 * a) / damping;
  double sum = 0;
  for (std::size_t i = 0; i < pot.terms().size(); ++i) {
    const double size = static_cast<double>(pot.terms()[i].shape.size());
    sum += size * std::pow(factor, size) * std::expm1(beta0 * pot.term_norm(i));
  }
  return a - sum;
}

double exp_summability(const Potential& pot, double eps) {
  double sum = 0;
  for (std::size_t i = 0; i < pot.terms().size(); ++i) {
    const double size = static_cast<double>(pot.terms()[i].shape.size());
    sum += size * std::exp(eps * size) * pot.term_norm(i);
  }
  return sum;
}

Certificate find_beta0(const Potential& pot, double x_norm,
                       const std::vector<double>& a_grid, double delta,
                       double beta_max) {
  if (a_grid.empty()) throw DomainError("find_beta0: empty grid");
  Certificate best{0.0, -1.0, delta};
  for (double a : a_grid) {
    auto margin = [&](double beta0) {
      return delta > 0 ? kp_condition_analytic(pot, x_norm, a, delta, beta0)
                       : kp_condition(pot, a, beta0);
    };
    if (margin(0.0) < 0) continue;  // cannot happen for delta*||X|| < ln 2
    double beta0;
    if (margin(beta_max) >= 0) {
      beta0 = beta_max;
    } else {
      double lo = 0.0, hi = beta_max;
      while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        (margin(mid) >= 0 ? lo : hi) = mid;
      }
      beta0 = lo;
    }
    if (beta0 > best.beta0) best = Certificate{a, beta0, delta};
  }
  if (best.beta0 < 0)
    throw CapError("find_beta0: no feasible (a, beta0) pair on the grid");
  return best;
}

}  // namespace ldspin
