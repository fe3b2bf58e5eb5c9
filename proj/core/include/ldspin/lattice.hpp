#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <vector>

#include "ldspin/operators.hpp"

namespace ldspin {

// A point of Z^d, d <= 3; unused coordinates stay 0. Ordering is
// lexicographic, which fixes the tensor-factor order everywhere: the
// lexicographically first site of a volume is the most significant factor.
struct Site {
  std::array<int, 3> c{0, 0, 0};

  Site() = default;
  Site(int x, int y = 0, int z = 0) : c{x, y, z} {}

  friend auto operator<=>(const Site&, const Site&) = default;
  Site operator+(const Site& o) const {
    return {c[0] + o.c[0], c[1] + o.c[1], c[2] + o.c[2]};
  }
  Site operator-(const Site& o) const {
    return {c[0] - o.c[0], c[1] - o.c[1], c[2] - o.c[2]};
  }
};

// Sorted duplicate-free site list; the working representation of finite
// subsets of the lattice.
using SiteList = std::vector<Site>;

SiteList sorted_unique(SiteList sites);
bool contains(const SiteList& a, const Site& s);
bool is_subset(const SiteList& a, const SiteList& b);
bool intersects(const SiteList& a, const SiteList& b);
SiteList set_union(const SiteList& a, const SiteList& b);
SiteList translate(const SiteList& a, const Site& shift);
// Chebyshev (max-axis) diameter.
int diameter(const SiteList& a);

// Axis-aligned box of lattice sites; `corner` is the lowest site.
struct LatticeBox {
  int d = 1;
  std::array<int, 3> lengths{1, 1, 1};
  std::array<int, 3> corner{0, 0, 0};

  static LatticeBox chain(int length, int offset = 0);
  static LatticeBox box2d(int lx, int ly);
  static LatticeBox box3d(int lx, int ly, int lz);

  long long volume() const;
  SiteList sites() const;  // lexicographic order
  bool contains_site(const Site& s) const;
  bool contains(const SiteList& sites) const;
  bool inside(const LatticeBox& outer) const;
  // Sites of the box with a nearest neighbor outside it.
  SiteList boundary_sites() const;
};

// Position of each support site within the ordered volume list.
// Throws DomainError if the support is not contained in the volume.
std::vector<int> positions_in(const SiteList& support, const SiteList& volume);

// Place a local operator into the volume's product space, identities
// elsewhere. Both site lists must be sorted.
OperatorMatrix embed(const OperatorMatrix& op, const SiteList& support,
                     const SiteList& volume, int site_dim);

}  // namespace ldspin
