#include "ldspin/lattice.hpp"

#include <algorithm>

namespace ldspin {

SiteList sorted_unique(SiteList sites) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

bool contains(const SiteList& a, const Site& s) {
  return std::binary_search(a.begin(), a.end(), s);
}

bool is_subset(const SiteList& a, const SiteList& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

bool intersects(const SiteList& a, const SiteList& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib)
      ++ia;
    else if (*ib < *ia)
      ++ib;
    else
      return true;
  }
  return false;
}

SiteList set_union(const SiteList& a, const SiteList& b) {
  SiteList r;
  r.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(r));
  return r;
}

SiteList translate(const SiteList& a, const Site& shift) {
  SiteList r;
  r.reserve(a.size());
  for (const auto& s : a) r.push_back(s + shift);
  return r;  // translation preserves lexicographic order
}

int diameter(const SiteList& a) {
  if (a.empty()) return 0;
  int diam = 0;
  for (int axis = 0; axis < 3; ++axis) {
    int lo = a.front().c[axis], hi = lo;
    for (const auto& s : a) {
      lo = std::min(lo, s.c[axis]);
      hi = std::max(hi, s.c[axis]);
    }
    diam = std::max(diam, hi - lo);
  }
  return diam;
}

LatticeBox LatticeBox::chain(int length, int offset) {
  LatticeBox b;
  b.d = 1;
  b.lengths = {length, 1, 1};
  b.corner = {offset, 0, 0};
  return b;
}

LatticeBox LatticeBox::box2d(int lx, int ly) {
  LatticeBox b;
  b.d = 2;
  b.lengths = {lx, ly, 1};
  return b;
}

LatticeBox LatticeBox::box3d(int lx, int ly, int lz) {
  LatticeBox b;
  b.d = 3;
  b.lengths = {lx, ly, lz};
  return b;
}

long long LatticeBox::volume() const {
  long long v = 1;
  for (int a = 0; a < d; ++a) v *= lengths[a];
  return v;
}

SiteList LatticeBox::sites() const {
  SiteList r;
  r.reserve(static_cast<std::size_t>(volume()));
  std::array<int, 3> len = lengths;
  for (int a = d; a < 3; ++a) len[a] = 1;
  for (int x = 0; x < len[0]; ++x)
    for (int y = 0; y < len[1]; ++y)
      for (int z = 0; z < len[2]; ++z)
        r.push_back(Site(corner[0] + x, corner[1] + y, corner[2] + z));
  std::sort(r.begin(), r.end());
  return r;
}

bool LatticeBox::contains_site(const Site& s) const {
  for (int a = 0; a < 3; ++a) {
    const int len = a < d ? lengths[a] : 1;
    if (s.c[a] < corner[a] || s.c[a] >= corner[a] + len) return false;
  }
  return true;
}

bool LatticeBox::contains(const SiteList& list) const {
  return std::all_of(list.begin(), list.end(),
                     [&](const Site& s) { return contains_site(s); });
}

bool LatticeBox::inside(const LatticeBox& outer) const {
  for (int a = 0; a < 3; ++a) {
    const int len = a < d ? lengths[a] : 1;
    const int olen = a < outer.d ? outer.lengths[a] : 1;
    if (corner[a] < outer.corner[a] ||
        corner[a] + len > outer.corner[a] + olen)
      return false;
  }
  return true;
}

SiteList LatticeBox::boundary_sites() const {
  SiteList r;
  for (const auto& s : sites()) {
    bool boundary = false;
    for (int a = 0; a < d && !boundary; ++a) {
      Site up = s, down = s;
      up.c[a] += 1;
      down.c[a] -= 1;
      boundary = !contains_site(up) || !contains_site(down);
    }
    if (boundary) r.push_back(s);
  }
  return r;
}

std::vector<int> positions_in(const SiteList& support, const SiteList& volume) {
  std::vector<int> pos;
  pos.reserve(support.size());
  for (const auto& s : support) {
    auto it = std::lower_bound(volume.begin(), volume.end(), s);
    if (it == volume.end() || *it != s)
      throw DomainError("embed: support site not contained in the volume");
    pos.push_back(static_cast<int>(it - volume.begin()));
  }
  return pos;
}

OperatorMatrix embed(const OperatorMatrix& op, const SiteList& support,
                     const SiteList& volume, int site_dim) {
  return embed_positions(op, positions_in(support, volume),
                         static_cast<int>(volume.size()), site_dim);
}

}  // namespace ldspin
