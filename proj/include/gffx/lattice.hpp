#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace gffx {

/// A site of the integer lattice Z^d.
class LatticePoint {
 public:
  LatticePoint() = default;
  explicit LatticePoint(std::size_t dim) : coords_(dim, 0) {}
  explicit LatticePoint(std::vector<std::int64_t> coords) : coords_(std::move(coords)) {}
  LatticePoint(std::initializer_list<std::int64_t> coords) : coords_(coords) {}

  static LatticePoint unit(std::size_t dim, std::size_t axis, std::int64_t scale = 1) {
    LatticePoint p(dim);
    p.coords_.at(axis) = scale;
    return p;
  }

  std::size_t dim() const { return coords_.size(); }
  std::int64_t operator[](std::size_t i) const { return coords_[i]; }
  std::int64_t& operator[](std::size_t i) { return coords_[i]; }
  const std::vector<std::int64_t>& coords() const { return coords_; }

  LatticePoint operator+(const LatticePoint& o) const {
    LatticePoint r(*this);
    for (std::size_t i = 0; i < dim(); ++i) r.coords_[i] += o.coords_[i];
    return r;
  }
  LatticePoint operator-(const LatticePoint& o) const {
    LatticePoint r(*this);
    for (std::size_t i = 0; i < dim(); ++i) r.coords_[i] -= o.coords_[i];
    return r;
  }
  bool operator==(const LatticePoint&) const = default;
  auto operator<=>(const LatticePoint&) const = default;

  std::int64_t norm_inf() const {
    std::int64_t m = 0;
    for (auto c : coords_) m = std::max<std::int64_t>(m, std::llabs(c));
    return m;
  }
  std::int64_t norm_1() const {
    std::int64_t s = 0;
    for (auto c : coords_) s += std::llabs(c);
    return s;
  }
  double norm_2() const {
    double s = 0;
    for (auto c : coords_) s += static_cast<double>(c) * static_cast<double>(c);
    return std::sqrt(s);
  }

  /// Representative of the orbit under signed coordinate permutations:
  /// absolute values sorted in ascending order.
  LatticePoint canonical() const {
    LatticePoint r(*this);
    for (auto& c : r.coords_) c = std::llabs(c);
    std::sort(r.coords_.begin(), r.coords_.end());
    return r;
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < dim(); ++i) {
      if (i) s += ",";
      s += std::to_string(coords_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<std::int64_t> coords_;
};

struct LatticePointHash {
  std::size_t operator()(const LatticePoint& p) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (auto c : p.coords()) {
      h ^= static_cast<std::size_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

using SiteSet = std::vector<LatticePoint>;
template <typename T>
using SiteMap = std::unordered_map<LatticePoint, T, LatticePointHash>;
using SiteLookup = std::unordered_set<LatticePoint, LatticePointHash>;

inline void require_dimension(std::size_t d) {
  if (d < 3) {
    throw std::invalid_argument("dimension must be >= 3 (the lattice Green's function diverges for d <= 2), got " +
                                std::to_string(d));
  }
}

/// The 2d nearest neighbours of p, ordered +e_1, -e_1, +e_2, ...
inline SiteSet neighbors(const LatticePoint& p) {
  SiteSet out;
  out.reserve(2 * p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    for (int s : {1, -1}) {
      LatticePoint q(p);
      q[i] += s;
      out.push_back(std::move(q));
    }
  }
  return out;
}

/// Sites [0, n-1]^d.
class BoxDomain {
 public:
  BoxDomain(std::size_t dim, std::int64_t side) : dim_(dim), side_(side) {
    if (side < 1) throw std::invalid_argument("box side must be >= 1");
    if (dim < 1) throw std::invalid_argument("box dimension must be >= 1");
  }

  std::size_t dim() const { return dim_; }
  std::int64_t side() const { return side_; }
  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < dim_; ++i) n *= static_cast<std::size_t>(side_);
    return n;
  }

  bool contains(const LatticePoint& p) const {
    for (std::size_t i = 0; i < dim_; ++i)
      if (p[i] < 0 || p[i] >= side_) return false;
    return true;
  }

  /// Row-major index, last coordinate fastest.
  std::size_t index(const LatticePoint& p) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < dim_; ++i) idx = idx * static_cast<std::size_t>(side_) + static_cast<std::size_t>(p[i]);
    return idx;
  }

  LatticePoint point(std::size_t idx) const {
    LatticePoint p(dim_);
    for (std::size_t i = dim_; i-- > 0;) {
      p[i] = static_cast<std::int64_t>(idx % static_cast<std::size_t>(side_));
      idx /= static_cast<std::size_t>(side_);
    }
    return p;
  }

  SiteSet sites() const {
    SiteSet out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(point(i));
    return out;
  }

  /// Sites of the box with a nearest neighbour outside it.
  SiteSet inner_boundary() const {
    SiteSet out;
    for (std::size_t i = 0; i < size(); ++i) {
      auto p = point(i);
      bool edge = false;
      for (std::size_t j = 0; j < dim_; ++j) edge = edge || p[j] == 0 || p[j] == side_ - 1;
      if (edge) out.push_back(std::move(p));
    }
    return out;
  }

  /// Sites outside the box with a nearest neighbour inside it.
  SiteSet outer_boundary() const {
    SiteSet out;
    SiteLookup seen;
    for (std::size_t i = 0; i < size(); ++i) {
      for (auto& q : neighbors(point(i))) {
        if (!contains(q) && seen.insert(q).second) out.push_back(q);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// l-infinity distance from p (inside the box) to the nearest site outside it.
  std::int64_t distance_to_complement(const LatticePoint& p) const {
    std::int64_t m = side_;
    for (std::size_t j = 0; j < dim_; ++j) m = std::min({m, p[j] + 1, side_ - p[j]});
    return m;
  }

 private:
  std::size_t dim_;
  std::int64_t side_;
};

/// All sites with l-infinity norm <= radius around center.
inline SiteSet linf_ball(const LatticePoint& center, std::int64_t radius) {
  const std::size_t d = center.dim();
  BoxDomain cube(d, 2 * radius + 1);
  SiteSet out;
  out.reserve(cube.size());
  for (std::size_t i = 0; i < cube.size(); ++i) {
    auto p = cube.point(i);
    for (std::size_t j = 0; j < d; ++j) p[j] += center[j] - radius;
    out.push_back(std::move(p));
  }
  return out;
}

inline std::int64_t linf_diameter(const SiteSet& sites) {
  std::int64_t diam = 0;
  if (sites.empty()) return 0;
  const std::size_t d = sites.front().dim();
  for (std::size_t j = 0; j < d; ++j) {
    auto [lo, hi] = std::minmax_element(sites.begin(), sites.end(),
                                        [j](const LatticePoint& a, const LatticePoint& b) { return a[j] < b[j]; });
    diam = std::max(diam, (*hi)[j] - (*lo)[j]);
  }
  return diam;
}

}  // namespace gffx
