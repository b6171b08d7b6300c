#pragma once

// Harmonic measure of a finite set K seen from a start site:
//   H(alpha, beta) = P_alpha(H_K < infinity, S_{H_K} = beta).
// Computed from the Green's function of the walk killed on K (and, when the
// start is not enclosed by K, on leaving a truncation box): the walk enters K
// at beta from a neighbour gamma outside K, so
//   H(alpha, beta) = (1/2d) sum_{gamma ~ beta, gamma not in K} G_killed(alpha, gamma).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gffx/lattice.hpp"

namespace gffx {

class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HittingOptions {
  /// Initial truncation radius (l-infinity, around the bounding-box center);
  /// 0 selects max(4 diam(K u {alpha}), 32).
  std::int64_t trunc_radius = 0;
  /// Doubling stops once no weight moves by more than this.
  double weight_tol = 1e-6;
  /// Largest number of sites a truncated component may have.
  std::size_t site_budget = 3'000'000;
  double cg_tol = 1e-13;
};

struct HittingDistribution {
  LatticePoint start;
  SiteSet targets;
  std::vector<double> weights;
  double defect = 0.0;
  /// True when the component of `start` in Z^d \ K is finite, in which case
  /// no truncation was needed and the result is exact up to solver tolerance.
  bool enclosed = false;
  std::int64_t trunc_radius = 0;
  /// Largest weight change in the last radius doubling (0 when enclosed).
  double truncation_change = 0.0;
  bool converged = true;

  double total_mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

/// Connected region of (box \ K) reachable from a set of seeds, on a dense
/// grid over the l-infinity box of radius R around `center`. The walk is
/// killed on entering K or on stepping out of the box.
class KilledRegion {
 public:
  KilledRegion(const SiteLookup& k, const SiteSet& seeds, const LatticePoint& center, std::int64_t radius,
               std::size_t budget)
      : dim_(center.dim()), center_(center), radius_(radius), side_(2 * radius + 1) {
    if (seeds.empty()) throw std::invalid_argument("killed region needs at least one seed");
    std::size_t cells = 1;
    stride_.assign(dim_, 0);
    for (std::size_t j = dim_; j-- > 0;) {
      stride_[j] = cells;
      cells *= static_cast<std::size_t>(side_);
      if (cells > budget) throw TruncationError("truncation box exceeds site budget of " + std::to_string(budget));
    }
    cell_state_.assign(cells, kFree);
    for (const auto& q : k) {
      if (auto c = cell_of(q)) cell_state_[*c] = kBlocked;
    }
    slot_.assign(cells, kNone32);

    std::deque<std::uint32_t> queue;
    for (const auto& s : seeds) {
      if (k.contains(s)) continue;
      auto c = cell_of(s);
      if (!c) throw TruncationError("start site " + s.to_string() + " outside truncation box");
      if (slot_[*c] == kNone32) {
        slot_[*c] = static_cast<std::uint32_t>(cells_.size());
        cells_.push_back(static_cast<std::uint32_t>(*c));
        queue.push_back(static_cast<std::uint32_t>(*c));
      }
    }
    std::vector<std::int64_t> coord(dim_);
    while (!queue.empty()) {
      const std::size_t c = queue.front();
      queue.pop_front();
      decode(c, coord);
      for (std::size_t j = 0; j < dim_; ++j) {
        for (int sgn : {1, -1}) {
          const std::int64_t cj = coord[j] + sgn;
          if (cj < 0 || cj >= side_) {
            touches_box_ = true;
            continue;
          }
          const std::size_t nc = sgn > 0 ? c + stride_[j] : c - stride_[j];
          if (cell_state_[nc] == kBlocked || slot_[nc] != kNone32) continue;
          slot_[nc] = static_cast<std::uint32_t>(cells_.size());
          cells_.push_back(static_cast<std::uint32_t>(nc));
          queue.push_back(static_cast<std::uint32_t>(nc));
        }
      }
    }
    const std::size_t deg = 2 * dim_;
    nbr_.assign(cells_.size() * deg, kNone32);
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      decode(cells_[i], coord);
      for (std::size_t j = 0; j < dim_; ++j) {
        if (coord[j] + 1 < side_) nbr_[i * deg + 2 * j] = slot_[cells_[i] + stride_[j]];
        if (coord[j] > 0) nbr_[i * deg + 2 * j + 1] = slot_[cells_[i] - stride_[j]];
      }
    }
  }

  std::size_t size() const { return cells_.size(); }
  bool touches_box() const { return touches_box_; }
  std::int64_t radius() const { return radius_; }

  std::optional<std::size_t> find(const LatticePoint& p) const {
    auto c = cell_of(p);
    if (!c || slot_[*c] == kNone32) return std::nullopt;
    return slot_[*c];
  }

  LatticePoint site(std::size_t i) const {
    std::vector<std::int64_t> coord(dim_);
    decode(cells_[i], coord);
    for (std::size_t j = 0; j < dim_; ++j) coord[j] += center_[j] - radius_;
    return LatticePoint(std::move(coord));
  }

  /// y = (I - P_region) x
  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    const std::size_t deg = 2 * dim_;
    const double step = 1.0 / static_cast<double>(deg);
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      double acc = 0.0;
      const std::uint32_t* nb = &nbr_[i * deg];
      for (std::size_t e = 0; e < deg; ++e)
        if (nb[e] != kNone32) acc += x[nb[e]];
      y[i] = x[i] - step * acc;
    }
  }

  /// Conjugate gradients for (I - P_region) x = b; the operator is SPD.
  std::vector<double> solve(const std::vector<double>& b, double rel_tol) const {
    const std::size_t n = size();
    std::vector<double> x(n, 0.0), r(b), p(b), ap(n);
    double rr = dot(r, r);
    const double stop = rel_tol * rel_tol * rr;
    for (std::size_t it = 0; it < 20 * n + 100 && rr > stop; ++it) {
      apply(p, ap);
      const double alpha = rr / dot(p, ap);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      const double rr_new = dot(r, r);
      const double beta = rr_new / rr;
      rr = rr_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    if (rr > 1e6 * stop) throw std::runtime_error("conjugate gradients did not converge");
    return x;
  }

  /// G_region(start, .) as a vector over region sites.
  std::vector<double> green_row(const LatticePoint& start, double rel_tol) const {
    auto i = find(start);
    if (!i) throw std::invalid_argument("site " + start.to_string() + " not in killed region");
    std::vector<double> b(size(), 0.0);
    b[*i] = 1.0;
    return solve(b, rel_tol);
  }

  /// Harmonic measure on `targets` from a Green row of this region.
  std::vector<double> entrance_weights(const std::vector<double>& green_row, const SiteSet& targets) const {
    const double step = 1.0 / static_cast<double>(2 * dim_);
    std::vector<double> w(targets.size(), 0.0);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      double acc = 0.0;
      for (auto& q : neighbors(targets[t])) {
        if (auto i = find(q)) acc += green_row[*i];
      }
      w[t] = step * acc;
    }
    return w;
  }

 private:
  std::optional<std::size_t> cell_of(const LatticePoint& p) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const std::int64_t o = p[j] - center_[j] + radius_;
      if (o < 0 || o >= side_) return std::nullopt;
      c += static_cast<std::size_t>(o) * stride_[j];
    }
    return c;
  }

  void decode(std::size_t c, std::vector<std::int64_t>& coord) const {
    for (std::size_t j = 0; j < dim_; ++j) {
      coord[j] = static_cast<std::int64_t>(c / stride_[j]);
      c %= stride_[j];
    }
  }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }

  static constexpr std::uint8_t kFree = 0;
  static constexpr std::uint8_t kBlocked = 1;
  static constexpr std::uint32_t kNone32 = static_cast<std::uint32_t>(-1);
  std::size_t dim_;
  LatticePoint center_;
  std::int64_t radius_;
  std::int64_t side_;
  std::vector<std::size_t> stride_;
  std::vector<std::uint8_t> cell_state_;
  std::vector<std::uint32_t> slot_;
  std::vector<std::uint32_t> cells_;
  std::vector<std::uint32_t> nbr_;
  bool touches_box_ = false;
};

namespace detail {

inline LatticePoint bounding_center(const SiteSet& pts) {
  const std::size_t d = pts.front().dim();
  LatticePoint c(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                        [j](const LatticePoint& a, const LatticePoint& b) { return a[j] < b[j]; });
    c[j] = ((*lo)[j] + (*hi)[j]) / 2;
  }
  return c;
}

inline std::int64_t reach_from(const LatticePoint& c, const SiteSet& pts) {
  std::int64_t r = 0;
  for (const auto& p : pts) r = std::max(r, (p - c).norm_inf());
  return r;
}

}  // namespace detail

/// Hitting distribution of K from each start in `starts`, sharing one killed
/// region. Enclosed starts are solved exactly; otherwise the truncation
/// radius doubles until the weights settle or the site budget is reached.
inline std::vector<HittingDistribution> hitting_distributions(const SiteSet& starts, const SiteSet& k,
                                                              const HittingOptions& opt = {}) {
  if (k.empty()) throw std::invalid_argument("target set K must be nonempty");
  if (starts.empty()) return {};
  const std::size_t d = k.front().dim();
  for (const auto& s : starts)
    if (s.dim() != d) throw std::invalid_argument("dimension mismatch between start and K");
  const SiteLookup klook(k.begin(), k.end());

  std::vector<HittingDistribution> out(starts.size());
  SiteSet free_starts;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    out[i].start = starts[i];
    out[i].targets = k;
    out[i].weights.assign(k.size(), 0.0);
    if (klook.contains(starts[i])) {
      const auto pos = static_cast<std::size_t>(std::find(k.begin(), k.end(), starts[i]) - k.begin());
      out[i].weights[pos] = 1.0;
      out[i].enclosed = true;
    } else {
      free_starts.push_back(starts[i]);
    }
  }
  if (free_starts.empty()) return out;

  SiteSet all = k;
  all.insert(all.end(), free_starts.begin(), free_starts.end());
  const LatticePoint center = detail::bounding_center(all);
  const std::int64_t reach = detail::reach_from(center, all);
  std::int64_t radius = opt.trunc_radius > 0 ? opt.trunc_radius : std::max<std::int64_t>(4 * linf_diameter(all), 32);
  if (radius <= reach)
    throw TruncationError("truncation radius " + std::to_string(radius) + " does not keep K and the start interior");

  // Enclosure test: a component that never reaches the box edge is finite and solved exactly.
  std::vector<bool> solved(starts.size(), false), open(starts.size(), false);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (out[i].enclosed || open[i]) continue;
    std::optional<KilledRegion> region;
    region.emplace(klook, SiteSet{starts[i]}, center, radius, opt.site_budget);
    if (region->touches_box()) {
      for (std::size_t j = i; j < starts.size(); ++j)
        if (region->find(starts[j])) open[j] = true;
      continue;
    }
    // every other start in the same finite component shares this region
    for (std::size_t j = i; j < starts.size(); ++j) {
      if (solved[j] || out[j].enclosed) continue;
      if (!region->find(starts[j])) continue;
      const auto row = region->green_row(starts[j], opt.cg_tol);
      out[j].weights = region->entrance_weights(row, k);
      out[j].enclosed = true;
      out[j].trunc_radius = 0;
      out[j].defect = std::max(0.0, 1.0 - out[j].total_mass());
      solved[j] = true;
    }
  }

  SiteSet open_starts;
  std::vector<std::size_t> open_index;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!out[i].enclosed && !solved[i]) {
      open_starts.push_back(starts[i]);
      open_index.push_back(i);
    }
  }
  if (open_starts.empty()) return out;

  std::vector<std::vector<double>> prev;
  double change = std::numeric_limits<double>::infinity();
  std::int64_t used_radius = radius;
  for (std::int64_t r = radius;; r *= 2) {
    double box_sites = 1.0;
    for (std::size_t j = 0; j < d; ++j) box_sites *= static_cast<double>(2 * r + 1);
    if (box_sites > static_cast<double>(opt.site_budget)) {
      if (prev.empty()) throw TruncationError("initial truncation box exceeds the site budget");
      break;
    }
    KilledRegion region(klook, open_starts, center, r, opt.site_budget);
    std::vector<std::vector<double>> cur;
    for (const auto& s : open_starts) cur.push_back(region.entrance_weights(region.green_row(s, opt.cg_tol), k));
    if (!prev.empty()) {
      change = 0.0;
      for (std::size_t i = 0; i < cur.size(); ++i)
        for (std::size_t t = 0; t < k.size(); ++t) change = std::max(change, std::abs(cur[i][t] - prev[i][t]));
    }
    prev = std::move(cur);
    used_radius = r;
    if (change < opt.weight_tol) break;
  }
  for (std::size_t i = 0; i < open_starts.size(); ++i) {
    auto& h = out[open_index[i]];
    h.weights = prev[i];
    h.trunc_radius = used_radius;
    h.truncation_change = std::isfinite(change) ? change : 1.0;
    h.converged = change < opt.weight_tol;
    h.defect = std::max(0.0, 1.0 - h.total_mass());
  }
  return out;
}

inline HittingDistribution hitting_distribution(const LatticePoint& start, const SiteSet& k,
                                                const HittingOptions& opt = {}) {
  return hitting_distributions(SiteSet{start}, k, opt).front();
}

}  // namespace gffx
