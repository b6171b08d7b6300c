#pragma once

// Centering/scaling for maxima over N sites with per-site variance g(0),
// the Gumbel target, and the finite-N diagnostics built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gffx/lattice.hpp"
#include "gffx/sampler.hpp"
#include "gffx/stats.hpp"

namespace gffx {

struct ScalingConstants {
  double n_sites;
  double g0;
  double b;
  double a;
};

/// b_N = sqrt(g0) [sqrt(2 log N) - (log log N + log 4 pi) / (2 sqrt(2 log N))],  a_N = g0 / b_N.
inline ScalingConstants scaling_constants(double n_sites, double g0) {
  if (!(n_sites > 2.0)) throw std::invalid_argument("scaling constants need N >= 3");
  if (!(g0 > 0.0)) throw std::invalid_argument("scaling constants need g0 > 0");
  const double l = std::log(n_sites);
  const double s = std::sqrt(2.0 * l);
  const double b = std::sqrt(g0) * (s - (std::log(l) + std::log(4.0 * std::numbers::pi)) / (2.0 * s));
  return {n_sites, g0, b, g0 / b};
}

/// u_N(z) = a_N z + b_N
inline double threshold(const ScalingConstants& sc, double z) { return sc.a * z + sc.b; }

inline double gumbel_cdf(double z) { return std::exp(-std::exp(-z)); }

struct MillsBounds {
  double lower;
  double upper;
};

/// (1 - 1/t^2) phi(t)/t <= P(N(0,1) > t) <= phi(t)/t for t > 0.
inline MillsBounds mills_bounds(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("Mills ratio bounds need t > 0");
  const double upper = normal_pdf(t) / t;
  return {(1.0 - 1.0 / (t * t)) * upper, upper};
}

/// Mills upper bound clipped to a probability; 1 when t <= 0.
inline double mills_upper_probability(double t) { return t > 0.0 ? std::min(1.0, normal_pdf(t) / t) : 1.0; }

struct MaxStatistic {
  double raw_max;
  double rescaled;
  double n_sites;
  Law law;
};

inline MaxStatistic rescaled_max(std::span<const double> values, const ScalingConstants& sc,
                                 Law law = Law::InfiniteWindow) {
  if (values.empty()) throw std::invalid_argument("rescaled max of an empty field");
  const double m = *std::max_element(values.begin(), values.end());
  return {m, (m - sc.b) / sc.a, sc.n_sites, law};
}

inline MaxStatistic rescaled_max(const FieldSample& field, const ScalingConstants& sc) {
  return rescaled_max(field.values, sc, field.law);
}

struct TypeRatios {
  double a_ratio;
  double b_shift;
  /// d log(1 - 2 delta), the N -> infinity limit of b_shift.
  double b_shift_limit;
};

/// Convergence-of-types quantities for m_N = (1 - 2 delta)^d N:
/// a_{m_N}/a_N -> 1 and (b_{m_N} - b_N)/a_N -> d log(1 - 2 delta).
inline TypeRatios cot_ratios(double n_sites, double delta, std::size_t d, double g0) {
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("cot_ratios needs 0 < delta < 1/2");
  const double dd = static_cast<double>(d);
  const double m = std::pow(1.0 - 2.0 * delta, dd) * n_sites;
  if (!(m >= 3.0)) throw std::invalid_argument("cot_ratios needs m_N >= 3");
  const auto full = scaling_constants(n_sites, g0);
  const auto bulk = scaling_constants(m, g0);
  return {bulk.a / full.a, (bulk.b - full.b) / full.a, dd * std::log(1.0 - 2.0 * delta)};
}

struct LlnEstimate {
  double ratio;
  double standard_error;
  std::size_t samples;
};

/// E[max] / sqrt(2 g0 log N) from sampled maxima.
inline LlnEstimate lln_ratio(std::span<const double> maxima, double n_sites, double g0) {
  if (maxima.size() < 100) throw std::invalid_argument("LLN estimate needs at least 100 maxima");
  if (!(n_sites > 1.0)) throw std::invalid_argument("LLN estimate needs N > 1");
  Welford acc;
  for (double m : maxima) acc.add(m);
  const double scale = std::sqrt(2.0 * g0 * std::log(n_sites));
  return {acc.mean() / scale, acc.standard_error() / scale, maxima.size()};
}

/// Bulk of the box: sites at l-infinity distance > delta * n from every site
/// outside it. Coordinate-wise this is floor(delta n) <= alpha_j <= n - 1 - floor(delta n),
/// so the bulk has exactly (n - 2 floor(delta n))^d sites.
inline SiteSet bulk(const BoxDomain& box, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("bulk needs 0 < delta < 1/2");
  const double cut = delta * static_cast<double>(box.side());
  SiteSet out;
  for (std::size_t i = 0; i < box.size(); ++i) {
    auto p = box.point(i);
    if (static_cast<double>(box.distance_to_complement(p)) > cut) out.push_back(std::move(p));
  }
  if (out.empty())
    throw std::invalid_argument("bulk of box side " + std::to_string(box.side()) + " at delta " +
                                std::to_string(delta) + " is empty");
  return out;
}

}  // namespace gffx
