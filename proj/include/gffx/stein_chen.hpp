#pragma once

// Poisson approximation for the number of threshold exceedances W:
//   d_TV(L(W), Poi(lambda)) <= 2 (b1 + b2 + b3),
//   |P(W = 0) - exp(-lambda)| < min(1, 1/lambda) (b1 + b2 + b3),
// with b1, b2, b3 built from dependence neighbourhoods B_alpha.
//
// Two kinds of evaluators live here: closed-form bounds in N (all o(1)
// terms dropped, explicit counting constants), and instance bounds computed
// from a concrete site set and Green table.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gffx/extremes.hpp"
#include "gffx/green.hpp"
#include "gffx/hitting.hpp"
#include "gffx/lattice.hpp"
#include "gffx/parallel.hpp"
#include "gffx/rng.hpp"
#include "gffx/sampler.hpp"
#include "gffx/stats.hpp"

namespace gffx {

inline constexpr double kDefaultEpsilon = 0.05;

struct ExceedanceProcess {
  std::size_t n_sites;
  double threshold;
  std::vector<std::uint8_t> indicators;
  std::size_t count;
  double p;
  double lambda;
};

/// X_alpha = 1{phi_alpha > u}; p is the common marginal P(N(0, g0) > u).
inline ExceedanceProcess exceedance_process(std::span<const double> values, double u, double g0) {
  if (values.empty()) throw std::invalid_argument("exceedance process of an empty field");
  ExceedanceProcess e{values.size(), u, std::vector<std::uint8_t>(values.size()), 0, 0.0, 0.0};
  for (std::size_t i = 0; i < values.size(); ++i) {
    e.indicators[i] = values[i] > u ? 1 : 0;
    e.count += e.indicators[i];
  }
  e.p = std::isinf(u) ? (u > 0 ? 0.0 : 1.0) : normal_tail(u / std::sqrt(g0));
  e.lambda = static_cast<double>(values.size()) * e.p;
  return e;
}

/// (log N)^{2 + 2 eps}
inline double neighborhood_radius(double n_sites, double eps) {
  if (!(n_sites >= 3.0)) throw std::invalid_argument("neighbourhood radius needs N >= 3");
  if (!(eps > 0.0)) throw std::invalid_argument("neighbourhood radius needs eps > 0");
  return std::pow(std::log(n_sites), 2.0 + 2.0 * eps);
}

/// Upper bound (2 floor(r) + 1)^d on |B_alpha|.
inline double neighborhood_volume_bound(double n_sites, std::size_t d, double eps) {
  return std::pow(2.0 * std::floor(neighborhood_radius(n_sites, eps)) + 1.0, static_cast<double>(d));
}

struct DependenceNeighborhood {
  LatticePoint center;
  double radius;
  double eps;
  /// Indices into the site set A.
  std::vector<std::size_t> members;
};

/// B_alpha = B_inf(alpha, (log N)^{2+2eps}) intersected with A, N = |A|.
inline DependenceNeighborhood neighborhood(std::size_t alpha, const SiteSet& a, double eps) {
  if (alpha >= a.size()) throw std::out_of_range("neighbourhood centre index out of range");
  const double r = neighborhood_radius(static_cast<double>(a.size()), eps);
  const auto reach = static_cast<std::int64_t>(std::min(std::floor(r), 4.0e18));
  DependenceNeighborhood nb{a[alpha], r, eps, {}};
  for (std::size_t j = 0; j < a.size(); ++j)
    if ((a[j] - a[alpha]).norm_inf() <= reach) nb.members.push_back(j);
  return nb;
}

/// Neighbourhood with an explicit radius (instances too small for the
/// (log N)^{2+2eps} radius to be sub-box).
inline DependenceNeighborhood neighborhood_with_radius(std::size_t alpha, const SiteSet& a, std::int64_t radius) {
  DependenceNeighborhood nb{a.at(alpha), static_cast<double>(radius), 0.0, {}};
  for (std::size_t j = 0; j < a.size(); ++j)
    if ((a[j] - a[alpha]).norm_inf() <= radius) nb.members.push_back(j);
  return nb;
}

/// b1 <= N max|B_alpha| (Mills upper(u_N(z)/sqrt g0))^2 with max|B_alpha| <= (2 floor(r)+1)^d.
inline double b1_bound(double n_sites, std::size_t d, double eps, double z, double g0) {
  if (!(n_sites >= 16.0)) throw std::invalid_argument("b1 bound needs N >= 16");
  const double u = threshold(scaling_constants(n_sites, g0), z);
  const double q = mills_upper_probability(u / std::sqrt(g0));
  return n_sites * neighborhood_volume_bound(n_sites, d, eps) * q * q;
}

/// b1 = sum_alpha |B_alpha| p^2 for a concrete instance.
inline double b1_exact(std::span<const DependenceNeighborhood> nbs, double p) {
  double s = 0.0;
  for (const auto& nb : nbs) s += static_cast<double>(nb.members.size()) * p * p;
  return s;
}

struct BivariateGaussianSpec {
  double g0;
  double rho_g;

  double determinant() const { return g0 * g0 - rho_g * rho_g; }
  /// Delta_i = u (1^t Sigma^{-1})_i = u / (g0 + rho_g)
  double delta(double u) const { return u / (g0 + rho_g); }
  /// 1^t Sigma^{-1} 1
  double quad_ones() const { return 2.0 / (g0 + rho_g); }
};

/// Savage's bound P(X > u, Y > u) <= f_Sigma(u 1) / (Delta_1 Delta_2), clipped at 1.
inline double savage_tail_bound(const BivariateGaussianSpec& spec, double u) {
  if (!(spec.g0 > 0.0) || !(std::abs(spec.rho_g) < spec.g0))
    throw std::invalid_argument("bivariate covariance is not positive definite");
  if (!(u > 0.0)) throw std::invalid_argument("Savage bound needs u > 0");
  const double delta = spec.delta(u);
  const double v = std::exp(-0.5 * u * u * spec.quad_ones()) /
                   (2.0 * std::numbers::pi * std::sqrt(spec.determinant()) * delta * delta);
  return std::min(1.0, v);
}

/// Exponent of N in the closed-form b2 bound: -kappa / (2 - kappa).
inline double b2_exponent(double kappa) { return -kappa / (2.0 - kappa); }

/// Closed-form b2 bound
///   (2 floor(r)+1)^d (2-kappa)^{3/2} kappa^{-1/2} N^{-kappa/(2-kappa)} max(e^{-2z} 1{z<=0}, e^{-2z/(2-kappa)} 1{z>0}).
/// The (2 floor(r)+1)^d factor replaces c' (log N)^{d(2+2eps)}.
inline double b2_bound(double n_sites, std::size_t d, double eps, double z, double g0, double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("b2 bound needs kappa in (0, 1)");
  if (!(n_sites >= 16.0)) throw std::invalid_argument("b2 bound needs N >= 16");
  if (!(g0 > 0.0)) throw std::invalid_argument("b2 bound needs g0 > 0");
  const double prefactor = std::pow(2.0 - kappa, 1.5) / std::sqrt(kappa);
  const double zf = z <= 0.0 ? std::exp(-2.0 * z) : std::exp(-2.0 * z / (2.0 - kappa));
  return neighborhood_volume_bound(n_sites, d, eps) * prefactor * std::pow(n_sites, b2_exponent(kappa)) * zf;
}

/// Instance bound N (max|B_alpha| - 1) Savage(rho_max, u), where rho_max is the
/// largest covariance between distinct neighbourhood members.
inline double b2_instance_bound(std::size_t n_sites, std::size_t max_neighborhood, double g0, double rho_max,
                                double u) {
  if (max_neighborhood <= 1) return 0.0;
  return static_cast<double>(n_sites) * static_cast<double>(max_neighborhood - 1) *
         savage_tail_bound({g0, rho_max}, u);
}

/// Sum over alpha and beta in B_alpha \ {alpha} of Savage(g(alpha - beta), u).
inline double b2_pairwise_savage(const SiteSet& a, std::span<const DependenceNeighborhood> nbs,
                                 const GreenTable& green, double u) {
  const double g0 = green.origin();
  double s = 0.0;
  for (std::size_t i = 0; i < nbs.size(); ++i)
    for (std::size_t j : nbs[i].members)
      if (j != i) s += savage_tail_bound({g0, green.between(a[i], a[j])}, u);
  return s;
}

struct DriftVariance {
  /// Var(mu_alpha) = sum_beta P_alpha(S_{H_K} = beta) g(alpha - beta), K = A \ B_alpha.
  double exact;
  /// sup_{beta in A \ B_alpha} g(alpha - beta)
  double bound;
  /// g_{U_alpha}(alpha) = g(0) - Var(mu_alpha)
  double killed_variance;
  HittingDistribution hitting;
};

inline DriftVariance drift_variance_bound(const SiteSet& a, std::size_t alpha, const DependenceNeighborhood& nb,
                                          const GreenTable& green, const HittingOptions& opt = {}) {
  SiteLookup inside;
  for (auto j : nb.members) inside.insert(a[j]);
  SiteSet k;
  for (const auto& s : a)
    if (!inside.contains(s)) k.push_back(s);
  const double g0 = green.origin();
  if (k.empty()) return {0.0, 0.0, g0, HittingDistribution{a[alpha], {}, {}, 1.0, false, 0, 0.0, true}};
  auto h = hitting_distribution(a[alpha], k, opt);
  double exact = 0.0, sup = 0.0;
  for (std::size_t t = 0; t < k.size(); ++t) {
    const double g = green.between(a[alpha], k[t]);
    exact += h.weights[t] * g;
    sup = std::max(sup, g);
  }
  return {exact, sup, g0 - exact, std::move(h)};
}

/// sup_{beta outside B_inf(0, r)} g(beta) in the far-field approximation,
/// attained on the axis at distance floor(r) + 1.
inline double drift_variance_asymptotic(double n_sites, std::size_t d, double eps) {
  const double dist = std::floor(neighborhood_radius(n_sites, eps)) + 1.0;
  return green_far_field_constant(d) * std::pow(dist, 2.0 - static_cast<double>(d));
}

struct B3Surrogate {
  double tail_term;
  double mismatch_exponent;
  double mismatch_term;
  double value;
};

/// N [ exp(-(log N)^{(2d-5)(1+eps)}) + |1 - exp((1 - g0/g_U) u^2/(2 g0))| Mills_upper(u/sqrt g0) ]
/// with g_U = g0 - drift_var. The first term is the drift tail, the second the
/// variance mismatch between the killed and free single-site laws; one absolute
/// value covers both signs of P_U(exceed) - p.
inline B3Surrogate b3_surrogate(double n_sites, std::size_t d, double eps, double z, double g0, double drift_var) {
  require_dimension(d);
  if (!(n_sites >= 3.0)) throw std::invalid_argument("b3 surrogate needs N >= 3");
  if (!(drift_var >= 0.0 && drift_var < g0)) throw std::invalid_argument("b3 surrogate needs 0 <= drift_var < g0");
  const double l = std::log(n_sites);
  const double tail = std::exp(-std::pow(l, (2.0 * static_cast<double>(d) - 5.0) * (1.0 + eps)));
  const double u = threshold(scaling_constants(n_sites, g0), z);
  const double gu = g0 - drift_var;
  const double expo = (1.0 - g0 / gu) * u * u / (2.0 * g0);
  const double mismatch = std::abs(1.0 - std::exp(expo)) * mills_upper_probability(u / std::sqrt(g0));
  return {tail, expo, mismatch, n_sites * (tail + mismatch)};
}

enum class BoundProvenance { Analytic, ExactSmallInstance, Independent };

struct SteinChenBounds {
  double lambda;
  double b1;
  double b2;
  double b3;
  double tv_bound;
  double w0_gap_bound;
  BoundProvenance provenance;

  static SteinChenBounds make(double lambda, double b1, double b2, double b3, BoundProvenance prov) {
    if (b1 < 0 || b2 < 0 || b3 < 0) throw std::invalid_argument("Stein-Chen terms must be nonnegative");
    const double sum = b1 + b2 + b3;
    const double factor = lambda > 0 ? std::min(1.0, 1.0 / lambda) : 1.0;
    return {lambda, b1, b2, b3, 2.0 * sum, factor * sum, prov};
  }
};

struct PoissonGapCheck {
  double empirical_p_w0;
  double poisson_p_w0;
  double gap;
  double bound;
  double ci_radius;
  bool pass;
};

/// |P(W=0) - e^{-lambda}| against the bound; passes when gap - ci_radius <= bound.
inline PoissonGapCheck poisson_gap(const SteinChenBounds& b, double empirical_p_w0, double ci_radius) {
  if (!(b.lambda > 0)) throw std::invalid_argument("poisson gap needs lambda > 0");
  const double target = std::exp(-b.lambda);
  const double gap = std::abs(empirical_p_w0 - target);
  return {empirical_p_w0, target, gap, b.w0_gap_bound, ci_radius, gap - ci_radius <= b.w0_gap_bound};
}

struct SmallOracleResult {
  std::size_t trials;
  double p_w0;
  Interval p_w0_ci;
  double mean_w;
  double mean_w_ci_radius;
  /// E[X_alpha X_beta]; diagonal holds P(X_alpha = 1).
  Eigen::MatrixXd joint;
  Eigen::MatrixXd joint_ci_radius;
};

inline constexpr std::size_t kSmallOracleMaxSites = 12;
inline constexpr std::size_t kSmallOracleMinBudget = 10'000;

/// Monte Carlo ground truth on |A| <= 12 sites from exact Cholesky samples.
inline SmallOracleResult exact_small_oracle(const SiteSet& a, double u, const GreenTable& green, std::size_t mc_budget,
                                            std::uint64_t seed, std::size_t workers = 1) {
  if (a.empty() || a.size() > kSmallOracleMaxSites)
    throw std::invalid_argument("small oracle needs 1..12 sites, got " + std::to_string(a.size()));
  if (mc_budget < kSmallOracleMinBudget) throw std::invalid_argument("small oracle budget must be >= 10^4");
  const InfiniteWindowSampler sampler(a, green);
  const std::size_t n = a.size();
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (mc_budget + kChunk - 1) / kChunk;
  struct Tally {
    std::size_t zero = 0;
    Welford w;
    std::vector<std::size_t> pair;
  };
  auto tallies = parallel_map<Tally>(chunks, workers, [&](std::size_t c) {
    Tally t;
    t.pair.assign(n * n, 0);
    Eigen::VectorXd v;
    const std::size_t begin = c * kChunk, end = std::min(mc_budget, begin + kChunk);
    std::vector<std::uint8_t> x(n);
    for (std::size_t rep = begin; rep < end; ++rep) {
      RandomStream rng(seed, rep);
      sampler.draw(rng, v);
      std::size_t w = 0;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = v(static_cast<Eigen::Index>(i)) > u ? 1 : 0;
        w += x[i];
      }
      if (w == 0) ++t.zero;
      t.w.add(static_cast<double>(w));
      for (std::size_t i = 0; i < n; ++i)
        if (x[i])
          for (std::size_t j = 0; j < n; ++j) t.pair[i * n + j] += x[j];
    }
    return t;
  });
  Tally total;
  total.pair.assign(n * n, 0);
  for (const auto& t : tallies) {
    total.zero += t.zero;
    total.w.merge(t.w);
    for (std::size_t i = 0; i < n * n; ++i) total.pair[i] += t.pair[i];
  }
  SmallOracleResult r;
  r.trials = mc_budget;
  r.p_w0 = static_cast<double>(total.zero) / static_cast<double>(mc_budget);
  r.p_w0_ci = wilson_interval(total.zero, mc_budget);
  r.mean_w = total.w.mean();
  r.mean_w_ci_radius = kZ99 * total.w.standard_error();
  const auto ni = static_cast<Eigen::Index>(n);
  r.joint = Eigen::MatrixXd(ni, ni);
  r.joint_ci_radius = Eigen::MatrixXd(ni, ni);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto ci = wilson_interval(total.pair[i * n + j], mc_budget);
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      r.joint(ii, jj) = static_cast<double>(total.pair[i * n + j]) / static_cast<double>(mc_budget);
      r.joint_ci_radius(ii, jj) = std::max(r.joint(ii, jj) - ci.low, ci.high - r.joint(ii, jj));
    }
  return r;
}

}  // namespace gffx
