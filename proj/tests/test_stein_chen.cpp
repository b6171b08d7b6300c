#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gffx/extremes.hpp"
#include "gffx/green.hpp"
#include "gffx/sampler.hpp"
#include "gffx/stein_chen.hpp"

using namespace gffx;

namespace {

const GreenTable& table() {
  static const GreenTable g(3, 8, 1e-11);
  return g;
}

double g0() { return table().origin(); }

}  // namespace

TEST(Exceedance, InfiniteThresholds) {
  const std::vector<double> v{0.1, -3.0, 7.0};
  const double inf = std::numeric_limits<double>::infinity();
  const auto none = exceedance_process(v, inf, 1.5);
  EXPECT_EQ(none.count, 0u);
  EXPECT_DOUBLE_EQ(none.p, 0.0);
  const auto all = exceedance_process(v, -inf, 1.5);
  EXPECT_EQ(all.count, 3u);
  EXPECT_DOUBLE_EQ(all.lambda, 3.0);
  const auto mid = exceedance_process(v, 0.0, 1.5);
  EXPECT_EQ(mid.count, 2u);
  EXPECT_EQ(mid.indicators, (std::vector<std::uint8_t>{1, 0, 1}));
  EXPECT_THROW(exceedance_process(std::vector<double>{}, 0.0, 1.0), std::invalid_argument);
}

TEST(Exceedance, MeanCountNearOneAtCentring) {
  const BoxDomain box(3, 16);
  const GreenTable g(3, 15, 1e-10);
  const InfiniteWindowSampler s(box.sites(), g);
  const double n = static_cast<double>(box.size());
  const double u = threshold(scaling_constants(n, g.origin()), 0.0);
  const Eigen::Index cols = 250;
  Welford w;
  RandomStream rng(301, 0);
  for (int batch = 0; batch < 40; ++batch) {
    Eigen::MatrixXd xi(s.factor().rows(), cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < xi.rows(); ++r) xi(r, c) = rng.normal();
    const Eigen::MatrixXd phi = s.factor().triangularView<Eigen::Lower>() * xi;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::vector<double> col(phi.col(c).data(), phi.col(c).data() + phi.rows());
      w.add(static_cast<double>(exceedance_process(col, u, g.origin()).count));
    }
  }
  EXPECT_EQ(w.count(), 10'000u);
  EXPECT_NEAR(w.mean(), 1.0, 0.15);
  EXPECT_NEAR(w.mean(), n * normal_tail(u / std::sqrt(g.origin())), 3 * w.standard_error());
}

TEST(Neighborhood, InteriorCornerAndCovering) {
  const BoxDomain box(3, 41);
  const auto a = box.sites();
  const auto centre = neighborhood_with_radius(box.index(LatticePoint({20, 20, 20})), a, 5);
  EXPECT_EQ(centre.members.size(), 1331u);
  const auto full = neighborhood_with_radius(box.index(LatticePoint({20, 20, 20})), a, 20);
  const auto corner = neighborhood_with_radius(0, a, 20);
  EXPECT_EQ(full.members.size(), box.size());
  EXPECT_NEAR(static_cast<double>(corner.members.size()) / static_cast<double>(full.members.size()), 0.125, 0.0125);

  const auto small = BoxDomain(3, 6).sites();
  for (std::size_t i : {std::size_t{0}, std::size_t{100}}) {
    const auto nb = neighborhood(i, small, kDefaultEpsilon);
    EXPECT_EQ(nb.members.size(), small.size());
    EXPECT_NE(std::find(nb.members.begin(), nb.members.end(), i), nb.members.end());
    EXPECT_LE(static_cast<double>(nb.members.size()), neighborhood_volume_bound(216, 3, kDefaultEpsilon));
  }
  EXPECT_THROW(neighborhood(216, small, kDefaultEpsilon), std::out_of_range);
  EXPECT_THROW(neighborhood_radius(100, 0.0), std::invalid_argument);
}

TEST(B1, DecreasesInN) {
  double prev = INFINITY;
  for (double n : {1e3, 1e4, 1e5}) {
    const double b = b1_bound(n, 3, 0.05, 0.0, g0());
    EXPECT_GT(b, 0.0);
    EXPECT_LT(b, prev);
    prev = b;
  }
  EXPECT_LT(b1_bound(1e4, 3, 0.05, 40.0, g0()), 1e-10);
  EXPECT_THROW(b1_bound(15, 3, 0.05, 0.0, g0()), std::invalid_argument);
}

TEST(B1, ExactBelowBoundOnSixCube) {
  const auto a = BoxDomain(3, 6).sites();
  const double n = static_cast<double>(a.size());
  std::vector<DependenceNeighborhood> nbs;
  for (std::size_t i = 0; i < a.size(); ++i) nbs.push_back(neighborhood(i, a, kDefaultEpsilon));
  const double u = threshold(scaling_constants(n, g0()), 0.0);
  const double p = normal_tail(u / std::sqrt(g0()));
  const double exact = b1_exact(nbs, p);
  EXPECT_NEAR(exact, n * n * p * p, 1e-12);
  EXPECT_LE(exact, b1_bound(n, 3, kDefaultEpsilon, 0.0, g0()));
}

TEST(Savage, IndependentCaseIsProductOfMills) {
  for (double u : {2.0, 3.0, 4.5}) {
    const double m = mills_bounds(u / std::sqrt(g0())).upper;
    EXPECT_NEAR(savage_tail_bound({g0(), 0.0}, u), m * m, 1e-14 * m * m);
    EXPECT_NEAR(savage_tail_bound({g0(), 0.0}, u), g0() * std::exp(-u * u / g0()) / (2 * std::numbers::pi * u * u),
                1e-15);
  }
}

TEST(Savage, MonotoneInCorrelationAndClamped) {
  const double u = 3.0;
  double prev = 0.0;
  for (double rho : {-0.5, 0.0, 0.3, 0.8, 1.2, 1.5}) {
    const double b = savage_tail_bound({g0(), rho}, u);
    EXPECT_GE(b, prev);
    EXPECT_LE(b, 1.0);
    prev = b;
  }
  EXPECT_DOUBLE_EQ(savage_tail_bound({g0(), g0() * (1 - 1e-14)}, u), 1.0);
  EXPECT_THROW(savage_tail_bound({g0(), g0()}, u), std::invalid_argument);
  EXPECT_THROW(savage_tail_bound({g0(), 0.1}, 0.0), std::invalid_argument);
  EXPECT_THROW(savage_tail_bound({0.0, 0.0}, 1.0), std::invalid_argument);
}

TEST(Savage, AboveBivariateMonteCarlo) {
  const double rho = table()(LatticePoint::unit(3, 0));
  const double u = threshold(scaling_constants(1e4, g0()), 0.0);
  const double sd = std::sqrt(g0());
  const double r = rho / g0();
  const double c = std::sqrt(1 - r * r);
  RandomStream rng(302, 0);
  const std::size_t trials = 10'000'000;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const double z1 = rng.normal(), z2 = rng.normal();
    if (sd * z1 > u && sd * (r * z1 + c * z2) > u) ++hits;
  }
  const auto ci = wilson_interval(hits, trials);
  const double estimate = static_cast<double>(hits) / static_cast<double>(trials);
  EXPECT_GT(hits, 0u);
  EXPECT_GE(savage_tail_bound({g0(), rho}, u), ci.low);
  EXPECT_LT(estimate, 2 * savage_tail_bound({g0(), rho}, u));

  // P = int_{t}^inf phi(x) Pbar((t - r x) / c) dx, t = u / sd, by the trapezoid rule
  const double t = u / sd, h = 1e-4;
  double exact = 0.0;
  for (int i = 0; i <= 100'000; ++i) {
    const double x = t + i * h;
    const double f = normal_pdf(x) * normal_tail((t - r * x) / c);
    exact += (i == 0 || i == 100'000 ? 0.5 : 1.0) * f * h;
  }
  EXPECT_TRUE(ci.contains(exact)) << exact;
  EXPECT_GE(savage_tail_bound({g0(), rho}, u), exact);
}

TEST(B2, BranchesMeetAtZeroAndExponentIsNegative) {
  const double k = 1.0 / g0();
  const double at0 = b2_bound(1e6, 3, 0.05, 0.0, g0(), k);
  EXPECT_NEAR(b2_bound(1e6, 3, 0.05, 1e-12, g0(), k), at0, 1e-9 * at0);
  EXPECT_NEAR(b2_bound(1e6, 3, 0.05, -1e-12, g0(), k), at0, 1e-9 * at0);
  for (double kappa : {0.01, 0.5, 1.0 / g0(), 0.99}) EXPECT_LT(b2_exponent(kappa), 0.0);
  EXPECT_THROW(b2_bound(1e6, 3, 0.05, 0.0, g0(), 1.0), std::invalid_argument);
}

TEST(B2, EventuallyDecreasing) {
  // the polylog volume factor wins below N ~ 4e5 in d = 3, so the grid starts above that
  const double k = 1.0 / g0();
  double prev = INFINITY;
  for (double n : {1e8, 1e10, 1e12, 1e14}) {
    const double b = b2_bound(n, 3, 0.05, 0.0, g0(), k);
    EXPECT_LT(b, prev);
    prev = b;
  }
  EXPECT_LT(b2_bound(1e200, 3, 0.05, 0.0, g0(), k), 1e-10);
}

TEST(B2, ExactBelowInstanceBoundOnFiveCube) {
  const auto a = BoxDomain(3, 5).sites();
  const std::size_t n = a.size();
  const double u = threshold(scaling_constants(static_cast<double>(n), g0()), 0.0);
  const InfiniteWindowSampler s(a, table());
  // sum over ordered pairs alpha != beta of X_alpha X_beta is W (W - 1)
  Welford pairs;
  RandomStream rng(303, 0);
  Eigen::VectorXd v;
  for (int i = 0; i < 1'000'000; ++i) {
    s.draw(rng, v);
    const auto w = static_cast<double>((v.array() > u).count());
    pairs.add(w * (w - 1));
  }
  std::vector<DependenceNeighborhood> nbs;
  for (std::size_t i = 0; i < n; ++i) nbs.push_back(neighborhood(i, a, kDefaultEpsilon));
  const double rho_max = table()(LatticePoint::unit(3, 0));
  const double instance = b2_instance_bound(n, n, g0(), rho_max, u);
  EXPECT_LE(pairs.mean() - kZ99 * pairs.standard_error(), instance);
  EXPECT_LE(pairs.mean() - kZ99 * pairs.standard_error(), b2_pairwise_savage(a, nbs, table(), u));
  EXPECT_LE(b2_pairwise_savage(a, nbs, table(), u), instance);
  EXPECT_DOUBLE_EQ(b2_instance_bound(n, 1, g0(), rho_max, u), 0.0);
}

TEST(DriftVariance, ZeroWhenNeighbourhoodCoversA) {
  const auto a = BoxDomain(3, 4).sites();
  const auto nb = neighborhood(5, a, kDefaultEpsilon);
  const auto dv = drift_variance_bound(a, 5, nb, table());
  EXPECT_DOUBLE_EQ(dv.exact, 0.0);
  EXPECT_DOUBLE_EQ(dv.killed_variance, g0());
}

TEST(DriftVariance, ExactBelowSupAndMatchesMonteCarlo) {
  const BoxDomain box(3, 8);
  const auto a = box.sites();
  const std::size_t alpha = box.index(LatticePoint({4, 4, 4}));
  const auto nb = neighborhood_with_radius(alpha, a, 1);
  const auto dv = drift_variance_bound(a, alpha, nb, table());
  ASSERT_TRUE(dv.hitting.enclosed);
  EXPECT_GT(dv.exact, 0.0);
  EXPECT_LE(dv.exact, dv.bound);
  EXPECT_NEAR(dv.killed_variance, g0() - dv.exact, 1e-15);

  SiteSet k;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::find(nb.members.begin(), nb.members.end(), i) == nb.members.end()) k.push_back(a[i]);
  const InfiniteWindowSampler outer(k, table());
  const ConditionalSampler cond(k, SiteSet{a[alpha]}, table());
  RandomStream rng(304, 0);
  Welford sq;
  Eigen::VectorXd kv;
  for (int i = 0; i < 20'000; ++i) {
    outer.draw(rng, kv);
    const double m = cond.drift(kv)(0);
    sq.add(m * m);
  }
  EXPECT_NEAR(sq.mean(), dv.exact, 3 * sq.standard_error());
}

TEST(B3, NoDriftLeavesTailTermOnly) {
  const auto s = b3_surrogate(1e6, 3, 0.05, 0.0, g0(), 0.0);
  EXPECT_DOUBLE_EQ(s.mismatch_term, 0.0);
  EXPECT_DOUBLE_EQ(s.value, 1e6 * s.tail_term);
  EXPECT_THROW(b3_surrogate(1e6, 3, 0.05, 0.0, g0(), g0()), std::invalid_argument);
  EXPECT_THROW(b3_surrogate(1e6, 2, 0.05, 0.0, g0(), 0.0), std::invalid_argument);
}

TEST(B3, DecreasesInN) {
  double prev = INFINITY;
  for (double n : {1e4, 1e6, 1e8}) {
    const double v = b3_surrogate(n, 3, 0.05, 0.0, g0(), drift_variance_asymptotic(n, 3, 0.05)).value;
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(PoissonGap, IndependentBernoulliWithinB1) {
  const std::size_t n = 1000, reps = 100'000;
  for (double lambda : {0.5, 2.0}) {
    const double p = lambda / static_cast<double>(n);
    RandomStream rng(305, static_cast<std::uint64_t>(lambda * 10));
    std::size_t zeros = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) any |= rng.uniform() < p;
      zeros += any ? 0 : 1;
    }
    const double ph = static_cast<double>(zeros) / static_cast<double>(reps);
    const double se = std::sqrt(ph * (1 - ph) / static_cast<double>(reps));
    const auto b = SteinChenBounds::make(lambda, static_cast<double>(n) * p * p, 0, 0, BoundProvenance::Independent);
    EXPECT_DOUBLE_EQ(b.tv_bound, 2 * b.b1);
    EXPECT_LE(b.w0_gap_bound, b.b1);
    const auto chk = poisson_gap(b, ph, 3 * se);
    EXPECT_TRUE(chk.pass) << "lambda=" << lambda << " gap=" << chk.gap;
    EXPECT_LE(chk.gap, b.b1 + 3 * se);
  }
}

TEST(PoissonGap, VanishingIntensityAndPassRule) {
  const double lambda = 1e-9;
  const auto b = SteinChenBounds::make(lambda, 1e3 * 1e-24, 0, 0, BoundProvenance::Independent);
  const auto chk = poisson_gap(b, 1.0, 0.0);
  EXPECT_LT(chk.gap, 1e-8);
  EXPECT_LT(b.w0_gap_bound, 1e-20);

  const auto tight = SteinChenBounds::make(1.0, 0.01, 0, 0, BoundProvenance::Analytic);
  EXPECT_TRUE(poisson_gap(tight, std::exp(-1.0) + 0.015, 0.006).pass);
  EXPECT_FALSE(poisson_gap(tight, std::exp(-1.0) + 0.015, 0.004).pass);
  EXPECT_THROW(poisson_gap(SteinChenBounds::make(0.0, 0, 0, 0, BoundProvenance::Analytic), 1.0, 0.0),
               std::invalid_argument);
  EXPECT_THROW(SteinChenBounds::make(1.0, -1, 0, 0, BoundProvenance::Analytic), std::invalid_argument);
}

TEST(SmallOracle, InfiniteThresholdAndSingleSite) {
  const SiteSet one{LatticePoint(3)};
  const auto none = exact_small_oracle(one, std::numeric_limits<double>::infinity(), table(), 10'000, 1);
  EXPECT_DOUBLE_EQ(none.p_w0, 1.0);
  const double u = 1.5;
  const auto r = exact_small_oracle(one, u, table(), 200'000, 2);
  const double p = normal_tail(u / std::sqrt(g0()));
  EXPECT_TRUE(r.p_w0_ci.contains(1 - p)) << r.p_w0 << " vs " << 1 - p;
  EXPECT_NEAR(r.joint(0, 0), p, r.joint_ci_radius(0, 0));
}

TEST(SmallOracle, AdjacentPairBelowSavage) {
  const SiteSet pair{LatticePoint(3), LatticePoint::unit(3, 0)};
  const double u = 2.0;
  const auto r = exact_small_oracle(pair, u, table(), 200'000, 3);
  const double bound = savage_tail_bound({g0(), table()(LatticePoint::unit(3, 0))}, u);
  EXPECT_LE(r.joint(0, 1) - r.joint_ci_radius(0, 1), bound);
  EXPECT_DOUBLE_EQ(r.joint(0, 1), r.joint(1, 0));
}

TEST(SmallOracle, WorkerCountDoesNotChangeResult) {
  const auto a = BoxDomain(3, 2).sites();
  const auto x = exact_small_oracle(a, 2.0, table(), 20'000, 9, 1);
  const auto y = exact_small_oracle(a, 2.0, table(), 20'000, 9, 3);
  EXPECT_EQ(x.p_w0, y.p_w0);
  EXPECT_EQ(x.mean_w, y.mean_w);
  EXPECT_EQ(x.joint, y.joint);
}

TEST(SmallOracle, Rejections) {
  EXPECT_THROW(exact_small_oracle(BoxDomain(3, 3).sites(), 1.0, table(), 10'000, 1), std::invalid_argument);
  EXPECT_THROW(exact_small_oracle(SiteSet{LatticePoint(3)}, 1.0, table(), 9'999, 1), std::invalid_argument);
}
