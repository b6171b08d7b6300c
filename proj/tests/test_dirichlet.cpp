#include <gtest/gtest.h>

#include <stdexcept>

#include "gffx/dirichlet.hpp"
#include "gffx/green.hpp"

using namespace gffx;

TEST(DirichletGreen, SingleSiteIsOneVisit) {
  for (std::size_t d : {3, 4, 6}) {
    const auto g = green_dirichlet(SiteSet{LatticePoint(d)});
    EXPECT_DOUBLE_EQ(g.matrix(0, 0), 1.0);
  }
}

TEST(DirichletGreen, TwoAdjacentSites) {
  const auto g = green_dirichlet(SiteSet{LatticePoint(3), LatticePoint::unit(3, 0)});
  EXPECT_NEAR(g.matrix(0, 0), 36.0 / 35.0, 1e-14);
  EXPECT_NEAR(g.matrix(1, 1), 36.0 / 35.0, 1e-14);
  EXPECT_NEAR(g.matrix(0, 1), 6.0 / 35.0, 1e-14);
}

TEST(DirichletGreen, InvariantsOnABox) {
  const double g0 = green_origin(3);
  const auto g = green_dirichlet(BoxDomain(3, 5).sites());
  EXPECT_LT(g.identity_residual(), 1e-12);
  EXPECT_LT((g.matrix - g.matrix.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::LLT<Eigen::MatrixXd> llt(g.matrix);
  EXPECT_EQ(llt.info(), Eigen::Success);
  for (Eigen::Index i = 0; i < g.matrix.rows(); ++i) {
    EXPECT_GE(g.matrix(i, i), 1.0);
    EXPECT_LE(g.matrix(i, i), g0);
  }
}

TEST(DirichletGreen, DiagonalGrowsWithTheDomain) {
  const LatticePoint centre({3, 3, 3});
  double prev = 0.0;
  for (std::int64_t r : {0, 1, 2, 3}) {
    SiteSet dom;
    for (const auto& p : linf_ball(centre, r)) dom.push_back(p);
    const auto g = green_dirichlet(dom);
    std::size_t idx = 0;
    while (!(dom[idx] == centre)) ++idx;
    const double v = g.matrix(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(idx));
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, green_origin(3));
}

TEST(DirichletGreen, RejectsBadDomains) {
  EXPECT_THROW(green_dirichlet(SiteSet{}), std::invalid_argument);
  EXPECT_THROW(green_dirichlet(SiteSet{LatticePoint(3), LatticePoint(3)}), std::invalid_argument);
  EXPECT_THROW(green_dirichlet(BoxDomain(3, 21).sites()), std::invalid_argument);
}

TEST(BoxSpectrum, MatchesDenseSolveOnFourCube) {
  const BoxDomain box(3, 4);
  const BoxSpectrum spec(box);
  const auto dense = green_dirichlet(box.sites());
  EXPECT_LT((spec.covariance_matrix() - dense.matrix).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(spec.covariance(box.point(0), box.point(21)), dense.matrix(0, 21), 1e-10);
}

TEST(BoxSpectrum, SingleSiteBoxHasUnitVariance) {
  for (std::size_t d : {3, 5}) {
    const BoxSpectrum spec(BoxDomain(d, 1));
    EXPECT_NEAR(spec.covariance_matrix()(0, 0), 1.0, 1e-14);
  }
}

TEST(BoxSpectrum, BasisIsOrthonormal) {
  const BoxSpectrum spec(BoxDomain(3, 7));
  const auto& s = spec.basis();
  EXPECT_LT((s.transpose() * s - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-13);
}
