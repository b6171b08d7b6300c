#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gffx/lattice.hpp"

using namespace gffx;

TEST(LatticePoint, ArithmeticAndNorms) {
  const LatticePoint a({1, -2, 3});
  const LatticePoint b({0, 4, -1});
  EXPECT_EQ(a + b, LatticePoint({1, 2, 2}));
  EXPECT_EQ(a - b, LatticePoint({1, -6, 4}));
  EXPECT_EQ(a.norm_inf(), 3);
  EXPECT_EQ(a.norm_1(), 6);
  EXPECT_DOUBLE_EQ(a.norm_2(), std::sqrt(14.0));
  EXPECT_EQ(a.to_string(), "(1,-2,3)");
}

TEST(LatticePoint, CanonicalFormSortsAbsoluteValues) {
  EXPECT_EQ(LatticePoint({3, -1, 2}).canonical(), LatticePoint({1, 2, 3}));
  EXPECT_EQ(LatticePoint({-2, 0, -2}).canonical(), LatticePoint({0, 2, 2}));
}

TEST(LatticePoint, UnitVector) {
  EXPECT_EQ(LatticePoint::unit(4, 2, -3), LatticePoint({0, 0, -3, 0}));
}

TEST(Lattice, DimensionBelowThreeRejected) {
  EXPECT_THROW(require_dimension(2), std::invalid_argument);
  EXPECT_NO_THROW(require_dimension(3));
}

TEST(Lattice, NeighboursAreTheTwoDUnitSteps) {
  const auto nb = neighbors(LatticePoint({0, 0, 0}));
  ASSERT_EQ(nb.size(), 6u);
  EXPECT_EQ(nb[0], LatticePoint({1, 0, 0}));
  EXPECT_EQ(nb[1], LatticePoint({-1, 0, 0}));
  for (const auto& q : nb) EXPECT_EQ(q.norm_1(), 1);
}

TEST(BoxDomain, IndexRoundTrip) {
  const BoxDomain box(3, 5);
  EXPECT_EQ(box.size(), 125u);
  for (std::size_t i = 0; i < box.size(); ++i) EXPECT_EQ(box.index(box.point(i)), i);
  EXPECT_EQ(box.point(1), LatticePoint({0, 0, 1}));
}

TEST(BoxDomain, BoundaryCounts) {
  for (std::int64_t n : {1, 2, 3, 6}) {
    const BoxDomain box(3, n);
    const auto inner = box.inner_boundary();
    const auto expected_inner = static_cast<std::size_t>(n * n * n - std::max<std::int64_t>(n - 2, 0) * std::max<std::int64_t>(n - 2, 0) * std::max<std::int64_t>(n - 2, 0));
    EXPECT_EQ(inner.size(), expected_inner);
    EXPECT_EQ(box.outer_boundary().size(), static_cast<std::size_t>(6 * n * n));
    for (const auto& p : box.outer_boundary()) EXPECT_FALSE(box.contains(p));
  }
}

TEST(BoxDomain, DistanceToComplement) {
  const BoxDomain box(3, 10);
  EXPECT_EQ(box.distance_to_complement(LatticePoint({0, 5, 5})), 1);
  EXPECT_EQ(box.distance_to_complement(LatticePoint({4, 5, 5})), 5);
  EXPECT_EQ(box.distance_to_complement(LatticePoint({9, 9, 9})), 1);
}

TEST(Lattice, LinfBallAndDiameter) {
  const auto ball = linf_ball(LatticePoint({1, 1, 1}), 2);
  EXPECT_EQ(ball.size(), 125u);
  EXPECT_EQ(linf_diameter(ball), 4);
  for (const auto& p : ball) EXPECT_LE((p - LatticePoint({1, 1, 1})).norm_inf(), 2);
}
