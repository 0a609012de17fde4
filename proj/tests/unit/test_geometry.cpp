#include <gtest/gtest.h>

#include <random>

#include "crowdsd/errors.hpp"
#include "crowdsd/geometry.hpp"

namespace crowdsd {
namespace {

TEST(Iou, IdenticalBoxesGiveOne) {
  const Box a(10.0, 20.0, 6.0);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) {
  EXPECT_DOUBLE_EQ(iou(Box(0, 0, 2), Box(10, 10, 2)), 0.0);
}

TEST(Iou, TouchingEdgesGiveZero) {
  EXPECT_DOUBLE_EQ(iou(Box(0, 0, 2), Box(2, 0, 2)), 0.0);
}

TEST(Iou, HalfShiftedUnitSquares) {
  EXPECT_NEAR(iou(Box(0, 0, 1), Box(0.5, 0, 1)), 0.5 / 1.5, 1e-15);
}

TEST(Iou, NestedBoxes) {
  // Inner area 4, outer area 16.
  EXPECT_DOUBLE_EQ(iou(Box(5, 5, 2), Box(5, 5, 4)), 0.25);
}

TEST(Iou, SymmetricAndBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.0, 20.0);
  std::uniform_real_distribution<double> side(0.5, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const Box a(pos(rng), pos(rng), side(rng));
    const Box b(pos(rng), pos(rng), side(rng));
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Box, RejectsNonPositiveSize) {
  EXPECT_THROW(Box(0, 0, 0.0), InvalidArgument);
  EXPECT_THROW(Box(0, 0, -1.0), InvalidArgument);
}

TEST(Box, CornersFollowCenterAndSide) {
  const Corners c = Box(10.0, 4.0, 6.0).corners();
  EXPECT_EQ(c, (Corners{7.0, 1.0, 13.0, 7.0}));
}

TEST(Box, CornerRoundTripIsExact) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(-500, 500);
  std::uniform_int_distribution<int> side(1, 64);
  for (int i = 0; i < 1000; ++i) {
    // Dyadic coordinates keep every intermediate exactly representable.
    const double x0 = coord(rng) / 8.0;
    const double y0 = coord(rng) / 8.0;
    const double s = side(rng) / 4.0;
    const Corners c{x0, y0, x0 + s, y0 + s};
    EXPECT_EQ(Box::from_corners(c).corners(), c);
  }
}

TEST(Box, FromCornersRejectsNonSquare) {
  EXPECT_THROW(Box::from_corners({0, 0, 4, 2}), InvalidArgument);
  EXPECT_THROW(Box::from_corners({0, 0, 0, 0}), InvalidArgument);
}

}  // namespace
}  // namespace crowdsd
