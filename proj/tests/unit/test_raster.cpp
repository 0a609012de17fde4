#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "crowdsd/errors.hpp"
#include "crowdsd/raster.hpp"

namespace crowdsd {
namespace {

TEST(GaussianSpec, SigmaFloorsAtOneCell) {
  const GaussianSpec spec;
  EXPECT_DOUBLE_EQ(spec.sigma(3.0, 1), 1.0);
  EXPECT_DOUBLE_EQ(spec.sigma(12.0, 1), 2.0);
  EXPECT_DOUBLE_EQ(spec.sigma(48.0, 4), 2.0);
}

TEST(CenterHeatmap, SinglePointClosedForm) {
  const std::vector<Point2> pts = {{5.0, 5.0}};
  const std::vector<double> sizes = {6.0};
  const auto r = render_center_heatmap(pts, sizes, 11, 11, 1, GaussianSpec{});
  EXPECT_DOUBLE_EQ(r.heatmap(5, 5), 1.0);
  for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
    EXPECT_NEAR(r.heatmap(5 + dr, 5 + dc), std::exp(-0.5), 1e-15);
  }
  EXPECT_NEAR(r.heatmap(6, 6), std::exp(-1.0), 1e-15);
  // Truncated at three sigmas.
  EXPECT_NEAR(r.heatmap(5, 8), std::exp(-4.5), 1e-15);
  EXPECT_EQ(r.heatmap(5, 9), 0.0);
  EXPECT_EQ(r.heatmap(7, 8), 0.0);
  EXPECT_EQ(r.pos_mask(5, 5), 1.0);
}

TEST(CenterHeatmap, CoincidentPointsEqualOnePoint) {
  const std::vector<Point2> one = {{4.0, 3.0}};
  const std::vector<Point2> two = {{4.0, 3.0}, {4.0, 3.0}};
  const auto a = render_center_heatmap(one, std::vector<double>{6.0}, 9, 9, 1, GaussianSpec{});
  const auto b = render_center_heatmap(two, std::vector<double>{6.0, 6.0}, 9, 9, 1, GaussianSpec{});
  EXPECT_EQ(a.heatmap, b.heatmap);
  EXPECT_EQ(a.pos_mask, b.pos_mask);
}

TEST(CenterHeatmap, OverlapsTakeMaximumNotSum) {
  const std::vector<Point2> pts = {{2.0, 4.0}, {4.0, 4.0}};
  const auto r =
      render_center_heatmap(pts, std::vector<double>{6.0, 6.0}, 9, 9, 1, GaussianSpec{});
  EXPECT_NEAR(r.heatmap(4, 3), std::exp(-0.5), 1e-15);
  EXPECT_DOUBLE_EQ(r.heatmap(4, 2), 1.0);
  EXPECT_DOUBLE_EQ(r.heatmap(4, 4), 1.0);
}

TEST(CenterHeatmap, BoundedAndPeaksExactlyAtCenters) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(0.0, 31.99);
  std::uniform_real_distribution<double> size(2.0, 20.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point2> pts;
    std::vector<double> sizes;
    for (int i = 0; i < 12; ++i) {
      pts.push_back({pos(rng), pos(rng)});
      sizes.push_back(size(rng));
    }
    const auto r = render_center_heatmap(pts, sizes, 32, 32, 1, GaussianSpec{});
    for (std::size_t i = 0; i < r.heatmap.size(); ++i) {
      EXPECT_GE(r.heatmap[i], 0.0);
      EXPECT_LE(r.heatmap[i], 1.0);
      EXPECT_EQ(r.heatmap[i] == 1.0, r.pos_mask[i] == 1.0);
    }
  }
}

TEST(CenterHeatmap, PermutationInvariant) {
  std::vector<Point2> pts = {{3, 4}, {10.5, 2}, {7, 7}, {1, 12}};
  std::vector<double> sizes = {5, 9, 14, 3};
  const auto a = render_center_heatmap(pts, sizes, 16, 16, 1, GaussianSpec{});
  std::reverse(pts.begin(), pts.end());
  std::reverse(sizes.begin(), sizes.end());
  const auto b = render_center_heatmap(pts, sizes, 16, 16, 1, GaussianSpec{});
  EXPECT_EQ(a.heatmap, b.heatmap);
  EXPECT_EQ(a.pos_mask, b.pos_mask);
}

TEST(CenterHeatmap, OutOfBoundsPointThrows) {
  const std::vector<Point2> pts = {{16.0, 2.0}};
  EXPECT_THROW(render_center_heatmap(pts, std::vector<double>{4.0}, 16, 16, 1, GaussianSpec{}),
               PointOutOfBounds);
  const std::vector<Point2> neg = {{-0.5, 2.0}};
  EXPECT_THROW(render_center_heatmap(neg, std::vector<double>{4.0}, 16, 16, 1, GaussianSpec{}),
               PointOutOfBounds);
}

TEST(CellOf, StrideFourFloorsCoordinates) {
  const Cell c = cell_of({13.0, 7.0}, 4, 8, 8);
  EXPECT_EQ(c.row, 1);
  EXPECT_EQ(c.col, 3);
}

TEST(SizeMap, LogOfSizeAtCenter) {
  const std::vector<Point2> pts = {{2.0, 3.0}, {6.0, 1.0}};
  const auto r = render_size_map(pts, std::vector<double>{8.0, 1.0}, 8, 8, 1);
  EXPECT_NEAR(r.size_map(3, 2), 2.0794415416798357, 1e-15);
  EXPECT_EQ(r.size_map(1, 6), 0.0);
  double nonzero = 0;
  for (double v : r.size_map.values()) nonzero += v != 0.0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_EQ(r.collisions, 0);
}

TEST(SizeMap, SharedStrideFourCellCountsCollisions) {
  const std::vector<Point2> pts = {{1.0, 1.0}, {2.5, 3.0}, {3.9, 0.0}, {9.0, 9.0}};
  const auto r = render_size_map(pts, std::vector<double>{4.0, 5.0, 6.0, 7.0}, 4, 4, 4);
  EXPECT_EQ(r.collisions, 2);
  EXPECT_DOUBLE_EQ(r.size_map(0, 0), std::log(6.0));
  EXPECT_DOUBLE_EQ(r.size_map(2, 2), std::log(7.0));
}

TEST(SizeMap, RejectsNonPositiveSizes) {
  const std::vector<Point2> pts = {{1, 1}};
  EXPECT_THROW(render_size_map(pts, std::vector<double>{0.0}, 4, 4, 1), InvalidArgument);
}

TEST(OffsetMap, ClosedFormExamples) {
  const std::vector<Point2> pts = {{13.0, 7.0}, {16.0, 8.0}, {1.0, 2.0}};
  const auto o = render_offset_map(pts, 8, 8);
  EXPECT_EQ(o.dx(1, 3), 0.25);
  EXPECT_EQ(o.dy(1, 3), 0.75);
  EXPECT_EQ(o.dx(2, 4), 0.0);
  EXPECT_EQ(o.dy(2, 4), 0.0);
  EXPECT_EQ(o.dx(0, 0), 0.25);
  EXPECT_EQ(o.dy(0, 0), 0.5);
}

TEST(GridShape, StrideRules) {
  EXPECT_EQ(grid_shape(96, 64, 1), (std::pair<int, int>{96, 64}));
  EXPECT_EQ(grid_shape(96, 64, 4), (std::pair<int, int>{24, 16}));
  EXPECT_THROW(grid_shape(30, 32, 4), BadShape);
  EXPECT_THROW(grid_shape(32, 32, 2), BadShape);
}

TEST(BuildSupervision, InvariantsAtBothStrides) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.0, 63.99);
  std::uniform_real_distribution<double> size(3.0, 16.0);
  for (int stride : {1, 4}) {
    std::vector<Point2> pts;
    std::vector<double> sizes;
    std::vector<double> alphas;
    for (int i = 0; i < 15; ++i) {
      pts.push_back({pos(rng), pos(rng)});
      sizes.push_back(size(rng));
      alphas.push_back(1.0 + i);
    }
    const auto m = build_supervision(pts, sizes, alphas, 64, 64, stride, GaussianSpec{});
    EXPECT_EQ(m.stride, stride);
    EXPECT_EQ(m.offset.has_value(), stride == 4);
    EXPECT_EQ(m.positives() + m.collisions, 15);
    for (std::size_t i = 0; i < m.heatmap.size(); ++i) {
      EXPECT_LE(m.heatmap[i], 1.0);
      if (m.pos_mask[i] == 0.0) {
        EXPECT_EQ(m.size_map[i], 0.0);
        EXPECT_EQ(m.alpha_map[i], 0.0);
      } else {
        EXPECT_EQ(m.heatmap[i], 1.0);
        EXPECT_GE(m.alpha_map[i], 1.0);
      }
    }
  }
}

TEST(BuildSupervision, LengthMismatchThrows) {
  const std::vector<Point2> pts = {{1, 1}};
  EXPECT_THROW(build_supervision(pts, std::vector<double>{2.0}, std::vector<double>{}, 8, 8, 1,
                                 GaussianSpec{}),
               ShapeMismatch);
}

}  // namespace
}  // namespace crowdsd
