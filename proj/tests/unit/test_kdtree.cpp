#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "crowdsd/errors.hpp"
#include "crowdsd/kdtree.hpp"
#include "support/oracles.hpp"

namespace crowdsd {
namespace {

std::vector<Point2> random_points(std::size_t n, std::uint64_t seed, double extent = 100.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return pts;
}

using testing::brute_nearest;
using testing::brute_within;

void expect_same(const std::vector<Neighbor>& got, const std::vector<Neighbor>& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].index, want[i].index) << "rank " << i;
    EXPECT_EQ(got[i].distance, want[i].distance) << "rank " << i;
  }
}

TEST(KnnDistances, CollinearMiddlePoint) {
  const KdTree tree({{0, 0}, {10, 0}, {20, 0}});
  EXPECT_EQ(knn_distances(tree, Point2{10, 0}, 2, true), (std::vector<double>{10, 10}));
  EXPECT_EQ(knn_distances(tree, std::size_t{1}, 2), (std::vector<double>{10, 10}));
}

TEST(KnnDistances, CollinearEndPoint) {
  const KdTree tree({{0, 0}, {10, 0}, {20, 0}});
  EXPECT_EQ(knn_distances(tree, Point2{0, 0}, 2, true), (std::vector<double>{10, 20}));
}

TEST(KnnDistances, WithoutExclusionSelfCountsAsZero) {
  const KdTree tree({{0, 0}, {10, 0}, {20, 0}});
  EXPECT_EQ(knn_distances(tree, Point2{0, 0}, 2, false), (std::vector<double>{0, 10}));
}

TEST(KnnDistances, TooFewPoints) {
  const KdTree tree({{0, 0}, {10, 0}});
  EXPECT_THROW(knn_distances(tree, std::size_t{0}, 2), TooFewPoints);
  EXPECT_NO_THROW(knn_distances(tree, std::size_t{0}, 1));
}

TEST(KnnDistances, TiesBrokenByInsertionOrder) {
  // Four points at distance 5 from the query.
  const KdTree tree({{5, 0}, {0, 5}, {-5, 0}, {0, -5}, {0, 0}});
  const auto nn = tree.nearest({0, 0}, 3, std::size_t{4});
  ASSERT_EQ(nn.size(), 3u);
  EXPECT_EQ(nn[0].index, 0u);
  EXPECT_EQ(nn[1].index, 1u);
  EXPECT_EQ(nn[2].index, 2u);
}

TEST(KdTree, NearestMatchesBruteForceOnRandomSets) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = random_points(100, seed);
    const KdTree tree(pts, 4);
    std::mt19937_64 rng(seed + 100);
    for (std::size_t k = 1; k <= 10; ++k) {
      const std::size_t j = rng() % pts.size();
      expect_same(tree.nearest(pts[j], k, j), brute_nearest(pts, pts[j], k, j));
      const Point2 q{std::uniform_real_distribution<double>(-10, 110)(rng), 50.0};
      expect_same(tree.nearest(q, k), brute_nearest(pts, q, k, std::nullopt));
    }
  }
}

TEST(KdTree, DuplicatePointsAndLatticeTies) {
  std::vector<Point2> pts;
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) pts.push_back({c * 4.0, r * 4.0});
  }
  pts.push_back({8.0, 8.0});
  pts.push_back({8.0, 8.0});
  const KdTree tree(pts, 3);
  for (std::size_t j = 0; j < pts.size(); j += 7) {
    expect_same(tree.nearest(pts[j], 6, j), brute_nearest(pts, pts[j], 6, j));
    EXPECT_EQ(tree.within(pts[j], 4.0), brute_within(pts, pts[j], 4.0));
  }
}

TEST(RadiusMembers, SinglePointIsItsOwnRegion) {
  const KdTree tree({{3, 4}});
  EXPECT_EQ(radius_members(tree, {3, 4}, 1e-3), (std::vector<std::size_t>{0}));
  EXPECT_EQ(radius_members(tree, {3, 4}, 1e3), (std::vector<std::size_t>{0}));
}

TEST(RadiusMembers, LatticeFourNeighborhood) {
  std::vector<Point2> pts;
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) pts.push_back({c * 8.0, r * 8.0});
  }
  const KdTree tree(pts);
  EXPECT_EQ(radius_members(tree, {16, 16}, 8.5).size(), 5u);
}

TEST(RadiusMembers, BoundaryDistanceIsInclusive) {
  const KdTree tree({{0, 0}, {3, 4}});
  EXPECT_EQ(radius_members(tree, {0, 0}, 5.0).size(), 2u);
  EXPECT_EQ(radius_members(tree, {0, 0}, 4.999).size(), 1u);
}

TEST(RadiusMembers, MatchesBruteForceOnRandomSets) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = random_points(300, seed);
    const KdTree tree(pts);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> r(0.5, 30.0);
    for (int q = 0; q < 20; ++q) {
      const Point2 c = pts[rng() % pts.size()];
      const double radius = r(rng);
      EXPECT_EQ(radius_members(tree, c, radius), brute_within(pts, c, radius));
    }
  }
}

TEST(KdTree, EmptyTreeAnswersEmptyRadiusQuery) {
  const KdTree tree(std::vector<Point2>{});
  EXPECT_TRUE(tree.within({0, 0}, 10.0).empty());
  EXPECT_THROW(tree.nearest({0, 0}, 1), TooFewPoints);
}

}  // namespace
}  // namespace crowdsd
