#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "crowdsd/geometry.hpp"

namespace crowdsd {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

// Immutable 2-D k-d tree over a point snapshot. Nodes split at the median of
// their widest dimension. Results are exactly those of a linear scan:
// neighbors are ordered by (distance, insertion index).
class KdTree {
 public:
  static constexpr std::size_t kDefaultLeafSize = 16;

  explicit KdTree(std::vector<Point2> points, std::size_t leaf_size = kDefaultLeafSize);

  std::size_t size() const noexcept { return points_.size(); }
  const Point2& point(std::size_t i) const { return points_.at(i); }
  std::span<const Point2> points() const noexcept { return points_; }

  // The k nearest indexed points to `query`, skipping index `exclude` when
  // given. Throws TooFewPoints when fewer than k candidates exist.
  std::vector<Neighbor> nearest(Point2 query, std::size_t k,
                                std::optional<std::size_t> exclude = std::nullopt) const;

  // Indices (ascending) of all points with distance to `center` <= radius.
  std::vector<std::size_t> within(Point2 center, double radius) const;

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);

  std::vector<Point2> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

// Ascending distances to the k nearest neighbors of `query`. With
// `exclude_self`, one indexed point coincident with the query (the lowest
// index) is ignored.
std::vector<double> knn_distances(const KdTree& tree, Point2 query, std::size_t k,
                                  bool exclude_self);

// Same, for the indexed point j (always excludes j itself).
std::vector<double> knn_distances(const KdTree& tree, std::size_t j, std::size_t k);

std::vector<std::size_t> radius_members(const KdTree& tree, Point2 center, double radius);

}  // namespace crowdsd
