#include "crowdsd/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>

#include "crowdsd/errors.hpp"

namespace crowdsd {
namespace {

double coord(const Point2& p, int axis) { return axis == 0 ? p.x : p.y; }

// (squared distance, index) with lexicographic order; the heap keeps the
// worst candidate on top.
using Candidate = std::pair<double, std::size_t>;

}  // namespace

KdTree::KdTree(std::vector<Point2> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  for (const auto& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidArgument("k-d tree points must be finite");
    }
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, points_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-lo[0], -lo[1]};
  for (std::size_t i = begin; i < end; ++i) {
    const Point2& p = points_[order_[i]];
    lo[0] = std::min(lo[0], p.x);
    hi[0] = std::max(hi[0], p.x);
    lo[1] = std::min(lo[1], p.y);
    hi[1] = std::max(hi[1], p.y);
  }
  const int axis = (hi[0] - lo[0]) >= (hi[1] - lo[1]) ? 0 : 1;
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const std::size_t mid = begin + (end - begin) / 2;
  auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
  std::nth_element(first, order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     return coord(points_[a], axis) < coord(points_[b], axis);
                   });

  // Left holds coordinates <= split, right holds >= split.
  const double split = coord(points_[order_[mid]], axis);
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<Neighbor> KdTree::nearest(Point2 query, std::size_t k,
                                      std::optional<std::size_t> exclude) const {
  const std::size_t available =
      points_.size() - ((exclude && *exclude < points_.size()) ? 1 : 0);
  if (k > available) {
    throw TooFewPoints("requested " + std::to_string(k) + " neighbors, only " +
                       std::to_string(available) + " available");
  }
  if (k == 0) return {};

  std::priority_queue<Candidate> heap;
  auto offer = [&](std::size_t idx) {
    if (exclude && idx == *exclude) return;
    const Candidate c{squared_distance(points_[idx], query), idx};
    if (heap.size() < k) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  };

  // Iterative depth-first search, nearer child first.
  std::vector<std::pair<std::size_t, double>> stack;  // node, squared plane gap
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, gap] = stack.back();
    stack.pop_back();
    if (heap.size() == k && gap > heap.top().first) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) offer(order_[i]);
      continue;
    }
    const double diff = coord(query, node.axis) - node.split;
    const std::size_t near_child = diff <= 0.0 ? node.left : node.right;
    const std::size_t far_child = diff <= 0.0 ? node.right : node.left;
    stack.emplace_back(far_child, diff * diff);
    stack.emplace_back(near_child, 0.0);
  }

  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = Neighbor{heap.top().second, std::sqrt(heap.top().first)};
    heap.pop();
  }
  return out;
}

std::vector<std::size_t> KdTree::within(Point2 center, double radius) const {
  std::vector<std::size_t> out;
  if (points_.empty() || !(radius >= 0.0)) return out;
  const double r2 = radius * radius;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        if (squared_distance(points_[order_[i]], center) <= r2) out.push_back(order_[i]);
      }
      continue;
    }
    const double diff = coord(center, node.axis) - node.split;
    if (diff <= 0.0 || diff * diff <= r2) stack.push_back(node.left);
    if (diff >= 0.0 || diff * diff <= r2) stack.push_back(node.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> knn_distances(const KdTree& tree, Point2 query, std::size_t k,
                                  bool exclude_self) {
  std::optional<std::size_t> self;
  if (exclude_self) {
    for (std::size_t i : tree.within(query, 0.0)) {
      self = i;
      break;
    }
  }
  std::vector<double> out;
  for (const auto& n : tree.nearest(query, k, self)) out.push_back(n.distance);
  return out;
}

std::vector<double> knn_distances(const KdTree& tree, std::size_t j, std::size_t k) {
  std::vector<double> out;
  for (const auto& n : tree.nearest(tree.point(j), k, j)) out.push_back(n.distance);
  return out;
}

std::vector<std::size_t> radius_members(const KdTree& tree, Point2 center, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
  return tree.within(center, radius);
}

}  // namespace crowdsd
