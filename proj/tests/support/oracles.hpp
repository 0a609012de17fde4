#pragma once

// Slow reference implementations the library is checked against.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "crowdsd/geometry.hpp"
#include "crowdsd/kdtree.hpp"

namespace crowdsd::testing {

// Linear scan ordered by (distance, index).
inline std::vector<Neighbor> brute_nearest(const std::vector<Point2>& pts, Point2 q, std::size_t k,
                                           std::optional<std::size_t> exclude) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({i, distance(q, pts[i])});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
  all.resize(std::min(k, all.size()));
  return all;
}

inline std::vector<std::size_t> brute_within(const std::vector<Point2>& pts, Point2 c, double r) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (distance(c, pts[i]) <= r) out.push_back(i);
  }
  return out;
}

// Repeatedly take the best remaining box (first on ties) and discard
// everything overlapping it.
template <typename B>
std::vector<B> reference_nms(const std::vector<B>& boxes, double threshold) {
  std::vector<B> kept;
  std::vector<bool> alive(boxes.size(), true);
  for (;;) {
    std::size_t best = boxes.size();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (alive[i] && (best == boxes.size() || boxes[i].score() > boxes[best].score())) best = i;
    }
    if (best == boxes.size()) break;
    kept.push_back(boxes[best]);
    alive[best] = false;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (alive[i] && iou(boxes[i], boxes[best]) > threshold) alive[i] = false;
    }
  }
  return kept;
}

// AP by walking every ranking prefix: each hit adds 1/G times the best
// precision reachable at that recall or beyond.
inline double prefix_ap(const std::vector<bool>& ranked_hits, std::size_t gt) {
  const std::size_t n = ranked_hits.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += ranked_hits[k];
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  double ap = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!ranked_hits[k]) continue;
    ap += *std::max_element(precision.begin() + static_cast<long>(k), precision.end()) /
          static_cast<double>(gt);
  }
  return ap;
}

// Matching by explicit IoU table: each ranked detection claims the best
// unclaimed ground truth (first index on ties).
template <typename D>
std::vector<bool> table_hits(const std::vector<D>& ranked, const std::vector<Box>& gt,
                             double threshold) {
  std::vector<std::vector<double>> table(ranked.size(), std::vector<double>(gt.size()));
  for (std::size_t d = 0; d < ranked.size(); ++d) {
    for (std::size_t g = 0; g < gt.size(); ++g) table[d][g] = iou(ranked[d], gt[g]);
  }
  std::vector<bool> claimed(gt.size(), false);
  std::vector<bool> hits;
  for (std::size_t d = 0; d < ranked.size(); ++d) {
    int best = -1;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (claimed[g] || table[d][g] <= 0.0) continue;
      if (best < 0 || table[d][g] > table[d][static_cast<std::size_t>(best)]) best = static_cast<int>(g);
    }
    const bool hit = best >= 0 && table[d][static_cast<std::size_t>(best)] > threshold;
    if (hit) claimed[static_cast<std::size_t>(best)] = true;
    hits.push_back(hit);
  }
  return hits;
}

// Minimum total distance over every injection of the smaller set into the
// larger one.
inline double exhaustive_assignment_cost(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  std::vector<std::size_t> perm(large.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < small.size(); ++i) total += distance(small[i], large[perm[i]]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace crowdsd::testing
