#pragma once

#include <cmath>

namespace crowdsd {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double squared_distance(Point2 a, Point2 b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(Point2 a, Point2 b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

struct Corners {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  friend bool operator==(const Corners&, const Corners&) = default;
};

// Square, axis-aligned box. Objects in crowds are treated as having an
// aspect ratio of one, so a single side length describes the extent.
// Detections reuse this type with `score` carrying the confidence.
class Box {
 public:
  Box() = default;
  Box(double cx, double cy, double size, double score = 1.0);
  Box(Point2 center, double size, double score = 1.0)
      : Box(center.x, center.y, size, score) {}

  // Throws InvalidArgument for non-square or empty corners.
  static Box from_corners(const Corners& c, double score = 1.0);

  double cx() const noexcept { return cx_; }
  double cy() const noexcept { return cy_; }
  Point2 center() const noexcept { return {cx_, cy_}; }
  double size() const noexcept { return size_; }
  double score() const noexcept { return score_; }
  double area() const noexcept { return size_ * size_; }
  Corners corners() const noexcept;

  void set_score(double s) noexcept { score_ = s; }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double cx_ = 0.0;
  double cy_ = 0.0;
  double size_ = 1.0;
  double score_ = 1.0;
};

using Detection = Box;

/// Intersection over union of two boxes, in [0, 1].
double iou(const Box& a, const Box& b) noexcept;

}  // namespace crowdsd
