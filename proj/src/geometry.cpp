#include "crowdsd/geometry.hpp"

#include <algorithm>

#include "crowdsd/errors.hpp"

namespace crowdsd {

Box::Box(double cx, double cy, double size, double score)
    : cx_(cx), cy_(cy), size_(size), score_(score) {
  if (!(size > 0.0) || !std::isfinite(size)) {
    throw InvalidArgument("box size must be positive and finite");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidArgument("box center must be finite");
  }
}

Box Box::from_corners(const Corners& c, double score) {
  const double w = c.x1 - c.x0;
  const double h = c.y1 - c.y0;
  if (!(w > 0.0) || w != h) throw InvalidArgument("corners do not describe a square box");
  return Box(c.x0 + w / 2.0, c.y0 + h / 2.0, w, score);
}

Corners Box::corners() const noexcept {
  const double half = size_ / 2.0;
  return {cx_ - half, cy_ - half, cx_ + half, cy_ + half};
}

double iou(const Box& a, const Box& b) noexcept {
  const Corners ca = a.corners();
  const Corners cb = b.corners();
  const double iw = std::min(ca.x1, cb.x1) - std::max(ca.x0, cb.x0);
  const double ih = std::min(ca.y1, cb.y1) - std::max(ca.y0, cb.y0);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  if (a.cx() == b.cx() && a.cy() == b.cy() && a.size() == b.size()) return 1.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace crowdsd
