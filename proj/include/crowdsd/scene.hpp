#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdsd/geometry.hpp"
#include "crowdsd/grid.hpp"

namespace crowdsd {

// One image's point annotations. Synthetic scenes also carry the hidden
// ground-truth boxes (centers equal `points`) and the rendered image.
struct PointScene {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Point2> points;
  std::optional<std::vector<Box>> gt_boxes;
  std::optional<Grid> image;  // rows = height, cols = width, values in [0, 1]

  std::size_t count() const noexcept { return points.size(); }
};

// Copy of the scene with ground-truth boxes removed: what training may see.
inline PointScene points_only(PointScene scene) {
  scene.gt_boxes.reset();
  return scene;
}

}  // namespace crowdsd
