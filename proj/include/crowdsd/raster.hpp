#pragma once

#include <optional>
#include <span>
#include <vector>

#include "crowdsd/geometry.hpp"
#include "crowdsd/grid.hpp"

namespace crowdsd {

// Gaussian placed on every center: sigma = max(size / size_divisor, min_sigma)
// in output-grid cells, truncated at `truncation` sigmas. Peak value is 1.
struct GaussianSpec {
  double size_divisor = 6.0;
  double min_sigma = 1.0;
  double truncation = 3.0;

  double sigma(double size_px, int stride) const;
};

struct OffsetMap {
  Grid dx;
  Grid dy;
};

struct CenterRaster {
  Grid heatmap;
  Grid pos_mask;
};

struct SizeRaster {
  Grid size_map;
  int collisions = 0;
};

// All supervision for one scene at a given output stride.
struct SupervisionMaps {
  int stride = 1;
  Grid heatmap;    // Q, values in [0, 1]
  Grid size_map;   // log(size) at center cells, 0 elsewhere
  Grid pos_mask;   // 1 at center cells
  Grid alpha_map;  // crowdedness weight at center cells
  std::optional<OffsetMap> offset;  // stride 4 only
  int collisions = 0;

  int positives() const;
};

// Grid cell of a pixel-space point: floor(coordinate / stride). Throws
// PointOutOfBounds when the cell falls outside rows x cols.
struct Cell {
  int row = 0;
  int col = 0;
};
Cell cell_of(Point2 p, int stride, int rows, int cols);

CenterRaster render_center_heatmap(std::span<const Point2> points, std::span<const double> sizes,
                                   int rows, int cols, int stride, const GaussianSpec& spec);

// Later points overwrite earlier ones that share a cell; each overwrite
// counts as one collision.
SizeRaster render_size_map(std::span<const Point2> points, std::span<const double> sizes, int rows,
                           int cols, int stride);

// Stride-4 sub-cell offsets x/4 - floor(x/4) and y/4 - floor(y/4).
OffsetMap render_offset_map(std::span<const Point2> points, int rows, int cols);

// Output grid dimensions for an image at the given stride (1 or 4). Throws
// BadShape when stride 4 is requested for dimensions not divisible by 4.
std::pair<int, int> grid_shape(int height, int width, int stride);

SupervisionMaps build_supervision(std::span<const Point2> points, std::span<const double> sizes,
                                  std::span<const double> alphas, int height, int width,
                                  int stride, const GaussianSpec& spec);

}  // namespace crowdsd
