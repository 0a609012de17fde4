#include "crowdsd/raster.hpp"

#include <algorithm>
#include <cmath>

#include "crowdsd/errors.hpp"

namespace crowdsd {

double GaussianSpec::sigma(double size_px, int stride) const {
  return std::max(size_px / (size_divisor * stride), min_sigma);
}

int SupervisionMaps::positives() const {
  int m = 0;
  for (double v : pos_mask.values()) m += v > 0.5 ? 1 : 0;
  return m;
}

Cell cell_of(Point2 p, int stride, int rows, int cols) {
  if (!(p.x >= 0.0) || !(p.y >= 0.0)) throw PointOutOfBounds("negative point coordinate");
  const int col = static_cast<int>(std::floor(p.x / stride));
  const int row = static_cast<int>(std::floor(p.y / stride));
  if (row >= rows || col >= cols) throw PointOutOfBounds("point outside the output grid");
  return {row, col};
}

std::pair<int, int> grid_shape(int height, int width, int stride) {
  if (stride != 1 && stride != 4) throw BadShape("stride must be 1 or 4");
  if (height <= 0 || width <= 0) throw BadShape("image dimensions must be positive");
  if (height % stride != 0 || width % stride != 0) {
    throw BadShape("image dimensions must be divisible by the stride");
  }
  return {height / stride, width / stride};
}

CenterRaster render_center_heatmap(std::span<const Point2> points, std::span<const double> sizes,
                                   int rows, int cols, int stride, const GaussianSpec& spec) {
  if (points.size() != sizes.size()) throw ShapeMismatch("points and sizes differ in length");
  CenterRaster out{Grid(rows, cols, 0.0), Grid(rows, cols, 0.0)};
  for (std::size_t j = 0; j < points.size(); ++j) {
    const Cell c = cell_of(points[j], stride, rows, cols);
    const double sigma = spec.sigma(sizes[j], stride);
    const double reach = spec.truncation * sigma;
    const int extent = static_cast<int>(std::floor(reach));
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int dr = -extent; dr <= extent; ++dr) {
      const int r = c.row + dr;
      if (r < 0 || r >= rows) continue;
      for (int dc = -extent; dc <= extent; ++dc) {
        const int cc = c.col + dc;
        if (cc < 0 || cc >= cols) continue;
        const double d2 = static_cast<double>(dr * dr + dc * dc);
        if (d2 > reach * reach) continue;
        double& cell = out.heatmap(r, cc);
        cell = std::max(cell, std::exp(-d2 * inv));
      }
    }
    out.pos_mask(c.row, c.col) = 1.0;
  }
  return out;
}

SizeRaster render_size_map(std::span<const Point2> points, std::span<const double> sizes, int rows,
                           int cols, int stride) {
  if (points.size() != sizes.size()) throw ShapeMismatch("points and sizes differ in length");
  SizeRaster out{Grid(rows, cols, 0.0), 0};
  BasicGrid<unsigned char> written(rows, cols, 0);
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (!(sizes[j] > 0.0)) throw InvalidArgument("sizes must be positive");
    const Cell c = cell_of(points[j], stride, rows, cols);
    if (written(c.row, c.col)) ++out.collisions;
    written(c.row, c.col) = 1;
    out.size_map(c.row, c.col) = std::log(sizes[j]);
  }
  return out;
}

OffsetMap render_offset_map(std::span<const Point2> points, int rows, int cols) {
  constexpr int kStride = 4;
  OffsetMap out{Grid(rows, cols, 0.0), Grid(rows, cols, 0.0)};
  for (const Point2& p : points) {
    const Cell c = cell_of(p, kStride, rows, cols);
    const double fx = p.x / kStride;
    const double fy = p.y / kStride;
    out.dx(c.row, c.col) = fx - std::floor(fx);
    out.dy(c.row, c.col) = fy - std::floor(fy);
  }
  return out;
}

SupervisionMaps build_supervision(std::span<const Point2> points, std::span<const double> sizes,
                                  std::span<const double> alphas, int height, int width,
                                  int stride, const GaussianSpec& spec) {
  if (alphas.size() != points.size()) throw ShapeMismatch("alphas and points differ in length");
  const auto [rows, cols] = grid_shape(height, width, stride);
  CenterRaster centers = render_center_heatmap(points, sizes, rows, cols, stride, spec);
  SizeRaster sizes_raster = render_size_map(points, sizes, rows, cols, stride);

  SupervisionMaps maps;
  maps.stride = stride;
  maps.heatmap = std::move(centers.heatmap);
  maps.pos_mask = std::move(centers.pos_mask);
  maps.size_map = std::move(sizes_raster.size_map);
  maps.collisions = sizes_raster.collisions;
  maps.alpha_map = Grid(rows, cols, 0.0);
  for (std::size_t j = 0; j < points.size(); ++j) {
    const Cell c = cell_of(points[j], stride, rows, cols);
    maps.alpha_map(c.row, c.col) = alphas[j];
  }
  if (stride == 4) maps.offset = render_offset_map(points, rows, cols);
  return maps;
}

}  // namespace crowdsd
