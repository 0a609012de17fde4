#pragma once

#include <filesystem>
#include <span>

#include "crowdsd/geometry.hpp"
#include "crowdsd/grid.hpp"

namespace crowdsd {

// Binary 8-bit portable graymap (P5). Values are mapped from/to [0, 1] as
// v / 255; writing rounds to the nearest level.
Grid read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Grid& image);

// Bilinear resampling with align-corners=false sampling.
Grid resize_bilinear(const Grid& image, int rows, int cols);

// Copy of `image` with one-pixel square outlines drawn at `value`.
Grid draw_boxes(const Grid& image, std::span<const Detection> boxes, double value = 1.0);

}  // namespace crowdsd
