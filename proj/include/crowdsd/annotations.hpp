#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "crowdsd/scene.hpp"

namespace crowdsd {

struct SaveOptions {
  bool include_boxes = true;   // false: point-only files
  bool write_images = true;    // images/<image_id>.pgm beside the file
};

// One JSON object per line:
//   {"image_id":..,"width":..,"height":..,"points":[[x,y],..],"boxes":[[cx,cy,size],..]}
// "boxes" is optional. See docs/file_formats.md.
void save_annotations(const std::filesystem::path& path, std::span<const PointScene> scenes,
                      const SaveOptions& options = {});

// Throws ParseError (with the 1-based line) on malformed records and
// MissingImage when `load_images` is set and an image file is absent.
std::vector<PointScene> load_annotations(const std::filesystem::path& path,
                                         bool load_images = true);

std::filesystem::path image_path(const std::filesystem::path& annotations,
                                 const std::string& image_id);

}  // namespace crowdsd
