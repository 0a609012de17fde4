#include "crowdsd/annotations.hpp"

#include <fstream>
#include <json.hpp>
#include <string>

#include "crowdsd/errors.hpp"
#include "crowdsd/image_io.hpp"

namespace crowdsd {
namespace {

using nlohmann::json;

json to_record(const PointScene& scene, bool include_boxes) {
  json rec;
  rec["image_id"] = scene.image_id;
  rec["width"] = scene.width;
  rec["height"] = scene.height;
  json points = json::array();
  for (const Point2& p : scene.points) points.push_back({p.x, p.y});
  rec["points"] = std::move(points);
  if (include_boxes && scene.gt_boxes) {
    json boxes = json::array();
    for (const Box& b : *scene.gt_boxes) boxes.push_back({b.cx(), b.cy(), b.size()});
    rec["boxes"] = std::move(boxes);
  }
  return rec;
}

double number_at(const json& arr, std::size_t i, std::size_t line) {
  if (!arr.at(i).is_number()) throw ParseError("expected a number", line);
  return arr.at(i).get<double>();
}

PointScene from_record(const json& rec, std::size_t line) {
  if (!rec.is_object()) throw ParseError("record must be an object", line);
  for (const char* key : {"image_id", "width", "height", "points"}) {
    if (!rec.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line);
  }
  PointScene scene;
  if (!rec["image_id"].is_string()) throw ParseError("image_id must be a string", line);
  if (!rec["width"].is_number_integer() || !rec["height"].is_number_integer()) {
    throw ParseError("width and height must be integers", line);
  }
  scene.image_id = rec["image_id"].get<std::string>();
  scene.width = rec["width"].get<int>();
  scene.height = rec["height"].get<int>();
  if (scene.width <= 0 || scene.height <= 0) throw ParseError("dimensions must be positive", line);

  const json& points = rec["points"];
  if (!points.is_array()) throw ParseError("points must be an array", line);
  for (const json& p : points) {
    if (!p.is_array() || p.size() != 2) throw ParseError("each point must be [x, y]", line);
    const Point2 pt{number_at(p, 0, line), number_at(p, 1, line)};
    if (!(pt.x >= 0.0 && pt.x < scene.width && pt.y >= 0.0 && pt.y < scene.height)) {
      throw ParseError("point outside the image", line);
    }
    scene.points.push_back(pt);
  }

  if (rec.contains("boxes")) {
    const json& boxes = rec["boxes"];
    if (!boxes.is_array()) throw ParseError("boxes must be an array", line);
    if (boxes.size() != scene.points.size()) throw ParseError("one box per point required", line);
    std::vector<Box> out;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const json& b = boxes[i];
      if (!b.is_array() || b.size() != 3) throw ParseError("each box must be [cx, cy, size]", line);
      const double cx = number_at(b, 0, line);
      const double cy = number_at(b, 1, line);
      const double size = number_at(b, 2, line);
      if (cx != scene.points[i].x || cy != scene.points[i].y) {
        throw ParseError("box center differs from its point", line);
      }
      if (!(size > 0.0)) throw ParseError("box size must be positive", line);
      out.emplace_back(cx, cy, size);
    }
    scene.gt_boxes = std::move(out);
  }
  return scene;
}

}  // namespace

std::filesystem::path image_path(const std::filesystem::path& annotations,
                                 const std::string& image_id) {
  return annotations.parent_path() / "images" / (image_id + ".pgm");
}

void save_annotations(const std::filesystem::path& path, std::span<const PointScene> scenes,
                      const SaveOptions& options) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write annotations " + path.string());
  if (options.write_images) std::filesystem::create_directories(image_path(path, "x").parent_path());
  for (const PointScene& scene : scenes) {
    os << to_record(scene, options.include_boxes).dump() << '\n';
    if (options.write_images && scene.image) write_pgm(image_path(path, scene.image_id), *scene.image);
  }
  if (!os) throw IoError("failed writing annotations " + path.string());
}

std::vector<PointScene> load_annotations(const std::filesystem::path& path, bool load_images) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open annotations " + path.string());
  std::vector<PointScene> scenes;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    PointScene scene = from_record(rec, line);
    if (load_images) {
      const auto img = image_path(path, scene.image_id);
      if (!std::filesystem::exists(img)) throw MissingImage("missing image " + img.string());
      scene.image = read_pgm(img);
      if (scene.image->rows() != scene.height || scene.image->cols() != scene.width) {
        throw ParseError("image size differs from the record", line);
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace crowdsd
