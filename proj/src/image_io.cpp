#include "crowdsd/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "crowdsd/errors.hpp"

namespace crowdsd {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is) {
  std::string tok;
  char ch = 0;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(is, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

int header_int(std::istream& is, const std::filesystem::path& path) {
  const std::string tok = header_token(is);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw IoError("malformed PGM header in " + path.string());
}

}  // namespace

Grid read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingImage("cannot open image " + path.string());
  if (header_token(is) != "P5") throw IoError("not a binary PGM: " + path.string());
  const int cols = header_int(is, path);
  const int rows = header_int(is, path);
  const int maxval = header_int(is, path);
  if (cols <= 0 || rows <= 0 || maxval != 255) {
    throw IoError("unsupported PGM geometry in " + path.string());
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(rows) * cols);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!is) throw IoError("truncated PGM: " + path.string());
  Grid image(rows, cols, 0.0);
  for (std::size_t i = 0; i < bytes.size(); ++i) image[i] = bytes[i] / 255.0;
  return image;
}

void write_pgm(const std::filesystem::path& path, const Grid& image) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write image " + path.string());
  os << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing image " + path.string());
}

Grid resize_bilinear(const Grid& image, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw BadShape("resize target must be positive");
  Grid out(rows, cols, 0.0);
  const double sy = static_cast<double>(image.rows()) / rows;
  const double sx = static_cast<double>(image.cols()) / cols;
  for (int r = 0; r < rows; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, image.rows() - 1.0);
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, image.rows() - 1);
    const double fy = y - y0;
    for (int c = 0; c < cols; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, image.cols() - 1.0);
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, image.cols() - 1);
      const double fx = x - x0;
      const double top = image(y0, x0) * (1.0 - fx) + image(y0, x1) * fx;
      const double bottom = image(y1, x0) * (1.0 - fx) + image(y1, x1) * fx;
      out(r, c) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

Grid draw_boxes(const Grid& image, std::span<const Detection> boxes, double value) {
  Grid out = image;
  auto plot = [&](int r, int c) {
    if (out.contains(r, c)) out(r, c) = value;
  };
  for (const Detection& d : boxes) {
    const Corners k = d.corners();
    const int x0 = static_cast<int>(std::lround(k.x0));
    const int x1 = static_cast<int>(std::lround(k.x1));
    const int y0 = static_cast<int>(std::lround(k.y0));
    const int y1 = static_cast<int>(std::lround(k.y1));
    for (int x = x0; x <= x1; ++x) {
      plot(y0, x);
      plot(y1, x);
    }
    for (int y = y0; y <= y1; ++y) {
      plot(y, x0);
      plot(y, x1);
    }
  }
  return out;
}

}  // namespace crowdsd
