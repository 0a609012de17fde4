#include "crowdsd/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crowdsd/errors.hpp"

namespace crowdsd {

void DecodeConfig::validate() const {
  if (peak_window < 1 || peak_window % 2 == 0) throw ConfigError("peak window must be odd");
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0)) {
    throw ConfigError("confidence threshold must lie in (0, 1)");
  }
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) throw ConfigError("NMS IoU must lie in (0, 1)");
  if (scales.empty()) throw ConfigError("at least one test scale is required");
  for (double s : scales) {
    if (!(s > 0.0)) throw ConfigError("test scales must be positive");
  }
}

std::vector<Peak> extract_peaks(const Grid& heatmap, double threshold, int window) {
  std::vector<Peak> peaks;
  const int half = window / 2;
  for (int r = 0; r < heatmap.rows(); ++r) {
    for (int c = 0; c < heatmap.cols(); ++c) {
      const double v = heatmap(r, c);
      if (!(v >= threshold)) continue;
      bool is_max = true;
      for (int dr = -half; dr <= half && is_max; ++dr) {
        for (int dc = -half; dc <= half; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (heatmap.contains(rr, cc) && heatmap(rr, cc) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back(Peak{r, c, v});
    }
  }
  return peaks;
}

std::vector<Detection> decode_detections(std::span<const Peak> peaks, const Grid& size_map,
                                         const OffsetMap* offset, int stride) {
  if (offset) {
    require_same_shape(size_map, offset->dx, "decode: offset map shape differs");
    require_same_shape(size_map, offset->dy, "decode: offset map shape differs");
  }
  std::vector<Detection> out;
  out.reserve(peaks.size());
  for (const Peak& p : peaks) {
    if (!size_map.contains(p.row, p.col)) throw BadShape("peak outside the size map");
    const double size = std::exp(size_map(p.row, p.col));
    if (!std::isfinite(size) || !(size > 0.0)) {
      throw NonFiniteSize("non-finite decoded size at cell (" + std::to_string(p.row) + ", " +
                          std::to_string(p.col) + ")");
    }
    double x = p.col;
    double y = p.row;
    if (offset) {
      x += offset->dx(p.row, p.col);
      y += offset->dy(p.row, p.col);
    }
    out.emplace_back(stride * x, stride * y, size, p.score);
  }
  return out;
}

std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score() > detections[b].score();
  });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const Detection& d = detections[i];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (iou(d, k) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> multiscale_merge(const std::vector<std::vector<Detection>>& per_scale,
                                        std::span<const double> scales, double iou_threshold) {
  if (per_scale.size() != scales.size()) throw ShapeMismatch("one detection set per scale");
  std::vector<Detection> pooled;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    const double f = scales[s];
    for (const Detection& d : per_scale[s]) {
      pooled.emplace_back(d.cx() / f, d.cy() / f, d.size() / f, d.score());
    }
  }
  return nms(pooled, iou_threshold);
}

std::size_t count_from_detections(std::span<const Detection> detections,
                                  double threshold) noexcept {
  return static_cast<std::size_t>(std::count_if(
      detections.begin(), detections.end(),
      [threshold](const Detection& d) { return d.score() >= threshold; }));
}

}  // namespace crowdsd
