#pragma once

#include <span>
#include <vector>

#include "crowdsd/geometry.hpp"
#include "crowdsd/grid.hpp"
#include "crowdsd/raster.hpp"

namespace crowdsd {

struct DecodeConfig {
  int peak_window = 3;
  double confidence_threshold = 0.4;
  double nms_iou = 0.3;
  std::vector<double> scales = {0.5, 1.0, 2.0};

  void validate() const;
};

struct Peak {
  int row = 0;
  int col = 0;
  double score = 0.0;
};

// Cells equal to the maximum of their window and >= threshold, in row-major
// order. Plateaus yield every tied cell.
std::vector<Peak> extract_peaks(const Grid& heatmap, double threshold, int window = 3);

// center = stride * (cell + offset), size = exp(size_map), score = peak value.
// Throws NonFiniteSize when exp overflows or the map holds NaN.
std::vector<Detection> decode_detections(std::span<const Peak> peaks, const Grid& size_map,
                                         const OffsetMap* offset, int stride);

// Greedy suppression in descending score order (ties keep input order); a
// box is dropped when its IoU with any kept box exceeds the threshold.
std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold);

// Divides each scale's detections by its factor, pools them and runs NMS.
std::vector<Detection> multiscale_merge(const std::vector<std::vector<Detection>>& per_scale,
                                        std::span<const double> scales, double iou_threshold);

std::size_t count_from_detections(std::span<const Detection> detections,
                                  double threshold) noexcept;

}  // namespace crowdsd
