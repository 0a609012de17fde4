#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdsd/luda.hpp"

namespace crowdsd {

inline constexpr double kInitialPrior = 0.6;

// Crowdedness intervals [0,1], (1,4], (4,14], (14,inf). A crowdedness of
// exactly 14 belongs to the third bucket.
inline constexpr std::size_t kBucketCount = 4;
std::size_t crowdedness_bucket(int crowdedness) noexcept;
const char* bucket_label(std::size_t bucket) noexcept;

struct StoredBox {
  PseudoBox box;
  int last_update_epoch = -1;  // -1: never refined

  friend bool operator==(const StoredBox&, const StoredBox&) = default;
};

struct ImageRecord {
  std::string image_id;
  std::vector<StoredBox> boxes;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// What the detector says about annotation j: predicted size at the annotated
// center and the center-heatmap posterior there.
struct BoxPrediction {
  double size = 0.0;
  double posterior = 0.0;
};

struct RefineSummary {
  std::size_t updated = 0;
  std::size_t unchanged = 0;
};

using BucketFractions = std::array<std::optional<double>, kBucketCount>;

// Pseudo boxes of every training image, aligned one-to-one with their
// annotations. Box counts and centers never change; priors only grow.
class PseudoBoxStore {
 public:
  PseudoBoxStore() = default;

  void add_image(std::string image_id, std::span<const PseudoBox> boxes);

  std::size_t image_count() const noexcept { return images_.size(); }
  std::size_t box_count() const noexcept;
  const std::vector<ImageRecord>& images() const noexcept { return images_; }
  const ImageRecord& image(const std::string& image_id) const;
  bool contains(const std::string& image_id) const { return lookup_.count(image_id) != 0; }

  int epoch() const noexcept { return epoch_; }
  void set_epoch(int epoch) noexcept { epoch_ = epoch; }

  void init_priors(double p0);

  // Confidence-gated update: box j takes the prediction (size and prior) iff
  // its posterior is strictly greater than its current prior.
  RefineSummary refine(const std::string& image_id, std::span<const BoxPrediction> predictions);

  // Per-bucket fraction of boxes whose prior exceeds `threshold`; empty
  // buckets are absent.
  BucketFractions bucket_stats(double threshold) const;

  friend bool operator==(const PseudoBoxStore& a, const PseudoBoxStore& b) {
    return a.epoch_ == b.epoch_ && a.images_ == b.images_;
  }

  // Restores a record verbatim (used by deserialization).
  void restore_image(ImageRecord record);

 private:
  ImageRecord& mutable_image(const std::string& image_id);

  std::vector<ImageRecord> images_;
  std::map<std::string, std::size_t> lookup_;
  int epoch_ = 0;
};

}  // namespace crowdsd
