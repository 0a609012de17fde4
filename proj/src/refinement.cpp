#include "crowdsd/refinement.hpp"

#include <cmath>

#include "crowdsd/errors.hpp"

namespace crowdsd {

std::size_t crowdedness_bucket(int crowdedness) noexcept {
  if (crowdedness <= 1) return 0;
  if (crowdedness <= 4) return 1;
  if (crowdedness <= 14) return 2;
  return 3;
}

const char* bucket_label(std::size_t bucket) noexcept {
  static constexpr const char* kLabels[kBucketCount] = {"[0,1]", "(1,4]", "(4,14]", "(14,inf)"};
  return bucket < kBucketCount ? kLabels[bucket] : "?";
}

void PseudoBoxStore::add_image(std::string image_id, std::span<const PseudoBox> boxes) {
  ImageRecord record{std::move(image_id), {}};
  record.boxes.reserve(boxes.size());
  for (const auto& b : boxes) record.boxes.push_back(StoredBox{b, -1});
  restore_image(std::move(record));
}

void PseudoBoxStore::restore_image(ImageRecord record) {
  if (lookup_.count(record.image_id)) {
    throw InvalidArgument("duplicate image id in store: " + record.image_id);
  }
  lookup_.emplace(record.image_id, images_.size());
  images_.push_back(std::move(record));
}

std::size_t PseudoBoxStore::box_count() const noexcept {
  std::size_t n = 0;
  for (const auto& img : images_) n += img.boxes.size();
  return n;
}

const ImageRecord& PseudoBoxStore::image(const std::string& image_id) const {
  const auto it = lookup_.find(image_id);
  if (it == lookup_.end()) throw InvalidArgument("unknown image id: " + image_id);
  return images_[it->second];
}

ImageRecord& PseudoBoxStore::mutable_image(const std::string& image_id) {
  const auto it = lookup_.find(image_id);
  if (it == lookup_.end()) throw InvalidArgument("unknown image id: " + image_id);
  return images_[it->second];
}

void PseudoBoxStore::init_priors(double p0) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw InvalidArgument("prior must lie in [0, 1]");
  for (auto& img : images_) {
    for (auto& b : img.boxes) {
      b.box.prior = p0;
      b.last_update_epoch = -1;
    }
  }
}

RefineSummary PseudoBoxStore::refine(const std::string& image_id,
                                     std::span<const BoxPrediction> predictions) {
  ImageRecord& img = mutable_image(image_id);
  if (predictions.size() != img.boxes.size()) {
    throw MisalignedPredictions("image " + image_id + ": " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(img.boxes.size()) + " boxes");
  }
  RefineSummary summary;
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    StoredBox& stored = img.boxes[j];
    const BoxPrediction& p = predictions[j];
    if (p.posterior > stored.box.prior && p.posterior <= 1.0 && p.size > 0.0 &&
        std::isfinite(p.size)) {
      stored.box.prior = p.posterior;
      stored.box.size = p.size;
      stored.last_update_epoch = epoch_;
      ++summary.updated;
    } else {
      ++summary.unchanged;
    }
  }
  return summary;
}

BucketFractions PseudoBoxStore::bucket_stats(double threshold) const {
  std::array<std::size_t, kBucketCount> total{};
  std::array<std::size_t, kBucketCount> above{};
  for (const auto& img : images_) {
    for (const auto& b : img.boxes) {
      const std::size_t k = crowdedness_bucket(b.box.crowdedness);
      ++total[k];
      if (b.box.prior > threshold) ++above[k];
    }
  }
  BucketFractions out;
  for (std::size_t k = 0; k < kBucketCount; ++k) {
    if (total[k] > 0) out[k] = static_cast<double>(above[k]) / static_cast<double>(total[k]);
  }
  return out;
}

}  // namespace crowdsd
