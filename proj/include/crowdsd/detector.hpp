#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdsd/grid.hpp"
#include "crowdsd/raster.hpp"

namespace crowdsd {

// Description of one parameter tensor inside the flat parameter array.
struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;

  std::size_t count() const noexcept;
  friend bool operator==(const TensorInfo&, const TensorInfo&) = default;
};

// Convolution layer: weights [out, in, k, k] then bias [out].
struct ConvLayer {
  int in = 0;
  int out = 0;
  int kernel = 3;
  int stride = 1;
  std::size_t weight = 0;  // offset of weights in the flat array
  std::size_t bias = 0;    // offset of biases
};

// Small fully-convolutional detector:
//   conv3x3 1->8, 8->16, 16->16 (ReLU each)
//   stride 4 only: two stride-2 conv3x3 16->16 (ReLU)
//   heads (1x1): center -> logistic, size -> linear log-size,
//   stride 4 only: 2-channel logistic offset.
class DetectorParams {
 public:
  DetectorParams() = default;

  // He-scaled weights from `seed`, zero biases, center bias logit(0.01).
  static DetectorParams create(int stride, std::uint64_t seed);
  // Same shapes with every value zero.
  static DetectorParams zeros(int stride);

  int stride() const noexcept { return stride_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<TensorInfo>& manifest() const noexcept { return manifest_; }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t count() const noexcept { return values_.size(); }

  const std::vector<ConvLayer>& trunk() const noexcept { return trunk_; }
  const ConvLayer& center_head() const noexcept { return center_head_; }
  const ConvLayer& size_head() const noexcept { return size_head_; }
  const std::optional<ConvLayer>& offset_head() const noexcept { return offset_head_; }

  // Bumped by every optimizer step; forward caches remember it.
  std::uint64_t version() const noexcept { return version_; }
  void touch() noexcept { ++version_; }

  void set_size_bias(double log_size);

  // Rebuilds a parameter set from a manifest and values (checkpoint loading).
  static DetectorParams from_parts(int stride, std::uint64_t seed,
                                   const std::vector<TensorInfo>& manifest,
                                   std::vector<double> values);

  friend bool operator==(const DetectorParams& a, const DetectorParams& b) {
    return a.stride_ == b.stride_ && a.seed_ == b.seed_ && a.manifest_ == b.manifest_ &&
           a.values_ == b.values_;
  }

 private:
  static DetectorParams layout(int stride);
  ConvLayer add_layer(const std::string& name, int in, int out, int kernel, int layer_stride);

  int stride_ = 1;
  std::uint64_t seed_ = 0;
  std::vector<TensorInfo> manifest_;
  std::vector<double> values_;
  std::vector<ConvLayer> trunk_;
  ConvLayer center_head_;
  ConvLayer size_head_;
  std::optional<ConvLayer> offset_head_;
  std::uint64_t version_ = 0;
};

struct Predictions {
  Grid heatmap;   // probabilities in (0, 1)
  Grid size_map;  // log-size
  std::optional<OffsetMap> offset;
};

// Gradients of a scalar loss with respect to each predicted map.
struct PredictionGrads {
  Grid heatmap;
  Grid size_map;
  std::optional<OffsetMap> offset;
};

// Activations of one [channels, rows, cols] feature volume.
struct Volume {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
};

struct ForwardCache {
  std::uint64_t version = 0;
  int stride = 0;
  std::size_t param_count = 0;
  std::vector<Volume> padded_inputs;  // one per trunk layer
  std::vector<Volume> outputs;        // post-ReLU, one per trunk layer
};

struct ForwardResult {
  Predictions predictions;
  ForwardCache cache;
};

// Throws BadShape for images smaller than 8 or not divisible by the stride.
ForwardResult forward(const DetectorParams& params, const Grid& image);

// Gradient of the loss with respect to every parameter, in flat-array order.
// Throws StaleCache when the parameters changed since the forward pass.
std::vector<double> backward(const DetectorParams& params, const ForwardCache& cache,
                             const PredictionGrads& grads);

struct AdamState {
  double learning_rate = 7.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static AdamState for_params(const DetectorParams& params, double learning_rate = 7.5e-4);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One adaptive-moment update. Throws ShapeMismatch when sizes disagree.
void adam_step(DetectorParams& params, const std::vector<double>& grads, AdamState& state);

// Binary checkpoint; byte layout documented in docs/checkpoint_format.md.
struct Checkpoint {
  DetectorParams params;
  std::optional<AdamState> optimizer;
  std::int64_t epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace crowdsd
