#pragma once

#include <cstdint>
#include <vector>

#include "crowdsd/scene.hpp"

namespace crowdsd {

enum class ClusterLayout { Grid, Jitter, Hex };

// Parameters for one synthetic crowd scene. Clusters are rectangular
// lattices of objects whose size is the cluster spacing times `size_ratio`;
// sparse objects are scattered with a clearance from everything else.
struct SceneSpec {
  int width = 96;
  int height = 96;

  int min_clusters = 1;
  int max_clusters = 2;
  int min_cluster_side = 3;  // lattice rows/cols drawn from [min, max]
  int max_cluster_side = 4;
  // Per-cluster spacing is drawn from [spacing_min, spacing_max] unless
  // `cluster_spacings` lists one spacing per cluster explicitly.
  double spacing_min = 6.0;
  double spacing_max = 10.0;
  std::vector<double> cluster_spacings;
  ClusterLayout layout = ClusterLayout::Jitter;
  double position_jitter = 0.05;  // per-axis fraction of spacing, Jitter only
  double cluster_gap = 4.0;      // extra pixels kept between clusters

  int min_sparse = 3;
  int max_sparse = 6;
  double sparse_clearance = 18.0;
  // Sparse object sizes; when both are zero they follow the cluster size law
  // (spacing range times `size_ratio`).
  double sparse_size_min = 0.0;
  double sparse_size_max = 0.0;

  double size_ratio = 0.8;
  double amplitude_min = 0.7;
  double amplitude_max = 1.0;
  double noise = 0.05;
  bool snap_to_pixels = true;
  int max_attempts = 200;

  std::uint64_t seed = 0;

  void validate() const;
};

// Raised-cosine-like bump amp * (1 - (r/R)^2)^2 inside R = size / 2.
double blob_profile(double r, double size, double amplitude) noexcept;

// Deterministic in `spec.seed`. Throws InfeasibleSpec when placement fails.
PointScene generate_scene(const SceneSpec& spec, const std::string& image_id);

// `count` scenes named scene_0000.. with per-scene seeds derived from `seed`.
std::vector<PointScene> generate_dataset(SceneSpec spec, std::size_t count, std::uint64_t seed);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

struct DatasetSplit {
  std::vector<PointScene> train;
  std::vector<PointScene> val;
  std::vector<PointScene> test;
};

// Contiguous 80/10/10 split by scene order.
DatasetSplit split_dataset(std::vector<PointScene> scenes);

}  // namespace crowdsd
