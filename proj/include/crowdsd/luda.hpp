#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "crowdsd/geometry.hpp"
#include "crowdsd/kdtree.hpp"
#include "crowdsd/scene.hpp"

namespace crowdsd {

// Parameters of the locally-uniform pseudo-size generator.
struct LudaConfig {
  int k = 2;             // neighbors averaged for the initial size
  double beta = 1.0;     // scale applied to neighbor distances
  double rho = 2.0;      // region radius multiplier: r_j = rho * initial size
  // When positive, regions use this fixed radius in pixels instead of the
  // rho rule.
  double region_radius_px = 0.0;
  double eta = 1.0;      // crowdedness exponent
  double alpha_cap = std::numeric_limits<double>::infinity();
  bool gak_mode = false;  // skip smoothing (geometry-adaptive baseline)
  // Size used for single-point scenes, as a fraction of min(width, height).
  double default_size_fraction = 0.1;

  void validate() const;
};

struct PseudoBox {
  Point2 point;
  double size = 1.0;
  int crowdedness = 1;  // |R|, points inside the local region incl. itself
  double alpha = 1.0;
  double prior = 0.0;

  friend bool operator==(const PseudoBox&, const PseudoBox&) = default;
};

// Mean of the (up to) k nearest-neighbor distances of point j scaled by beta.
// Uses all available neighbors when fewer than k exist. Throws IsolatedScene
// when point j has no neighbor at all.
double initial_size(const KdTree& index, std::size_t j, const LudaConfig& cfg);

struct SmoothedSize {
  double size = 0.0;
  int crowdedness = 1;
};

// Average of the initial sizes over the circular region around point j.
SmoothedSize smoothed_size(const KdTree& index, std::span<const double> all_initial,
                           std::size_t j, const LudaConfig& cfg);

// min(|R|^eta, alpha_cap).
double crowdedness_factor(int crowdedness, const LudaConfig& cfg);

std::vector<PseudoBox> generate_pseudo_boxes(const PointScene& scene, const LudaConfig& cfg,
                                             double initial_prior);

}  // namespace crowdsd
