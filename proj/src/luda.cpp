#include "crowdsd/luda.hpp"

#include <algorithm>
#include <cmath>

#include "crowdsd/errors.hpp"

namespace crowdsd {

void LudaConfig::validate() const {
  if (k < 1) throw ConfigError("luda: k must be >= 1");
  if (!(beta > 0.0)) throw ConfigError("luda: beta must be > 0");
  if (!(rho > 0.0)) throw ConfigError("luda: rho must be > 0");
  if (region_radius_px < 0.0) throw ConfigError("luda: region radius must be >= 0");
  if (!(eta >= 0.0)) throw ConfigError("luda: eta must be >= 0");
  if (!(alpha_cap >= 1.0)) throw ConfigError("luda: alpha cap must be >= 1");
  if (!(default_size_fraction > 0.0)) throw ConfigError("luda: default size fraction must be > 0");
}

double initial_size(const KdTree& index, std::size_t j, const LudaConfig& cfg) {
  if (index.size() < 2) throw IsolatedScene("scene has a single point");
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), index.size() - 1);
  double sum = 0.0;
  for (double d : knn_distances(index, j, k)) sum += cfg.beta * d;
  return sum / static_cast<double>(k);
}

SmoothedSize smoothed_size(const KdTree& index, std::span<const double> all_initial,
                           std::size_t j, const LudaConfig& cfg) {
  const double own = all_initial[j];
  if (cfg.gak_mode) return {own, 1};
  const double radius = cfg.region_radius_px > 0.0 ? cfg.region_radius_px : cfg.rho * own;
  const auto members = index.within(index.point(j), radius);
  double sum = 0.0;
  for (std::size_t l : members) sum += all_initial[l];
  return {sum / static_cast<double>(members.size()), static_cast<int>(members.size())};
}

double crowdedness_factor(int crowdedness, const LudaConfig& cfg) {
  if (crowdedness < 1) throw InvalidArgument("crowdedness must be >= 1");
  return std::min(std::pow(static_cast<double>(crowdedness), cfg.eta), cfg.alpha_cap);
}

std::vector<PseudoBox> generate_pseudo_boxes(const PointScene& scene, const LudaConfig& cfg,
                                             double initial_prior) {
  cfg.validate();
  std::vector<PseudoBox> out;
  if (scene.points.empty()) return out;
  out.reserve(scene.points.size());

  if (scene.points.size() == 1) {
    const double fallback =
        cfg.default_size_fraction * static_cast<double>(std::min(scene.width, scene.height));
    out.push_back(PseudoBox{scene.points[0], std::max(fallback, 1.0), 1, 1.0, initial_prior});
    return out;
  }

  const KdTree index(scene.points);
  std::vector<double> initial(scene.points.size());
  for (std::size_t j = 0; j < initial.size(); ++j) initial[j] = initial_size(index, j, cfg);

  for (std::size_t j = 0; j < initial.size(); ++j) {
    const SmoothedSize s = smoothed_size(index, initial, j, cfg);
    // Coincident annotations give a zero size; substitute one pixel.
    out.push_back(PseudoBox{scene.points[j], s.size > 0.0 ? s.size : 1.0, s.crowdedness,
                            crowdedness_factor(s.crowdedness, cfg), initial_prior});
  }
  return out;
}

}  // namespace crowdsd
