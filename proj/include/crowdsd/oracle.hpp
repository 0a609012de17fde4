#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "crowdsd/refinement.hpp"

namespace crowdsd {

// Stand-in for a trained detector when studying refinement dynamics. Box j
// gets a saturating posterior curve
//   p_t = p_inf * (1 - exp(-t / tau)),  tau = tau_base * |R|^tau_exponent * jitter
// and a size prediction equal to the stored size times log-normal noise whose
// spread decays as exp(-t / size_noise_tau). Only crowdedness is read at
// construction, so a model rebuilt from a partly refined store is the same.
struct OracleConfig {
  double tau_base = 2.0;
  double tau_exponent = 0.5;  // 0 gives crowdedness-independent dynamics
  double tau_jitter = 0.25;   // log-normal spread of tau per box
  double p_inf_min = 0.8;
  double p_inf_max = 0.95;
  double size_noise = 0.0;
  double size_noise_tau = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OracleBox {
  double tau = 1.0;
  double p_inf = 1.0;
};

class OracleModel {
 public:
  OracleModel(const OracleConfig& cfg, const PseudoBoxStore& store);

  const OracleConfig& config() const noexcept { return cfg_; }
  const OracleBox& box(std::size_t image, std::size_t j) const { return boxes_.at(image).at(j); }

  double posterior(std::size_t image, std::size_t j, double t) const;
  // Predictions for every box of image `image` at time t (t >= 1).
  std::vector<BoxPrediction> predict(const PseudoBoxStore& store, std::size_t image, double t) const;

 private:
  OracleConfig cfg_;
  std::vector<std::vector<OracleBox>> boxes_;
};

struct SimulationResult {
  std::vector<BucketFractions> per_epoch;  // index e: after epoch e + 1
  // First epoch (1-based) at which a bucket's fraction exceeds 0.5.
  std::array<std::optional<int>, kBucketCount> first_crossing;
};

// Runs `epochs` refinement sweeps; fractions count priors above `threshold`.
SimulationResult simulate_refinement(const OracleModel& oracle, PseudoBoxStore& store, int epochs,
                                     double threshold = kInitialPrior);

// Crossing epochs non-decreasing over populated buckets (a bucket that
// never crosses counts as crossing after the last epoch) and the lowest
// populated bucket ends with the largest fraction.
bool order_aware(const SimulationResult& result);

}  // namespace crowdsd
