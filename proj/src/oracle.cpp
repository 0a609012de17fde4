#include "crowdsd/oracle.hpp"

#include <cmath>
#include <random>

#include "crowdsd/errors.hpp"
#include "crowdsd/synth.hpp"

namespace crowdsd {

void OracleConfig::validate() const {
  if (!(tau_base > 0.0)) throw ConfigError("oracle: tau_base must be positive");
  if (tau_jitter < 0.0) throw ConfigError("oracle: tau_jitter must be >= 0");
  if (!(p_inf_min >= 0.0 && p_inf_max <= 1.0 && p_inf_min <= p_inf_max)) {
    throw ConfigError("oracle: need 0 <= p_inf_min <= p_inf_max <= 1");
  }
  if (size_noise < 0.0 || !(size_noise_tau > 0.0)) throw ConfigError("oracle: bad size noise");
}

OracleModel::OracleModel(const OracleConfig& cfg, const PseudoBoxStore& store) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const ImageRecord& img : store.images()) {
    std::vector<OracleBox> boxes;
    for (const StoredBox& b : img.boxes) {
      OracleBox o;
      o.tau = cfg_.tau_base * std::pow(static_cast<double>(b.box.crowdedness), cfg_.tau_exponent) *
              std::exp(cfg_.tau_jitter * gauss(rng));
      o.p_inf = cfg_.p_inf_min + (cfg_.p_inf_max - cfg_.p_inf_min) * unit(rng);
      boxes.push_back(o);
    }
    boxes_.push_back(std::move(boxes));
  }
}

double OracleModel::posterior(std::size_t image, std::size_t j, double t) const {
  const OracleBox& o = box(image, j);
  return o.p_inf * (1.0 - std::exp(-t / o.tau));
}

std::vector<BoxPrediction> OracleModel::predict(const PseudoBoxStore& store, std::size_t image,
                                                double t) const {
  const auto& stored = store.images().at(image).boxes;
  const std::size_t n = stored.size();
  if (n != boxes_.at(image).size()) throw MisalignedPredictions("oracle built for another store");
  // Noise depends only on (seed, image, box, t) so predictions are order-free.
  std::mt19937_64 rng(derive_seed(cfg_.seed ^ 0x6f7261636c65ULL,
                                  image * 1000003ULL + static_cast<std::uint64_t>(t)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd = cfg_.size_noise * std::exp(-t / cfg_.size_noise_tau);
  std::vector<BoxPrediction> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double z = gauss(rng);
    out[j].posterior = posterior(image, j, t);
    out[j].size = stored[j].box.size * std::exp(sd * z);
  }
  return out;
}

SimulationResult simulate_refinement(const OracleModel& oracle, PseudoBoxStore& store, int epochs,
                                     double threshold) {
  SimulationResult result;
  for (int e = 0; e < epochs; ++e) {
    store.set_epoch(e);
    const double t = e + 1.0;
    for (std::size_t i = 0; i < store.image_count(); ++i) {
      const auto preds = oracle.predict(store, i, t);
      store.refine(store.images()[i].image_id, preds);
    }
    result.per_epoch.push_back(store.bucket_stats(threshold));
    for (std::size_t k = 0; k < kBucketCount; ++k) {
      const auto& f = result.per_epoch.back()[k];
      if (!result.first_crossing[k] && f && *f > 0.5) result.first_crossing[k] = e + 1;
    }
  }
  return result;
}

bool order_aware(const SimulationResult& result) {
  if (result.per_epoch.empty()) return false;
  const int never = static_cast<int>(result.per_epoch.size()) + 1;
  const BucketFractions& last = result.per_epoch.back();
  int prev = 0;
  std::optional<double> lowest;
  for (std::size_t k = 0; k < kBucketCount; ++k) {
    if (!last[k]) continue;
    const int crossing = result.first_crossing[k].value_or(never);
    if (crossing < prev) return false;
    prev = crossing;
    if (!lowest) {
      lowest = *last[k];
    } else if (*last[k] > *lowest) {
      return false;
    }
  }
  return true;
}

}  // namespace crowdsd
