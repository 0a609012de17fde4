#include <gtest/gtest.h>

#include "crowdsd/metrics.hpp"
#include "crowdsd/pipeline.hpp"
#include "crowdsd/synth.hpp"

namespace crowdsd {
namespace {

SceneSpec small_spec() {
  SceneSpec spec;
  spec.width = 48;
  spec.height = 48;
  spec.min_clusters = 1;
  spec.max_clusters = 1;
  spec.min_cluster_side = 3;
  spec.max_cluster_side = 3;
  spec.spacing_min = 6;
  spec.spacing_max = 8;
  spec.min_sparse = 1;
  spec.max_sparse = 2;
  spec.sparse_clearance = 12;
  return spec;
}

RunConfig single_scene_config(std::uint64_t seed, int steps) {
  RunConfig cfg;
  cfg.epochs = steps;
  cfg.batch_size = 1;
  cfg.refinement = false;
  cfg.seed = seed;
  cfg.decode.scales = {1.0};
  return cfg;
}

TEST(Training, TwoHundredStepsHalveTheLossForAlmostEverySeed) {
  constexpr int kSeeds = 20;
  int ok = 0;
  for (int s = 0; s < kSeeds; ++s) {
    SceneSpec spec = small_spec();
    spec.seed = derive_seed(99, static_cast<std::uint64_t>(s));
    const std::vector<PointScene> scenes = {generate_scene(spec, "one")};
    const RunConfig cfg = single_scene_config(static_cast<std::uint64_t>(s), 200);
    TrainState state = init_training(cfg, scenes);
    train(cfg, scenes, state);
    ASSERT_EQ(state.log.size(), 200u);
    const double first = state.log.front().loss;
    const double last = state.log.back().loss;
    if (last <= 0.5 * first) ++ok;
  }
  EXPECT_GE(ok, 19) << ok << " of " << kSeeds << " seeds halved the loss";
}

TEST(Training, OverfitsOneSceneToPerfectLocalization) {
  SceneSpec spec = small_spec();
  spec.seed = 5;
  const std::vector<PointScene> scenes = {generate_scene(spec, "one")};
  const RunConfig cfg = single_scene_config(1, 400);
  TrainState state = init_training(cfg, scenes);
  train(cfg, scenes, state);

  const auto det = detect(state.checkpoint.params, *scenes[0].image, cfg.decode,
                          cfg.decode.confidence_threshold);
  std::vector<Point2> centers;
  for (const Detection& d : det) centers.push_back(d.center());
  const MatchResult m = localization_match(centers, scenes[0].points);
  const LocalizationResult r = localization_ap_mle({det}, {m}, scenes[0].points.size(), 20.0);
  EXPECT_EQ(r.ap, 1.0);
  EXPECT_EQ(det.size(), scenes[0].points.size());
}

TEST(Training, EpochOrderIsAPermutationFixedBySeed) {
  const auto a = epoch_order(3, 4, 50);
  EXPECT_EQ(a, epoch_order(3, 4, 50));
  EXPECT_NE(a, epoch_order(3, 5, 50));
  std::vector<bool> seen(50, false);
  for (std::size_t i : a) {
    ASSERT_LT(i, 50u);
    EXPECT_FALSE(seen[i]);
    seen[i] = true;
  }
}

}  // namespace
}  // namespace crowdsd
