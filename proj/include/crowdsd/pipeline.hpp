#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crowdsd/config.hpp"
#include "crowdsd/detector.hpp"
#include "crowdsd/metrics.hpp"
#include "crowdsd/oracle.hpp"
#include "crowdsd/refinement.hpp"
#include "crowdsd/scene.hpp"

namespace crowdsd {

// LUDA (or GAK when cfg.gak_mode) pseudo boxes for every scene.
PseudoBoxStore make_pseudo_store(std::span<const PointScene> scenes, const LudaConfig& cfg,
                                 double initial_prior);

// Supervision maps for one stored image. With `crowdedness_loss` off every
// alpha is one.
SupervisionMaps supervision_for(const ImageRecord& record, int height, int width,
                                const RunConfig& cfg);

struct SceneLoss {
  double total = 0.0;
  double center = 0.0;
  double size = 0.0;
  double offset = 0.0;
  PredictionGrads grads;  // d total / d predicted maps
};

// Combined objective for one scene's predictions. Throws NoPositives.
SceneLoss scene_loss(const Predictions& pred, const SupervisionMaps& sup, const LossConfig& cfg);

// Detector output read at each annotated center: exp(size map) and heatmap.
std::vector<BoxPrediction> box_predictions(const Predictions& pred, const ImageRecord& record,
                                           int stride);

struct EpochLog {
  int epoch = 0;  // 0-based
  double loss = 0.0;
  double center = 0.0;
  double size = 0.0;
  double offset = 0.0;
  std::size_t scenes = 0;
  std::size_t skipped = 0;
  std::size_t refined = 0;
  BucketFractions buckets;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainState {
  Checkpoint checkpoint;  // checkpoint.epoch = completed epochs
  PseudoBoxStore store;
  std::vector<EpochLog> log;
};

using EpochHook = std::function<void(const TrainState&)>;

// Fresh state: seeded detector, optimizer, and LUDA store at the initial
// prior. Ground-truth boxes on `scenes` are ignored.
TrainState init_training(const RunConfig& cfg, std::span<const PointScene> scenes);

// Runs epochs state.checkpoint.epoch .. cfg.epochs - 1, calling `hook`
// after each. Per scene: supervision from the store, forward, loss,
// refinement from the same forward pass, backward; one optimizer step per
// batch on the mean gradient. Throws DivergedLoss on a non-finite loss.
void train(const RunConfig& cfg, std::span<const PointScene> scenes, TrainState& state,
           const EpochHook& hook = {});

// Scene order for an epoch; depends only on (seed, epoch, n).
std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n);

// Multi-scale detection: decode each scale at `score_threshold`, map back
// to the input frame, merge with one NMS.
std::vector<Detection> detect(const DetectorParams& params, const Grid& image,
                              const DecodeConfig& cfg, double score_threshold);

std::vector<std::vector<Detection>> detect_all(const DetectorParams& params,
                                               std::span<const PointScene> scenes,
                                               const DecodeConfig& cfg, double score_threshold);

// Full metrics from precomputed detections (decoded at cfg.ap_score_threshold).
// The counting threshold is searched on the validation detections; loc-AP,
// MLE and precision/recall use the test detections above that threshold.
// Throws MissingGroundTruth when a test scene has no boxes.
MetricsReport evaluate_detections(const std::vector<std::vector<Detection>>& test_detections,
                                  std::span<const PointScene> test,
                                  const std::vector<std::vector<Detection>>& val_detections,
                                  std::span<const PointScene> val, const RunConfig& cfg);

MetricsReport evaluate(const DetectorParams& params, std::span<const PointScene> test,
                       std::span<const PointScene> val, const RunConfig& cfg);

// Pseudo boxes of a store as scored detections (score = prior), aligned
// with `scenes` by image id.
std::vector<std::vector<Detection>> store_boxes(const PseudoBoxStore& store,
                                                std::span<const PointScene> scenes);

struct AuditRow {
  std::string name;
  std::map<double, double> ap;  // IoU threshold -> AP
};

AuditRow audit_store(const std::string& name, const PseudoBoxStore& store,
                     std::span<const PointScene> scenes, std::span<const double> ious);

// GAK, LUDA and (optionally) refined stores scored against ground truth.
std::vector<AuditRow> audit_pseudo_sizes(std::span<const PointScene> scenes, const LudaConfig& luda,
                                         const PseudoBoxStore* refined,
                                         std::span<const double> ious);

struct AblationCell {
  bool crowdedness_loss = false;
  bool refinement = false;
  MetricsReport report;
  double seconds = 0.0;  // wall time, not part of any determinism check
};

// Trains and evaluates all four module combinations from the same seed,
// ordered neither, loss only, refine only, both.
std::vector<AblationCell> run_ablation(const RunConfig& base, std::span<const PointScene> train_set,
                                       std::span<const PointScene> val,
                                       std::span<const PointScene> test);

// Refinement dynamics without a network. `store` must be freshly
// initialized; fractions count priors above the initial prior.
SimulationResult run_oracle_simulation(const RunConfig& cfg, PseudoBoxStore& store);

}  // namespace crowdsd
