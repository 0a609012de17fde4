#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "crowdsd/geometry.hpp"

namespace crowdsd {

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct ApResult {
  double ap = 0.0;
  std::vector<PrPoint> curve;  // one point per ranked prediction
  std::size_t true_positives = 0;
  std::size_t predictions = 0;
};

// A ranked prediction reduced to (score, hit-or-miss).
struct ScoredHit {
  double score = 0.0;
  bool hit = false;
};

// All-points interpolated AP: area under the running-max precision envelope.
// Ties keep input order. `ground_truths` is the recall denominator.
ApResult average_precision(std::span<const ScoredHit> hits, std::size_t ground_truths);

// Detections ranked by score across images; each claims the highest-IoU
// unclaimed ground truth in its image and is a hit iff that IoU exceeds the
// threshold. Throws NoGroundTruth when no image has a ground-truth box.
ApResult detection_ap(const std::vector<std::vector<Detection>>& detections,
                      const std::vector<std::vector<Box>>& ground_truth, double iou_threshold);

struct CountingErrors {
  double mae = 0.0;
  double rmse = 0.0;
  double nae = 0.0;
};

double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth);

// Throws ZeroGroundTruthCount when a true count is zero (NAE undefined).
CountingErrors counting_errors(std::span<const double> predicted, std::span<const double> truth);

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double distance = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // sorted by prediction index
  std::vector<std::size_t> unmatched_pred;
  std::vector<std::size_t> unmatched_gt;
};

// Minimum total-distance one-to-one assignment of min(|pred|, |gt|) pairs.
MatchResult localization_match(std::span<const Point2> predictions,
                               std::span<const Point2> ground_truth);

// Rectangular assignment problem: minimum-cost column for every row when
// rows <= cols (transposed internally otherwise). Returns, for each row, the
// assigned column or -1.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

struct LocalizationResult {
  double ap = 0.0;
  double mle = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t matched_pairs = 0;
  std::vector<PrPoint> curve;
};

// A matched prediction is a hit iff its distance is below the threshold. MLE
// averages the distances of all matched pairs.
LocalizationResult localization_ap_mle(const std::vector<std::vector<Detection>>& predictions,
                                       const std::vector<MatchResult>& matches,
                                       std::size_t ground_truths, double distance_threshold = 20.0);

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t predictions = 0;
  std::size_t ground_truths = 0;
};

// Acceptance radius of a ground-truth box: half its diagonal.
double acceptance_radius(const Box& gt) noexcept;

// Greedy score-descending one-to-one matching: each prediction takes the
// nearest unmatched ground truth whose acceptance radius contains it.
PrfResult nwpu_prf(std::span<const Detection> predictions, std::span<const Box> ground_truth);
PrfResult nwpu_prf(const std::vector<std::vector<Detection>>& predictions,
                   const std::vector<std::vector<Box>>& ground_truth);

// Threshold from `grid` minimizing counting MAE (ties: lowest threshold).
// Returns the largest double below one when every true count is zero.
double threshold_search(const std::vector<std::vector<Detection>>& detections,
                        std::span<const double> truth_counts, std::span<const double> grid);

struct MetricsReport {
  std::map<double, double> ap_by_iou;
  std::map<double, std::vector<PrPoint>> pr_by_iou;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> nae;
  double loc_ap = 0.0;
  double mle = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double count_threshold = 0.0;
  double mean_count = 0.0;
  std::size_t images = 0;
};

}  // namespace crowdsd
