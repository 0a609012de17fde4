#include "crowdsd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crowdsd/decode.hpp"
#include "crowdsd/errors.hpp"

namespace crowdsd {
namespace {

std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

ApResult average_precision(std::span<const ScoredHit> hits, std::size_t ground_truths) {
  ApResult out;
  out.predictions = hits.size();
  if (ground_truths == 0) return out;

  std::vector<double> scores;
  scores.reserve(hits.size());
  for (const auto& h : hits) scores.push_back(h.score);
  const auto order = rank_by_score(scores);

  std::size_t tp = 0;
  out.curve.reserve(hits.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (hits[order[k]].hit) ++tp;
    out.curve.push_back({static_cast<double>(tp) / static_cast<double>(ground_truths),
                         static_cast<double>(tp) / static_cast<double>(k + 1)});
  }
  out.true_positives = tp;

  // Envelope from the right, then integrate over recall steps.
  std::vector<double> envelope(out.curve.size());
  double running = 0.0;
  for (std::size_t k = out.curve.size(); k-- > 0;) {
    running = std::max(running, out.curve[k].precision);
    envelope[k] = running;
  }
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < out.curve.size(); ++k) {
    out.ap += (out.curve[k].recall - prev_recall) * envelope[k];
    prev_recall = out.curve[k].recall;
  }
  return out;
}

ApResult detection_ap(const std::vector<std::vector<Detection>>& detections,
                      const std::vector<std::vector<Box>>& ground_truth, double iou_threshold) {
  if (detections.size() != ground_truth.size()) {
    throw ShapeMismatch("detections and ground truth cover different image counts");
  }
  std::size_t total_gt = 0;
  for (const auto& g : ground_truth) total_gt += g.size();
  if (total_gt == 0) throw NoGroundTruth("detection AP needs ground-truth boxes");

  struct Ref {
    std::size_t image;
    std::size_t index;
  };
  std::vector<Ref> refs;
  std::vector<double> scores;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t d = 0; d < detections[i].size(); ++d) {
      refs.push_back({i, d});
      scores.push_back(detections[i][d].score());
    }
  }
  const auto order = rank_by_score(scores);

  std::vector<std::vector<bool>> claimed(ground_truth.size());
  for (std::size_t i = 0; i < ground_truth.size(); ++i) claimed[i].assign(ground_truth[i].size(), false);

  std::vector<ScoredHit> hits;
  hits.reserve(order.size());
  for (std::size_t idx : order) {
    const Ref r = refs[idx];
    const Detection& det = detections[r.image][r.index];
    double best = 0.0;
    std::size_t best_gt = ground_truth[r.image].size();
    for (std::size_t g = 0; g < ground_truth[r.image].size(); ++g) {
      if (claimed[r.image][g]) continue;
      const double o = iou(det, ground_truth[r.image][g]);
      if (o > best) {
        best = o;
        best_gt = g;
      }
    }
    const bool hit = best_gt < ground_truth[r.image].size() && best > iou_threshold;
    if (hit) claimed[r.image][best_gt] = true;
    hits.push_back({det.score(), hit});
  }
  // `hits` is already ranked; stable ranking inside average_precision keeps it.
  return average_precision(hits, total_gt);
}

double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw ShapeMismatch("count sequences differ in length");
  if (predicted.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += std::fabs(predicted[i] - truth[i]);
  return sum / static_cast<double>(predicted.size());
}

CountingErrors counting_errors(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw ShapeMismatch("count sequences differ in length");
  CountingErrors out;
  if (predicted.empty()) return out;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double rel_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (truth[i] == 0.0) throw ZeroGroundTruthCount("NAE is undefined for an empty image");
    const double e = predicted[i] - truth[i];
    abs_sum += std::fabs(e);
    sq_sum += e * e;
    rel_sum += std::fabs(e) / truth[i];
  }
  const double n = static_cast<double>(predicted.size());
  out.mae = abs_sum / n;
  out.rmse = std::sqrt(sq_sum / n);
  out.nae = rel_sum / n;
  return out;
}

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t rows = cost.size();
  if (rows == 0) return {};
  const std::size_t cols = cost[0].size();
  for (const auto& row : cost) {
    if (row.size() != cols) throw ShapeMismatch("ragged cost matrix");
  }
  if (cols == 0) return std::vector<int>(rows, -1);

  if (rows > cols) {
    std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) t[c][r] = cost[r][c];
    }
    const auto by_col = solve_assignment(t);
    std::vector<int> out(rows, -1);
    for (std::size_t c = 0; c < cols; ++c) {
      if (by_col[c] >= 0) out[static_cast<std::size_t>(by_col[c])] = static_cast<int>(c);
    }
    return out;
  }

  // Shortest augmenting paths with row/column potentials (1-based, column 0
  // is the virtual source).
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = rows;
  const std::size_t m = cols;
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

MatchResult localization_match(std::span<const Point2> predictions,
                               std::span<const Point2> ground_truth) {
  MatchResult out;
  std::vector<std::vector<double>> cost(predictions.size(),
                                        std::vector<double>(ground_truth.size()));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t j = 0; j < ground_truth.size(); ++j) {
      cost[i][j] = distance(predictions[i], ground_truth[j]);
    }
  }
  const auto assigned = solve_assignment(cost);
  std::vector<bool> gt_used(ground_truth.size(), false);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (i < assigned.size() && assigned[i] >= 0) {
      const auto g = static_cast<std::size_t>(assigned[i]);
      out.pairs.push_back({i, g, cost[i][g]});
      gt_used[g] = true;
    } else {
      out.unmatched_pred.push_back(i);
    }
  }
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    if (!gt_used[g]) out.unmatched_gt.push_back(g);
  }
  return out;
}

LocalizationResult localization_ap_mle(const std::vector<std::vector<Detection>>& predictions,
                                       const std::vector<MatchResult>& matches,
                                       std::size_t ground_truths, double distance_threshold) {
  if (predictions.size() != matches.size()) {
    throw ShapeMismatch("predictions and matches cover different image counts");
  }
  LocalizationResult out;
  std::vector<ScoredHit> hits;
  double dist_sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::vector<double> pair_distance(predictions[i].size(), -1.0);
    for (const auto& pair : matches[i].pairs) {
      if (pair.pred >= predictions[i].size()) throw ShapeMismatch("match refers to a missing prediction");
      pair_distance[pair.pred] = pair.distance;
      dist_sum += pair.distance;
      ++out.matched_pairs;
    }
    for (std::size_t d = 0; d < predictions[i].size(); ++d) {
      const bool hit = pair_distance[d] >= 0.0 && pair_distance[d] < distance_threshold;
      hits.push_back({predictions[i][d].score(), hit});
      if (hit) {
        ++out.true_positives;
      } else {
        ++out.false_positives;
      }
    }
  }
  const ApResult ap = average_precision(hits, ground_truths);
  out.ap = ap.ap;
  out.curve = ap.curve;
  out.mle = out.matched_pairs > 0 ? dist_sum / static_cast<double>(out.matched_pairs) : 0.0;
  return out;
}

double acceptance_radius(const Box& gt) noexcept {
  return std::sqrt(2.0 * gt.size() * gt.size()) / 2.0;
}

PrfResult nwpu_prf(std::span<const Detection> predictions, std::span<const Box> ground_truth) {
  PrfResult out;
  out.predictions = predictions.size();
  out.ground_truths = ground_truth.size();

  std::vector<double> scores;
  for (const auto& p : predictions) scores.push_back(p.score());
  const auto order = rank_by_score(scores);
  std::vector<bool> used(ground_truth.size(), false);
  for (std::size_t idx : order) {
    const Point2 c = predictions[idx].center();
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_gt = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (used[g]) continue;
      const double d = distance(c, ground_truth[g].center());
      if (d <= acceptance_radius(ground_truth[g]) && d < best) {
        best = d;
        best_gt = g;
      }
    }
    if (best_gt < ground_truth.size()) {
      used[best_gt] = true;
      ++out.true_positives;
    }
  }
  const double tp = static_cast<double>(out.true_positives);
  out.precision = out.predictions > 0 ? tp / static_cast<double>(out.predictions) : 0.0;
  out.recall = out.ground_truths > 0 ? tp / static_cast<double>(out.ground_truths) : 0.0;
  const double s = out.precision + out.recall;
  out.f1 = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

PrfResult nwpu_prf(const std::vector<std::vector<Detection>>& predictions,
                   const std::vector<std::vector<Box>>& ground_truth) {
  if (predictions.size() != ground_truth.size()) {
    throw ShapeMismatch("predictions and ground truth cover different image counts");
  }
  PrfResult out;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const PrfResult r = nwpu_prf(predictions[i], ground_truth[i]);
    out.true_positives += r.true_positives;
    out.predictions += r.predictions;
    out.ground_truths += r.ground_truths;
  }
  const double tp = static_cast<double>(out.true_positives);
  out.precision = out.predictions > 0 ? tp / static_cast<double>(out.predictions) : 0.0;
  out.recall = out.ground_truths > 0 ? tp / static_cast<double>(out.ground_truths) : 0.0;
  const double s = out.precision + out.recall;
  out.f1 = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

double threshold_search(const std::vector<std::vector<Detection>>& detections,
                        std::span<const double> truth_counts, std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("threshold grid must not be empty");
  if (detections.size() != truth_counts.size()) {
    throw ShapeMismatch("detections and counts cover different image counts");
  }
  if (std::all_of(truth_counts.begin(), truth_counts.end(), [](double c) { return c == 0.0; })) {
    return std::nextafter(1.0, 0.0);
  }
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  double best_t = sorted.front();
  double best_mae = std::numeric_limits<double>::infinity();
  std::vector<double> counts(detections.size());
  for (double t : sorted) {
    for (std::size_t i = 0; i < detections.size(); ++i) {
      counts[i] = static_cast<double>(count_from_detections(detections[i], t));
    }
    const double mae = mean_absolute_error(counts, truth_counts);
    if (mae < best_mae) {
      best_mae = mae;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace crowdsd
