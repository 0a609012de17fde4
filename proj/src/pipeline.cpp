#include "crowdsd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "crowdsd/decode.hpp"
#include "crowdsd/errors.hpp"
#include "crowdsd/image_io.hpp"
#include "crowdsd/losses.hpp"
#include "crowdsd/synth.hpp"

namespace crowdsd {
namespace {

std::vector<PointScene> training_view(std::span<const PointScene> scenes) {
  std::vector<PointScene> out;
  out.reserve(scenes.size());
  for (const PointScene& s : scenes) {
    if (!s.image) throw MissingImage("scene " + s.image_id + " has no image");
    if (s.image->rows() != s.height || s.image->cols() != s.width) {
      throw BadShape("scene " + s.image_id + ": image size differs from the record");
    }
    out.push_back(points_only(s));
  }
  return out;
}

const std::vector<Box>& boxes_of(const PointScene& scene) {
  if (!scene.gt_boxes) throw MissingGroundTruth("scene " + scene.image_id + " has no boxes");
  return *scene.gt_boxes;
}

std::vector<std::vector<Box>> ground_truth(std::span<const PointScene> scenes) {
  std::vector<std::vector<Box>> gt;
  gt.reserve(scenes.size());
  for (const PointScene& s : scenes) gt.push_back(boxes_of(s));
  return gt;
}

std::vector<std::vector<Detection>> above(const std::vector<std::vector<Detection>>& dets,
                                          double threshold) {
  std::vector<std::vector<Detection>> out(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (const Detection& d : dets[i]) {
      if (d.score() >= threshold) out[i].push_back(d);
    }
  }
  return out;
}

std::string describe(const SceneLoss& l) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "total=%g center=%g size=%g offset=%g", l.total, l.center,
                l.size, l.offset);
  return buf;
}

}  // namespace

PseudoBoxStore make_pseudo_store(std::span<const PointScene> scenes, const LudaConfig& cfg,
                                 double initial_prior) {
  PseudoBoxStore store;
  for (const PointScene& s : scenes) {
    const auto boxes = generate_pseudo_boxes(points_only(s), cfg, initial_prior);
    store.add_image(s.image_id, boxes);
  }
  return store;
}

SupervisionMaps supervision_for(const ImageRecord& record, int height, int width,
                                const RunConfig& cfg) {
  std::vector<Point2> points;
  std::vector<double> sizes;
  std::vector<double> alphas;
  for (const StoredBox& b : record.boxes) {
    points.push_back(b.box.point);
    sizes.push_back(b.box.size);
    alphas.push_back(cfg.crowdedness_loss ? b.box.alpha : 1.0);
  }
  return build_supervision(points, sizes, alphas, height, width, cfg.stride, cfg.gaussian);
}

SceneLoss scene_loss(const Predictions& pred, const SupervisionMaps& sup, const LossConfig& cfg) {
  SceneLoss out;
  const LossValue c = focal_center_loss(pred.heatmap, sup.heatmap, sup.pos_mask, cfg);
  const LossValue s = crowdedness_size_loss(pred.size_map, sup.size_map, sup.pos_mask, sup.alpha_map);
  out.center = c.value;
  out.size = s.value;
  out.grads.heatmap = c.gradient;
  for (double& g : out.grads.heatmap.values()) g *= cfg.lambda;
  out.grads.size_map = s.gradient;
  std::optional<double> offset;
  if (pred.offset) {
    if (!sup.offset) throw ShapeMismatch("offset predictions without offset targets");
    OffsetLossValue o = offset_loss(*pred.offset, *sup.offset, sup.pos_mask);
    out.offset = o.value;
    offset = o.value;
    out.grads.offset = std::move(o.gradient);
  }
  out.total = combined_loss(out.center, out.size, offset, cfg);
  return out;
}

std::vector<BoxPrediction> box_predictions(const Predictions& pred, const ImageRecord& record,
                                           int stride) {
  std::vector<BoxPrediction> out;
  out.reserve(record.boxes.size());
  for (const StoredBox& b : record.boxes) {
    const Cell cell = cell_of(b.box.point, stride, pred.heatmap.rows(), pred.heatmap.cols());
    out.push_back({std::exp(pred.size_map(cell.row, cell.col)), pred.heatmap(cell.row, cell.col)});
  }
  return out;
}

TrainState init_training(const RunConfig& cfg, std::span<const PointScene> scenes) {
  cfg.validate();
  const auto data = training_view(scenes);
  TrainState state;
  state.store = make_pseudo_store(data, cfg.luda, cfg.initial_prior);
  state.checkpoint.params = DetectorParams::create(cfg.stride, cfg.seed);
  if (cfg.size_bias_init && state.store.box_count() > 0) {
    std::vector<double> logs;
    for (const ImageRecord& img : state.store.images()) {
      for (const StoredBox& b : img.boxes) logs.push_back(std::log(b.box.size));
    }
    const auto mid = logs.begin() + static_cast<std::ptrdiff_t>(logs.size() / 2);
    std::nth_element(logs.begin(), mid, logs.end());
    state.checkpoint.params.set_size_bias(*mid);
  }
  state.checkpoint.optimizer = AdamState::for_params(state.checkpoint.params, cfg.learning_rate);
  state.checkpoint.epoch = 0;
  return state;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

void train(const RunConfig& cfg, std::span<const PointScene> scenes, TrainState& state,
           const EpochHook& hook) {
  cfg.validate();
  const auto data = training_view(scenes);
  for (const PointScene& s : data) {
    if (!state.store.contains(s.image_id) ||
        state.store.image(s.image_id).boxes.size() != s.points.size()) {
      throw MisalignedPredictions("store does not match scene " + s.image_id);
    }
  }
  if (!state.checkpoint.optimizer) {
    state.checkpoint.optimizer = AdamState::for_params(state.checkpoint.params, cfg.learning_rate);
  }
  DetectorParams& params = state.checkpoint.params;
  AdamState& opt = *state.checkpoint.optimizer;
  if (params.stride() != cfg.stride) throw ConfigError("checkpoint stride differs from train.stride");
  const LossConfig loss_cfg = cfg.loss_config();

  std::optional<OracleModel> oracle;
  std::map<std::string, std::size_t> store_index;
  if (cfg.mode == DetectorMode::Oracle) {
    oracle.emplace(cfg.oracle, state.store);
    for (std::size_t i = 0; i < state.store.image_count(); ++i) {
      store_index[state.store.images()[i].image_id] = i;
    }
  }

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = static_cast<int>(state.checkpoint.epoch); epoch < cfg.epochs; ++epoch) {
    state.store.set_epoch(epoch);
    const auto order = epoch_order(cfg.seed, epoch, data.size());
    EpochLog log;
    log.epoch = epoch;

    if (oracle) {
      for (std::size_t idx : order) {
        const PointScene& s = data[idx];
        const auto preds = oracle->predict(state.store, store_index.at(s.image_id), epoch + 1.0);
        log.refined += state.store.refine(s.image_id, preds).updated;
        ++log.scenes;
      }
    } else {
      for (std::size_t start = 0; start < order.size(); start += batch) {
        std::vector<double> acc(params.count(), 0.0);
        std::size_t used = 0;
        for (std::size_t b = start; b < std::min(order.size(), start + batch); ++b) {
          const PointScene& s = data[order[b]];
          const ImageRecord& rec = state.store.image(s.image_id);
          const SupervisionMaps sup = supervision_for(rec, s.height, s.width, cfg);
          if (sup.positives() == 0) {
            ++log.skipped;
            continue;
          }
          ForwardResult fr = forward(params, *s.image);
          const SceneLoss loss = scene_loss(fr.predictions, sup, loss_cfg);
          if (!std::isfinite(loss.total)) {
            throw DivergedLoss("epoch " + std::to_string(epoch) + ", scene " + s.image_id + ": " +
                               describe(loss));
          }
          if (cfg.refinement) {
            const auto preds = box_predictions(fr.predictions, rec, cfg.stride);
            log.refined += state.store.refine(s.image_id, preds).updated;
          }
          const auto g = backward(params, fr.cache, loss.grads);
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
          log.loss += loss.total;
          log.center += loss.center;
          log.size += loss.size;
          log.offset += loss.offset;
          ++log.scenes;
          ++used;
        }
        if (used == 0) continue;
        const double inv = 1.0 / static_cast<double>(used);
        for (double& v : acc) v *= inv;
        adam_step(params, acc, opt);
      }
      if (log.scenes > 0) {
        const double inv = 1.0 / static_cast<double>(log.scenes);
        log.loss *= inv;
        log.center *= inv;
        log.size *= inv;
        log.offset *= inv;
      }
    }
    log.buckets = state.store.bucket_stats(cfg.initial_prior);
    state.log.push_back(log);
    state.checkpoint.epoch = epoch + 1;
    if (hook) hook(state);
  }
}

std::vector<Detection> detect(const DetectorParams& params, const Grid& image,
                              const DecodeConfig& cfg, double score_threshold) {
  cfg.validate();
  const int stride = params.stride();
  std::vector<std::vector<Detection>> per_scale;
  std::vector<double> factors;
  for (double f : cfg.scales) {
    Grid scaled;
    double factor = 1.0;
    if (f == 1.0) {
      scaled = image;
    } else {
      const auto fit = [&](int n) {
        const long v = std::lround(n * f / stride) * stride;
        return static_cast<int>(std::max<long>(v, 8));
      };
      const int rows = fit(image.rows());
      const int cols = fit(image.cols());
      scaled = resize_bilinear(image, rows, cols);
      factor = static_cast<double>(rows) / image.rows();
    }
    const ForwardResult fr = forward(params, scaled);
    const auto peaks = extract_peaks(fr.predictions.heatmap, score_threshold, cfg.peak_window);
    const OffsetMap* offset = fr.predictions.offset ? &*fr.predictions.offset : nullptr;
    per_scale.push_back(decode_detections(peaks, fr.predictions.size_map, offset, stride));
    factors.push_back(factor);
  }
  return multiscale_merge(per_scale, factors, cfg.nms_iou);
}

std::vector<std::vector<Detection>> detect_all(const DetectorParams& params,
                                               std::span<const PointScene> scenes,
                                               const DecodeConfig& cfg, double score_threshold) {
  std::vector<std::vector<Detection>> out;
  out.reserve(scenes.size());
  for (const PointScene& s : scenes) {
    if (!s.image) throw MissingImage("scene " + s.image_id + " has no image");
    out.push_back(detect(params, *s.image, cfg, score_threshold));
  }
  return out;
}

MetricsReport evaluate_detections(const std::vector<std::vector<Detection>>& test_detections,
                                  std::span<const PointScene> test,
                                  const std::vector<std::vector<Detection>>& val_detections,
                                  std::span<const PointScene> val, const RunConfig& cfg) {
  if (test_detections.size() != test.size() || val_detections.size() != val.size()) {
    throw ShapeMismatch("one detection list per scene required");
  }
  const auto gt = ground_truth(test);
  MetricsReport r;
  r.images = test.size();
  for (double iou_thr : cfg.ap_ious) {
    ApResult a = detection_ap(test_detections, gt, iou_thr);
    r.ap_by_iou[iou_thr] = a.ap;
    r.pr_by_iou[iou_thr] = std::move(a.curve);
  }

  if (!val.empty()) {
    std::vector<double> val_counts;
    for (const PointScene& s : val) val_counts.push_back(static_cast<double>(s.count()));
    const auto grid = cfg.threshold_grid();
    r.count_threshold = threshold_search(val_detections, val_counts, grid);
  } else {
    r.count_threshold = cfg.decode.confidence_threshold;
  }

  const auto kept = above(test_detections, r.count_threshold);
  std::vector<double> predicted;
  std::vector<double> truth;
  for (std::size_t i = 0; i < test.size(); ++i) {
    predicted.push_back(static_cast<double>(kept[i].size()));
    truth.push_back(static_cast<double>(test[i].count()));
  }
  r.mae = mean_absolute_error(predicted, truth);
  double sq = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sq += (predicted[i] - truth[i]) * (predicted[i] - truth[i]);
  r.rmse = truth.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(truth.size()));
  try {
    r.nae = counting_errors(predicted, truth).nae;
  } catch (const ZeroGroundTruthCount&) {
    r.nae.reset();
  }
  r.mean_count = truth.empty() ? 0.0
                               : std::accumulate(truth.begin(), truth.end(), 0.0) /
                                     static_cast<double>(truth.size());

  std::vector<MatchResult> matches;
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::vector<Point2> centers;
    for (const Detection& d : kept[i]) centers.push_back(d.center());
    matches.push_back(localization_match(centers, test[i].points));
    n_gt += test[i].points.size();
  }
  const LocalizationResult loc = localization_ap_mle(kept, matches, n_gt, cfg.loc_distance);
  r.loc_ap = loc.ap;
  r.mle = loc.mle;

  const PrfResult prf = nwpu_prf(kept, gt);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f1 = prf.f1;
  return r;
}

MetricsReport evaluate(const DetectorParams& params, std::span<const PointScene> test,
                       std::span<const PointScene> val, const RunConfig& cfg) {
  for (const PointScene& s : test) boxes_of(s);
  const auto test_dets = detect_all(params, test, cfg.decode, cfg.ap_score_threshold);
  const auto val_dets = detect_all(params, val, cfg.decode, cfg.ap_score_threshold);
  return evaluate_detections(test_dets, test, val_dets, val, cfg);
}

std::vector<std::vector<Detection>> store_boxes(const PseudoBoxStore& store,
                                                std::span<const PointScene> scenes) {
  std::vector<std::vector<Detection>> out;
  out.reserve(scenes.size());
  for (const PointScene& s : scenes) {
    if (!store.contains(s.image_id)) throw InvalidArgument("store lacks scene " + s.image_id);
    std::vector<Detection> dets;
    for (const StoredBox& b : store.image(s.image_id).boxes) {
      dets.emplace_back(b.box.point, b.box.size, b.box.prior);
    }
    out.push_back(std::move(dets));
  }
  return out;
}

AuditRow audit_store(const std::string& name, const PseudoBoxStore& store,
                     std::span<const PointScene> scenes, std::span<const double> ious) {
  const auto gt = ground_truth(scenes);
  const auto dets = store_boxes(store, scenes);
  AuditRow row{name, {}};
  for (double t : ious) row.ap[t] = detection_ap(dets, gt, t).ap;
  return row;
}

std::vector<AuditRow> audit_pseudo_sizes(std::span<const PointScene> scenes, const LudaConfig& luda,
                                         const PseudoBoxStore* refined,
                                         std::span<const double> ious) {
  LudaConfig gak = luda;
  gak.gak_mode = true;
  LudaConfig local = luda;
  local.gak_mode = false;
  std::vector<AuditRow> rows;
  rows.push_back(audit_store("GAK", make_pseudo_store(scenes, gak, kInitialPrior), scenes, ious));
  rows.push_back(audit_store("LUDA", make_pseudo_store(scenes, local, kInitialPrior), scenes, ious));
  if (refined) rows.push_back(audit_store("Refined", *refined, scenes, ious));
  return rows;
}

std::vector<AblationCell> run_ablation(const RunConfig& base, std::span<const PointScene> train_set,
                                       std::span<const PointScene> val,
                                       std::span<const PointScene> test) {
  std::vector<AblationCell> cells;
  for (const auto& [loss_on, refine_on] :
       {std::pair{false, false}, std::pair{true, false}, std::pair{false, true}, std::pair{true, true}}) {
    RunConfig cfg = base;
    cfg.crowdedness_loss = loss_on;
    cfg.refinement = refine_on;
    const auto t0 = std::chrono::steady_clock::now();
    TrainState state = init_training(cfg, train_set);
    train(cfg, train_set, state);
    AblationCell cell;
    cell.crowdedness_loss = loss_on;
    cell.refinement = refine_on;
    cell.report = evaluate(state.checkpoint.params, test, val, cfg);
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cells.push_back(std::move(cell));
  }
  return cells;
}

SimulationResult run_oracle_simulation(const RunConfig& cfg, PseudoBoxStore& store) {
  const OracleModel oracle(cfg.oracle, store);
  return simulate_refinement(oracle, store, cfg.epochs, cfg.initial_prior);
}

}  // namespace crowdsd
