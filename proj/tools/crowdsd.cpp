// Command-line front end: dataset synthesis, pseudo-box generation, training,
// refinement simulation, inference, evaluation and pseudo-size audits.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "crowdsd/annotations.hpp"
#include "crowdsd/config.hpp"
#include "crowdsd/errors.hpp"
#include "crowdsd/image_io.hpp"
#include "crowdsd/pipeline.hpp"
#include "crowdsd/report.hpp"
#include "crowdsd/store_io.hpp"
#include "crowdsd/synth.hpp"

namespace fs = std::filesystem;
using namespace crowdsd;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> settings;
};

RunConfig resolve(const Common& common) {
  RunConfig cfg;
  if (!common.config_file.empty()) apply_config_file(cfg, common.config_file);
  for (const std::string& kv : common.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void print_buckets(const EpochLog& e) {
  std::printf("epoch %3d  loss %.5f  (center %.5f size %.5f offset %.5f)  refined %zu  |", e.epoch + 1,
              e.loss, e.center, e.size, e.offset, e.refined);
  for (std::size_t k = 0; k < kBucketCount; ++k) {
    if (e.buckets[k]) {
      std::printf(" %s %.2f", bucket_label(k), *e.buckets[k]);
    } else {
      std::printf(" %s -", bucket_label(k));
    }
  }
  std::printf("\n");
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-supervised crowd detection toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_file, "key=value configuration file");
  app.add_option("--set", common.settings, "override one config key (key=value), repeatable");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with an 80/10/10 split");
  std::size_t count = 200;
  std::string synth_out = "data";
  bool synth_points_only = false;
  synth->add_option("-n,--count", count, "number of scenes")->capture_default_str();
  synth->add_option("-o,--out", synth_out, "output directory")->capture_default_str();
  synth->add_flag("--points-only", synth_points_only, "omit ground-truth boxes from the files");

  // gen-pseudo
  auto* gen = app.add_subcommand("gen-pseudo", "write the initial pseudo-box store");
  std::string gen_in;
  std::string gen_out;
  bool gak = false;
  gen->add_option("-a,--annotations", gen_in, "annotation file (default paths.train_annotations)");
  gen->add_option("-o,--out", gen_out, "store file (default paths.store)");
  gen->add_flag("--gak", gak, "geometry-adaptive sizes without local smoothing");

  // train
  auto* tr = app.add_subcommand("train", "self-training loop");
  std::string tr_in;
  std::string run_dir;
  bool no_refine = false;
  bool no_crowd = false;
  bool oracle = false;
  bool resume = false;
  int stride = 0;
  int epochs = -1;
  tr->add_option("-a,--annotations", tr_in, "training annotations");
  tr->add_option("-r,--run-dir", run_dir, "run directory (default paths.run_dir)");
  tr->add_flag("--no-refine", no_refine, "disable pseudo-box refinement");
  tr->add_flag("--no-crowdedness", no_crowd, "unweighted size loss");
  tr->add_flag("--oracle", oracle, "simulated detector instead of the network");
  tr->add_option("--stride", stride, "output stride")->check(CLI::IsMember({1, 4}));
  tr->add_option("--epochs", epochs, "total epochs");
  tr->add_flag("--resume", resume, "continue from the run directory");

  // simulate-refinement
  auto* sim = app.add_subcommand("simulate-refinement", "refinement dynamics with an oracle detector");
  std::string sim_in;
  std::string sim_out;
  int sim_epochs = -1;
  sim->add_option("-a,--annotations", sim_in, "annotations (default paths.train_annotations)");
  sim->add_option("-o,--out", sim_out, "report directory (default paths.report_dir)");
  sim->add_option("--epochs", sim_epochs, "epochs to simulate");

  // infer
  auto* inf = app.add_subcommand("infer", "detect objects and write detections");
  std::string inf_ckpt;
  std::string inf_in;
  std::string inf_out = "detections.json";
  std::string overlay_dir;
  double inf_threshold = -1.0;
  inf->add_option("-k,--checkpoint", inf_ckpt, "checkpoint file")->required();
  inf->add_option("-a,--annotations", inf_in, "annotations naming the images")->required();
  inf->add_option("-o,--out", inf_out, "detections file")->capture_default_str();
  inf->add_option("--overlay-dir", overlay_dir, "write images with drawn boxes here");
  inf->add_option("--threshold", inf_threshold, "score threshold (default decode.confidence_threshold)");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt;
  std::string ev_test;
  std::string ev_val;
  std::string ev_out;
  ev->add_option("-k,--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--test", ev_test, "test annotations (default paths.test_annotations)");
  ev->add_option("--val", ev_val, "validation annotations for the count threshold");
  ev->add_option("-o,--out", ev_out, "report directory (default paths.report_dir)");

  // audit-sizes
  auto* au = app.add_subcommand("audit-sizes", "AP of GAK, LUDA and refined pseudo boxes");
  std::string au_in;
  std::string au_store;
  std::string au_out;
  au->add_option("-a,--annotations", au_in, "annotations with ground-truth boxes");
  au->add_option("-s,--store", au_store, "refined store to include");
  au->add_option("-o,--out", au_out, "report directory (default paths.report_dir)");

  // ablation
  auto* ab = app.add_subcommand("ablation", "2x2 module ablation on train/val/test annotations");
  std::string ab_out;
  ab->add_option("-o,--out", ab_out, "report directory (default paths.report_dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = resolve(common);

    if (*synth) {
      cfg.scene.validate();
      auto scenes = generate_dataset(cfg.scene, count, cfg.data_seed);
      auto split = split_dataset(std::move(scenes));
      const SaveOptions opts{!synth_points_only, true};
      save_annotations(fs::path(synth_out) / "train.jsonl", split.train, opts);
      save_annotations(fs::path(synth_out) / "val.jsonl", split.val, opts);
      save_annotations(fs::path(synth_out) / "test.jsonl", split.test, opts);
      std::printf("wrote %zu/%zu/%zu scenes to %s\n", split.train.size(), split.val.size(),
                  split.test.size(), synth_out.c_str());
    } else if (*gen) {
      const fs::path in = gen_in.empty() ? cfg.train_annotations : fs::path(gen_in);
      const fs::path out = gen_out.empty() ? cfg.store_path : fs::path(gen_out);
      LudaConfig luda = cfg.luda;
      luda.gak_mode = gak;
      const auto scenes = load_annotations(in, false);
      const PseudoBoxStore store = make_pseudo_store(scenes, luda, cfg.initial_prior);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_store(out, store);
      std::printf("wrote %zu boxes for %zu images to %s\n", store.box_count(), store.image_count(),
                  out.string().c_str());
    } else if (*tr) {
      if (no_refine) cfg.refinement = false;
      if (no_crowd) cfg.crowdedness_loss = false;
      if (oracle) cfg.mode = DetectorMode::Oracle;
      if (stride) cfg.stride = stride;
      if (epochs >= 0) cfg.epochs = epochs;
      const fs::path dir = run_dir.empty() ? cfg.run_dir : fs::path(run_dir);
      const fs::path in = tr_in.empty() ? cfg.train_annotations : fs::path(tr_in);
      const auto scenes = load_annotations(in, true);
      TrainState state = resume ? load_train_state(dir) : init_training(cfg, scenes);
      write_text(dir / "config.txt", config_text(cfg));
      if (!resume) save_train_state(dir, state);
      train(cfg, scenes, state, [&](const TrainState& s) {
        save_train_state(dir, s);
        print_buckets(s.log.back());
      });
      std::printf("run state in %s\n", dir.string().c_str());
    } else if (*sim) {
      if (sim_epochs >= 0) cfg.epochs = sim_epochs;
      const fs::path in = sim_in.empty() ? cfg.train_annotations : fs::path(sim_in);
      const fs::path out = sim_out.empty() ? cfg.report_dir : fs::path(sim_out);
      const auto scenes = load_annotations(in, false);
      PseudoBoxStore store = make_pseudo_store(scenes, cfg.luda, cfg.initial_prior);
      const SimulationResult result = run_oracle_simulation(cfg, store);
      const std::string text = simulation_text(result);
      write_text(out / "simulation.txt", text);
      write_text(out / "simulation.json", simulation_json(result));
      std::cout << text << "order-aware: " << (order_aware(result) ? "yes" : "no") << '\n';
    } else if (*inf) {
      const Checkpoint ckpt = load_checkpoint(inf_ckpt);
      const auto scenes = load_annotations(inf_in, true);
      const double thr = inf_threshold > 0.0 ? inf_threshold : cfg.decode.confidence_threshold;
      const auto dets = detect_all(ckpt.params, scenes, cfg.decode, thr);
      std::vector<std::string> ids;
      for (const PointScene& s : scenes) ids.push_back(s.image_id);
      write_text(inf_out, detections_json(ids, dets));
      if (!overlay_dir.empty()) {
        fs::create_directories(overlay_dir);
        for (std::size_t i = 0; i < scenes.size(); ++i) {
          write_pgm(fs::path(overlay_dir) / (ids[i] + ".pgm"), draw_boxes(*scenes[i].image, dets[i]));
        }
      }
      std::printf("wrote detections for %zu images to %s\n", scenes.size(), inf_out.c_str());
    } else if (*ev) {
      const Checkpoint ckpt = load_checkpoint(ev_ckpt);
      const auto test = load_annotations(ev_test.empty() ? cfg.test_annotations : fs::path(ev_test), true);
      const auto val = load_annotations(ev_val.empty() ? cfg.val_annotations : fs::path(ev_val), true);
      const MetricsReport report = evaluate(ckpt.params, test, val, cfg);
      const fs::path out = ev_out.empty() ? cfg.report_dir : fs::path(ev_out);
      write_text(out / "metrics.txt", metrics_text(report));
      write_text(out / "metrics.json", metrics_json(report));
      std::cout << metrics_text(report);
    } else if (*au) {
      const fs::path in = au_in.empty() ? cfg.train_annotations : fs::path(au_in);
      const auto scenes = load_annotations(in, false);
      std::optional<PseudoBoxStore> refined;
      if (!au_store.empty()) refined = load_store(au_store);
      const auto rows = audit_pseudo_sizes(scenes, cfg.luda, refined ? &*refined : nullptr, cfg.ap_ious);
      const fs::path out = au_out.empty() ? cfg.report_dir : fs::path(au_out);
      write_text(out / "audit.txt", audit_text(rows));
      write_text(out / "audit.json", audit_json(rows));
      std::cout << audit_text(rows);
    } else if (*ab) {
      const auto train_set = load_annotations(cfg.train_annotations, true);
      const auto val = load_annotations(cfg.val_annotations, true);
      const auto test = load_annotations(cfg.test_annotations, true);
      const auto cells = run_ablation(cfg, train_set, val, test);
      const fs::path out = ab_out.empty() ? cfg.report_dir : fs::path(ab_out);
      write_text(out / "ablation.txt", ablation_text(cells));
      write_text(out / "ablation.json", ablation_json(cells));
      std::cout << ablation_text(cells);
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
