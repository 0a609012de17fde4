#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdsd/decode.hpp"
#include "crowdsd/losses.hpp"
#include "crowdsd/luda.hpp"
#include "crowdsd/oracle.hpp"
#include "crowdsd/raster.hpp"
#include "crowdsd/synth.hpp"

namespace crowdsd {

enum class DetectorMode { Toy, Oracle };

struct RunConfig {
  LudaConfig luda;
  GaussianSpec gaussian;
  double loss_gamma = 2.0;
  double loss_delta = 4.0;
  double loss_lambda = 0.1;
  std::optional<double> loss_balance;  // default follows the stride
  DecodeConfig decode;
  SceneSpec scene;
  OracleConfig oracle;

  DetectorMode mode = DetectorMode::Toy;
  int stride = 1;
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 7.5e-4;
  double initial_prior = kInitialPrior;
  bool size_bias_init = true;  // start the size head at the median log pseudo size
  bool crowdedness_loss = true;
  bool refinement = true;
  std::uint64_t seed = 1;       // detector init and batch order
  std::uint64_t data_seed = 7;  // synthetic dataset

  // Evaluation.
  double ap_score_threshold = 0.05;        // decode threshold for AP curves
  std::vector<double> ap_ious = {0.3, 0.5, 0.7};
  double loc_distance = 20.0;
  std::vector<double> count_threshold_grid;  // empty: 0.05, 0.06, .., 0.95

  // Paths.
  std::filesystem::path train_annotations = "data/train.jsonl";
  std::filesystem::path val_annotations = "data/val.jsonl";
  std::filesystem::path test_annotations = "data/test.jsonl";
  std::filesystem::path store_path = "run/store.txt";
  std::filesystem::path run_dir = "run";
  std::filesystem::path report_dir = "run/report";

  LossConfig loss_config() const;
  std::vector<double> threshold_grid() const;
  void validate() const;
};

// Sets one `key = value` entry. Throws ConfigError for unknown keys or
// unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Line-oriented key=value file with '#' comments; later lines win. Errors
// carry the line number.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
RunConfig load_config(const std::filesystem::path& path);

// Every key with its current value, in a form apply_config_file accepts.
std::string config_text(const RunConfig& cfg);

}  // namespace crowdsd
