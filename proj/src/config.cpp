#include "crowdsd/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "crowdsd/errors.hpp"

namespace crowdsd {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

Field real(const std::string& key, double& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_double(key, v); },
          [&ref] { return fmt(ref); }};
}

Field integer(const std::string& key, int& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_int<int>(key, v); },
          [&ref] { return std::to_string(ref); }};
}

Field unsigned64(const std::string& key, std::uint64_t& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_int<std::uint64_t>(key, v); },
          [&ref] { return std::to_string(ref); }};
}

Field boolean(const std::string& key, bool& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_bool(key, v); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field list(const std::string& key, std::vector<double>& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_list(key, v); },
          [&ref] { return list_text(ref); }};
}

Field path(const std::string& key, std::filesystem::path& ref) {
  return {key, [&ref](const std::string& v) { ref = v; }, [&ref] { return ref.string(); }};
}

std::vector<Field> fields(RunConfig& c) {
  std::vector<Field> f = {
      integer("luda.k", c.luda.k),
      real("luda.beta", c.luda.beta),
      real("luda.rho", c.luda.rho),
      real("luda.region_radius_px", c.luda.region_radius_px),
      real("luda.eta", c.luda.eta),
      real("luda.alpha_cap", c.luda.alpha_cap),
      real("luda.default_size_fraction", c.luda.default_size_fraction),
      real("raster.size_divisor", c.gaussian.size_divisor),
      real("raster.min_sigma", c.gaussian.min_sigma),
      real("raster.truncation", c.gaussian.truncation),
      real("loss.gamma", c.loss_gamma),
      real("loss.delta", c.loss_delta),
      real("loss.lambda", c.loss_lambda),
      {"loss.balance",
       [&c](const std::string& v) {
         if (v == "auto") {
           c.loss_balance.reset();
         } else {
           c.loss_balance = parse_double("loss.balance", v);
         }
       },
       [&c] { return c.loss_balance ? fmt(*c.loss_balance) : std::string("auto"); }},
      integer("decode.peak_window", c.decode.peak_window),
      real("decode.confidence_threshold", c.decode.confidence_threshold),
      real("decode.nms_iou", c.decode.nms_iou),
      list("decode.scales", c.decode.scales),
      integer("synth.width", c.scene.width),
      integer("synth.height", c.scene.height),
      integer("synth.min_clusters", c.scene.min_clusters),
      integer("synth.max_clusters", c.scene.max_clusters),
      integer("synth.min_cluster_side", c.scene.min_cluster_side),
      integer("synth.max_cluster_side", c.scene.max_cluster_side),
      real("synth.spacing_min", c.scene.spacing_min),
      real("synth.spacing_max", c.scene.spacing_max),
      list("synth.cluster_spacings", c.scene.cluster_spacings),
      {"synth.layout",
       [&c](const std::string& v) {
         if (v == "grid") {
           c.scene.layout = ClusterLayout::Grid;
         } else if (v == "jitter") {
           c.scene.layout = ClusterLayout::Jitter;
         } else if (v == "hex") {
           c.scene.layout = ClusterLayout::Hex;
         } else {
           throw ConfigError("synth.layout: expected grid, jitter or hex, got '" + v + "'");
         }
       },
       [&c] {
         switch (c.scene.layout) {
           case ClusterLayout::Grid: return std::string("grid");
           case ClusterLayout::Hex: return std::string("hex");
           case ClusterLayout::Jitter: break;
         }
         return std::string("jitter");
       }},
      real("synth.position_jitter", c.scene.position_jitter),
      real("synth.cluster_gap", c.scene.cluster_gap),
      integer("synth.min_sparse", c.scene.min_sparse),
      integer("synth.max_sparse", c.scene.max_sparse),
      real("synth.sparse_clearance", c.scene.sparse_clearance),
      real("synth.sparse_size_min", c.scene.sparse_size_min),
      real("synth.sparse_size_max", c.scene.sparse_size_max),
      real("synth.size_ratio", c.scene.size_ratio),
      real("synth.amplitude_min", c.scene.amplitude_min),
      real("synth.amplitude_max", c.scene.amplitude_max),
      real("synth.noise", c.scene.noise),
      boolean("synth.snap_to_pixels", c.scene.snap_to_pixels),
      integer("synth.max_attempts", c.scene.max_attempts),
      real("oracle.tau_base", c.oracle.tau_base),
      real("oracle.tau_exponent", c.oracle.tau_exponent),
      real("oracle.tau_jitter", c.oracle.tau_jitter),
      real("oracle.p_inf_min", c.oracle.p_inf_min),
      real("oracle.p_inf_max", c.oracle.p_inf_max),
      real("oracle.size_noise", c.oracle.size_noise),
      real("oracle.size_noise_tau", c.oracle.size_noise_tau),
      unsigned64("oracle.seed", c.oracle.seed),
      {"train.mode",
       [&c](const std::string& v) {
         if (v == "toy") {
           c.mode = DetectorMode::Toy;
         } else if (v == "oracle") {
           c.mode = DetectorMode::Oracle;
         } else {
           throw ConfigError("train.mode: expected toy or oracle, got '" + v + "'");
         }
       },
       [&c] { return std::string(c.mode == DetectorMode::Oracle ? "oracle" : "toy"); }},
      integer("train.stride", c.stride),
      integer("train.epochs", c.epochs),
      integer("train.batch_size", c.batch_size),
      real("train.learning_rate", c.learning_rate),
      real("train.initial_prior", c.initial_prior),
      boolean("train.size_bias_init", c.size_bias_init),
      boolean("train.crowdedness_loss", c.crowdedness_loss),
      boolean("train.refinement", c.refinement),
      unsigned64("train.seed", c.seed),
      unsigned64("data.seed", c.data_seed),
      real("eval.ap_score_threshold", c.ap_score_threshold),
      list("eval.ap_ious", c.ap_ious),
      real("eval.loc_distance", c.loc_distance),
      list("eval.count_threshold_grid", c.count_threshold_grid),
      path("paths.train_annotations", c.train_annotations),
      path("paths.val_annotations", c.val_annotations),
      path("paths.test_annotations", c.test_annotations),
      path("paths.store", c.store_path),
      path("paths.run_dir", c.run_dir),
      path("paths.report_dir", c.report_dir),
  };
  return f;
}

}  // namespace

LossConfig RunConfig::loss_config() const {
  LossConfig lc = LossConfig::for_stride(stride);
  lc.gamma = loss_gamma;
  lc.delta = loss_delta;
  lc.lambda = loss_lambda;
  if (loss_balance) lc.balance = *loss_balance;
  return lc;
}

std::vector<double> RunConfig::threshold_grid() const {
  if (!count_threshold_grid.empty()) return count_threshold_grid;
  std::vector<double> grid;
  for (int i = 5; i <= 95; ++i) grid.push_back(i / 100.0);
  return grid;
}

void RunConfig::validate() const {
  luda.validate();
  loss_config().validate();
  decode.validate();
  scene.validate();
  oracle.validate();
  if (stride != 1 && stride != 4) throw ConfigError("train.stride must be 1 or 4");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(initial_prior >= 0.0 && initial_prior <= 1.0)) {
    throw ConfigError("train.initial_prior must lie in [0, 1]");
  }
  if (!(ap_score_threshold > 0.0 && ap_score_threshold < 1.0)) {
    throw ConfigError("eval.ap_score_threshold must lie in (0, 1)");
  }
  if (ap_ious.empty()) throw ConfigError("eval.ap_ious must not be empty");
  if (!(loc_distance > 0.0)) throw ConfigError("eval.loc_distance must be positive");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (Field& f : fields(cfg)) {
    if (f.key == key) {
      f.set(trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config " + file.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    const auto hash = text.find('#');
    if (hash != std::string::npos) text.erase(hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    const std::string where = file.string() + ":" + std::to_string(line) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    try {
      apply_setting(cfg, trim(text.substr(0, eq)), text.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& file) {
  RunConfig cfg;
  apply_config_file(cfg, file);
  return cfg;
}

std::string config_text(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (const Field& f : fields(copy)) out += f.key + " = " + f.get() + "\n";
  return out;
}

}  // namespace crowdsd
