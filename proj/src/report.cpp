#include "crowdsd/report.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "crowdsd/errors.hpp"
#include "crowdsd/store_io.hpp"

namespace crowdsd {
namespace {

using nlohmann::json;

std::string key(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json metrics_object(const MetricsReport& r) {
  json j;
  json ap = json::object();
  for (const auto& [t, v] : r.ap_by_iou) ap[key(t)] = v;
  j["ap"] = ap;
  json pr = json::object();
  for (const auto& [t, curve] : r.pr_by_iou) {
    json pts = json::array();
    for (const PrPoint& p : curve) pts.push_back({p.recall, p.precision});
    pr[key(t)] = pts;
  }
  j["pr_curves"] = pr;
  j["mae"] = r.mae;
  j["rmse"] = r.rmse;
  j["nae"] = r.nae ? json(*r.nae) : json(nullptr);
  j["loc_ap"] = r.loc_ap;
  j["mle"] = r.mle;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["count_threshold"] = r.count_threshold;
  j["mean_count"] = r.mean_count;
  j["images"] = r.images;
  return j;
}

json fractions(const BucketFractions& f) {
  json arr = json::array();
  for (const auto& v : f) arr.push_back(v ? json(*v) : json(nullptr));
  return arr;
}

}  // namespace

std::string metrics_text(const MetricsReport& r) {
  std::ostringstream os;
  os << "images            " << r.images << '\n';
  for (const auto& [t, v] : r.ap_by_iou) os << "AP@" << key(t) << "            " << fixed(v) << '\n';
  os << "count threshold   " << fixed(r.count_threshold, 2) << '\n';
  os << "mean count        " << fixed(r.mean_count, 2) << '\n';
  os << "MAE               " << fixed(r.mae, 3) << '\n';
  os << "RMSE              " << fixed(r.rmse, 3) << '\n';
  os << "NAE               " << (r.nae ? fixed(*r.nae) : std::string("n/a")) << '\n';
  os << "loc-AP            " << fixed(r.loc_ap) << '\n';
  os << "MLE (px)          " << fixed(r.mle, 3) << '\n';
  os << "precision         " << fixed(r.precision) << '\n';
  os << "recall            " << fixed(r.recall) << '\n';
  os << "F1                " << fixed(r.f1) << '\n';
  return os.str();
}

std::string metrics_json(const MetricsReport& r) { return metrics_object(r).dump(2) + "\n"; }

std::string audit_text(const std::vector<AuditRow>& rows) {
  std::ostringstream os;
  os << "method  ";
  if (!rows.empty()) {
    for (const auto& [t, v] : rows.front().ap) os << "  AP@" << key(t);
  }
  os << '\n';
  for (const AuditRow& row : rows) {
    os << row.name << std::string(row.name.size() < 8 ? 8 - row.name.size() : 1, ' ');
    for (const auto& [t, v] : row.ap) os << "  " << fixed(v * 100.0, 2) << (v < 0.1 ? "  " : " ");
    os << '\n';
  }
  return os.str();
}

std::string audit_json(const std::vector<AuditRow>& rows) {
  json arr = json::array();
  for (const AuditRow& row : rows) {
    json ap = json::object();
    for (const auto& [t, v] : row.ap) ap[key(t)] = v;
    arr.push_back({{"method", row.name}, {"ap", ap}});
  }
  return arr.dump(2) + "\n";
}

std::string ablation_text(const std::vector<AblationCell>& cells) {
  std::ostringstream os;
  os << "crowdedness-loss  refinement  AP@0.5    MAE      loc-AP   time(s)\n";
  for (const AblationCell& c : cells) {
    const auto it = c.report.ap_by_iou.find(0.5);
    const double ap = it == c.report.ap_by_iou.end() ? 0.0 : it->second;
    os << (c.crowdedness_loss ? "on " : "off") << "               " << (c.refinement ? "on " : "off")
       << "         " << fixed(ap) << "    " << fixed(c.report.mae, 3) << "    "
       << fixed(c.report.loc_ap) << "   " << fixed(c.seconds, 1) << '\n';
  }
  return os.str();
}

std::string ablation_json(const std::vector<AblationCell>& cells) {
  json arr = json::array();
  for (const AblationCell& c : cells) {
    arr.push_back({{"crowdedness_loss", c.crowdedness_loss},
                   {"refinement", c.refinement},
                   {"metrics", metrics_object(c.report)}});
  }
  return arr.dump(2) + "\n";
}

std::string simulation_text(const SimulationResult& r) {
  std::ostringstream os;
  os << "epoch";
  for (std::size_t k = 0; k < kBucketCount; ++k) os << '\t' << bucket_label(k);
  os << '\n';
  for (std::size_t e = 0; e < r.per_epoch.size(); ++e) {
    os << e + 1;
    for (const auto& f : r.per_epoch[e]) os << '\t' << (f ? fixed(*f, 3) : std::string("-"));
    os << '\n';
  }
  os << "first>0.5";
  for (const auto& c : r.first_crossing) os << '\t' << (c ? std::to_string(*c) : std::string("never"));
  os << '\n';
  return os.str();
}

std::string simulation_json(const SimulationResult& r) {
  json j;
  json labels = json::array();
  for (std::size_t k = 0; k < kBucketCount; ++k) labels.push_back(bucket_label(k));
  j["buckets"] = labels;
  json epochs = json::array();
  for (const auto& f : r.per_epoch) epochs.push_back(fractions(f));
  j["fractions"] = epochs;
  json crossing = json::array();
  for (const auto& c : r.first_crossing) crossing.push_back(c ? json(*c) : json(nullptr));
  j["first_crossing"] = crossing;
  j["order_aware"] = order_aware(r);
  return j.dump(2) + "\n";
}

std::string detections_json(const std::vector<std::string>& image_ids,
                            const std::vector<std::vector<Detection>>& detections) {
  if (image_ids.size() != detections.size()) throw ShapeMismatch("one detection list per image");
  json j = json::object();
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    json arr = json::array();
    for (const Detection& d : detections[i]) arr.push_back({d.cx(), d.cy(), d.size(), d.score()});
    j[image_ids[i]] = arr;
  }
  return j.dump(2) + "\n";
}

std::string format_log(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch\tloss\tcenter\tsize\toffset\tscenes\tskipped\trefined";
  for (std::size_t k = 0; k < kBucketCount; ++k) os << "\tfrac" << bucket_label(k);
  os << '\n';
  for (const EpochLog& e : log) {
    os << e.epoch << '\t' << exact(e.loss) << '\t' << exact(e.center) << '\t' << exact(e.size) << '\t'
       << exact(e.offset) << '\t' << e.scenes << '\t' << e.skipped << '\t' << e.refined;
    for (const auto& f : e.buckets) os << '\t' << (f ? exact(*f) : std::string("-"));
    os << '\n';
  }
  return os.str();
}

std::vector<EpochLog> parse_log(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<EpochLog> out;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::istringstream ls(line);
    EpochLog e;
    if (!(ls >> e.epoch >> e.loss >> e.center >> e.size >> e.offset >> e.scenes >> e.skipped >>
          e.refined)) {
      throw ParseError("malformed training log row", lineno);
    }
    for (auto& f : e.buckets) {
      std::string tok;
      if (!(ls >> tok)) throw ParseError("missing bucket column", lineno);
      if (tok != "-") f = std::stod(tok);
    }
    out.push_back(e);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void save_train_state(const std::filesystem::path& dir, const TrainState& state) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "checkpoint.bin", state.checkpoint);
  save_store(dir / "store.txt", state.store);
  write_text(dir / "train_log.tsv", format_log(state.log));
}

TrainState load_train_state(const std::filesystem::path& dir) {
  TrainState state;
  state.checkpoint = load_checkpoint(dir / "checkpoint.bin");
  state.store = load_store(dir / "store.txt");
  state.log = parse_log(read_text(dir / "train_log.tsv"));
  if (state.log.size() != static_cast<std::size_t>(state.checkpoint.epoch)) {
    throw IoError("training log and checkpoint disagree on the epoch in " + dir.string());
  }
  return state;
}

}  // namespace crowdsd
