#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crowdsd/metrics.hpp"
#include "crowdsd/oracle.hpp"
#include "crowdsd/pipeline.hpp"

namespace crowdsd {

std::string metrics_text(const MetricsReport& r);
std::string metrics_json(const MetricsReport& r);

std::string audit_text(const std::vector<AuditRow>& rows);
std::string audit_json(const std::vector<AuditRow>& rows);

// Wall times are left out of the JSON so reruns compare byte-for-byte.
std::string ablation_text(const std::vector<AblationCell>& cells);
std::string ablation_json(const std::vector<AblationCell>& cells);

std::string simulation_text(const SimulationResult& r);
std::string simulation_json(const SimulationResult& r);

// Per-image detections: {"image_id": [[cx, cy, size, score], ...], ...}.
std::string detections_json(const std::vector<std::string>& image_ids,
                            const std::vector<std::vector<Detection>>& detections);

// Tab-separated training log; values use 17 significant digits and an
// empty bucket is written as '-', so parse(format(x)) == x.
std::string format_log(const std::vector<EpochLog>& log);
std::vector<EpochLog> parse_log(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Run directory: checkpoint.bin, store.txt, train_log.tsv.
void save_train_state(const std::filesystem::path& dir, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& dir);

}  // namespace crowdsd
