#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushlab/metrics.hpp"

namespace pushlab::report {

// Fixed schema: model,object,trans_pct,pos_mm,rot_deg; one row per (model, disk),
// disks 1-based, numbers printed with six decimals so identical runs emit
// identical bytes.
std::string metrics_csv(const std::vector<eval::MetricsReport>& reports);

nlohmann::json metrics_json(const eval::MetricsReport& rep);
nlohmann::json control_json(const eval::ControlReport& rep);

// Inverses of the serializers above, used by the report subcommand to rebuild
// CSV/SVG artifacts from stored results.
eval::MetricsReport metrics_report_from_json(const nlohmann::json& j);
eval::ControlReport control_report_from_json(const nlohmann::json& j);

// Overhead plot of one control episode: initial (dashed) and final disk
// outlines, the goal point with its tolerance ring, and the target disk's path.
// Millimeter coordinates, two decimals.
std::string episode_svg(const eval::EpisodeOutcome& ep);
std::string episode_filename(const eval::EpisodeOutcome& ep);

// 64-bit FNV-1a over the file's bytes; reports embed these for checkpoint and
// dataset provenance.
std::uint64_t fnv1a_file(const std::string& path);
std::string fnv1a_hex(std::uint64_t h);

void write_text(const std::string& path, const std::string& content);

}  // namespace pushlab::report
