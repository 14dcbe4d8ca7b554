#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <vector>

#include "vitality/config.hpp"
#include "vitality/stats.hpp"

namespace vitality {

/// Layers read from the configured inputs, districts assembled.
struct LoadedCity {
  CityData city;
  std::map<BlockId, CensusAggregate> census;
  Polygon boundary;  // configured, or the bounding rectangle of the districts
};

/// Loads the layers the metric stage needs. Missing inputs throw
/// ValidationError naming the config key.
LoadedCity load_city(const PipelineConfig& cfg);

/// Output file names inside the configured output directory.
namespace outputs {
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kFeatureFlags = "features_flags.csv";
inline constexpr const char* kActivity = "activity_density.csv";
inline constexpr const char* kReportJson = "model_report.json";
inline constexpr const char* kReportCsv = "model_report.csv";
inline constexpr const char* kCvTrace = "cv_trace.csv";
inline constexpr const char* kTable4 = "table4.csv";
}  // namespace outputs

/// Validates every configured layer and prints a per-layer summary.
void cmd_ingest_check(const PipelineConfig& cfg, std::ostream& log);

/// features.csv and features_flags.csv.
void cmd_metrics(const PipelineConfig& cfg, std::ostream& log);

/// activity_density.csv: district_id, activity_density, hours_used and the
/// coverage audit columns. An empty record file is a validation error.
void cmd_activity(const PipelineConfig& cfg, std::ostream& log);

/// Joins features.csv with activity_density.csv (ids must match) into a table
/// with one column per metric plus "activity_density".
DataTable regression_table(const std::filesystem::path& features, const std::filesystem::path& activity);

/// model_report.json/.csv from the outputs of cmd_metrics and cmd_activity;
/// cv_trace.csv when enabled. Unavailable models are reported as warnings.
void cmd_regress(const PipelineConfig& cfg, std::ostream& log);

/// table4.csv from model_report.json.
void cmd_report(const PipelineConfig& cfg, std::ostream& log);

/// Generates the dataset described by a synth spec file; returns its directory.
std::filesystem::path cmd_synth(const std::filesystem::path& spec, std::optional<std::uint64_t> seed,
                                std::ostream& log);

}  // namespace vitality
