#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "vitality/activity.hpp"
#include "vitality/metrics.hpp"
#include "vitality/model.hpp"
#include "vitality/stats.hpp"

namespace vitality {

/// Input layer paths; empty when not configured. Relative paths are resolved
/// against the directory of the config file when it is loaded.
struct InputPaths {
  std::filesystem::path blocks, districts, census, landuse, vacuums, places, streets, stations, boundary, activity;
};

struct ModelConfig {
  std::optional<std::uint64_t> seed;
  std::size_t splits = 1000;
  double train_frac = 0.75;
  std::size_t subsamples = 200;
  double threshold = 0.6;
  std::size_t grid = 50;
  double decades = 3.0;
  PenaltyFloor penalty_floor = PenaltyFloor::Universal;
  std::size_t rfe_keep = 5;
  CombineRule combine = CombineRule::Union;
  std::vector<ModelGroup> groups = default_groups();
  std::vector<Interaction> interactions = SuiteOptions{}.interactions;
  std::map<std::string, TransformKind> transforms;  // per column; default Box-Cox
  bool standardize_response = true;
  bool cv_trace = false;
};

struct PipelineConfig {
  std::filesystem::path source;  // the config file, when loaded from one
  InputPaths inputs;
  std::filesystem::path output_dir = "out";
  Calendar calendar;
  MetricOptions metrics;
  ClassificationMap classification = default_classification();
  VacuumOptions vacuum;
  NetAreaOptions net_area;
  ModelConfig model;
  unsigned jobs = 1;

  /// Options for run_model_suite; requires a seed.
  SuiteOptions suite_options() const;
};

/// Parses a TOML config. Unknown keys are rejected, referenced input paths
/// must exist; failures throw ValidationError naming the file.
PipelineConfig load_config(const std::filesystem::path& path);

/// Writes every setting, defaults included, as TOML. Paths are written as
/// stored (relative paths stay relative).
void write_config(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace vitality
