#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitality/activity.hpp"
#include "vitality/metrics.hpp"
#include "vitality/model.hpp"

namespace vitality {

class SynthSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameters of a synthetic city. The city is a grid_x × grid_y lattice of
/// square cells of side `block_size`; each district is a district_tile ×
/// district_tile super-tile of cells, and every cell of a district is split
/// into fx × fy blocks with fx, fy ∈ {1, 2, 3, 4} drawn per district.
struct SynthSpec {
  std::uint64_t seed = 1;
  int grid_x = 12;
  int grid_y = 12;
  /// Cell side in meters; multiples of 12 keep every vertex on an integer grid.
  double block_size = 120.0;
  int district_tile = 2;
  /// Cells turned into lakes, each in a different district.
  int water_cells = 2;
  /// Mean number of places per district for each group.
  std::map<PlaceGroup, double> place_intensity{
      {PlaceGroup::NightLife, 2.0},   {PlaceGroup::ArtNight, 1.0},    {PlaceGroup::Services, 4.0},
      {PlaceGroup::EatingDrinking, 4.0}, {PlaceGroup::OrgActivity, 2.0}, {PlaceGroup::Outside, 2.0},
      {PlaceGroup::Commercial, 4.0}};
  /// Radio stations = ceil(station_factor × districts).
  double station_factor = 6.0;
  /// ln(activity_density) = intercept + Σ beta[m]·z(m) + noise_sd·ε, with z the
  /// standardized Box-Cox transform of metric m across districts.
  std::map<std::string, double> beta;
  double intercept = -7.0;
  double noise_sd = 0.3;
  /// Whether to build stations and the hourly trace (the slow part).
  bool activity = true;
  std::string start_date = "2015-03-02";  // a Monday
  int days = 14;

  int districts_x() const { return grid_x / district_tile; }
  int districts_y() const { return grid_y / district_tile; }
  int district_count() const { return districts_x() * districts_y(); }
  /// Throws SynthSpecError for infeasible parameters.
  void validate() const;
};

/// One district's construction and its exact metric values.
struct SynthTruth {
  DistrictId district = 0;
  int fx = 1, fy = 1;
  FeatureVector metrics;
  double net_area = 0.0;
  double ln_signal = 0.0;         // intercept + Σ β·z
  double activity_density = 0.0;  // exp(ln_signal + noise)
};

struct SynthCity {
  SynthSpec spec;
  CityData city;
  std::vector<DistrictShape> shapes;
  std::map<BlockId, CensusAggregate> census;
  Polygon boundary;
  std::vector<RadioStation> stations;
  std::vector<ActivityRecord> records;
  std::vector<SynthTruth> truth;  // district order
};

/// Builds every layer in memory. Metric truth is computed from the grid
/// construction directly (counts, rectangle formulas, brute-force distances),
/// never through the metrics module.
SynthCity generate_city(const SynthSpec& spec);

/// Writes the layer files, ground_truth.csv, planted_beta.csv and a
/// config.toml pointing at them.
void write_synth_city(const std::filesystem::path& dir, const SynthCity& city);

struct SynthJob {
  SynthSpec spec;
  std::filesystem::path output;  // dataset directory
};

/// Reads a synth spec from TOML ([synth] table); absent keys keep defaults.
/// `output` is resolved against the spec file's directory.
SynthJob load_synth_spec(const std::filesystem::path& path);

/// Planted effects of the "Jacobs" reference city: positive for intersection
/// density, employment density and third places, negative for highway closeness.
std::map<std::string, double> jacobs_beta();

}  // namespace vitality
