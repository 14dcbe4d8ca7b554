#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vitality/model.hpp"

namespace vitality {

enum class Metric : std::size_t {
  Lum,
  ClosenessSmallParks,
  Rnr,
  HousingTypes,
  Commercial,
  Nightlife,
  NightlifeDensity,
  Daily,
  ThirdPlaces,
  MeanBlockArea,
  IntersectionDensity,
  Anisotropicity,
  AvgBuildingAge,
  StdBuildingAge,
  EmployeesPerCompany,
  PopulationDensity,
  EmploymentDensity,
  PopEmpRatio,
  ApartmentsPerBuilding,
  DensityDailyPlaces,
  DensityNondailyPlaces,
  ClosenessLargeParks,
  ClosenessRailways,
  ClosenessHighways,
  ClosenessWater,
};

inline constexpr std::size_t kMetricCount = 25;

/// Column name, e.g. "closeness_small_parks".
std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view name);
std::array<Metric, kMetricCount> all_metrics();

/// A metric value, or a missing marker with its reason code. A present value
/// may still carry a warning code (e.g. "EmptyFeatureSet" for a closeness of 0).
struct MetricValue {
  std::optional<double> value;
  std::string flag;

  static MetricValue of(double v) { return {v, {}}; }
  static MetricValue missing(std::string reason) { return {std::nullopt, std::move(reason)}; }
  bool operator==(const MetricValue&) const = default;
};

struct FeatureVector {
  DistrictId district = 0;
  std::array<MetricValue, kMetricCount> metrics;

  MetricValue& operator[](Metric m) { return metrics[static_cast<std::size_t>(m)]; }
  const MetricValue& operator[](Metric m) const { return metrics[static_cast<std::size_t>(m)]; }
  bool operator==(const FeatureVector&) const = default;
};

struct AgeBand {
  int start = 0;
  int end = 0;
};

enum class AgeDispersion {
  /// (Σ c_b²)/(Σ c_b)² · σ², σ² the population variance of the band counts.
  Verbatim,
  /// Count-weighted standard deviation of old_b.
  WeightedSd,
};

struct MetricOptions {
  std::array<double, 4> floor_values{1.0, 2.0, 3.0, 4.0};                        // z_c for E17..E20
  std::array<double, 6> apartment_midpoints{1.0, 2.0, 3.5, 7.0, 12.0, 20.0};    // E21..E26
  std::array<AgeBand, 9> age_bands{{{1900, 1918},
                                    {1919, 1945},
                                    {1946, 1960},
                                    {1961, 1970},
                                    {1971, 1980},
                                    {1981, 1990},
                                    {1991, 2000},
                                    {2001, 2005},
                                    {2006, 2011}}};
  int reference_year = 2011;
  AgeDispersion age_dispersion = AgeDispersion::Verbatim;
};

// Land use -----------------------------------------------------------------

/// Area of each class (residential, work, green-water) inside the district.
using LandUseAreas = std::array<double, 3>;
LandUseAreas land_use_areas(const District& d, std::span<const LandUsePatch> patches);

/// −Σ P_j ln P_j / ln 3 over class shares of the classified area.
MetricValue land_use_mix(const LandUseAreas& areas);
/// 1 − |Res − NonRes| / (Res + NonRes).
MetricValue rnr_balance(const LandUseAreas& areas);

/// Σ h_c z_c / Σ h_c over the floor bands.
MetricValue housing_types(const CensusAggregate& c, const MetricOptions& opts = {});

// Closeness ----------------------------------------------------------------

/// Inverse of the mean distance from each block centroid to its nearest
/// feature. An empty feature set gives 0 with flag "EmptyFeatureSet"; a zero
/// mean distance is missing with "ZeroDistance".
MetricValue mean_block_closeness(std::span<const Point> block_centroids, const FeatureSet& features);

// Places -------------------------------------------------------------------

struct PlaceShares {
  MetricValue commercial, nightlife, third_places;
};
PlaceShares place_shares(std::span<const Place> places);

struct PlaceDensities {
  MetricValue nightlife_density, density_daily, density_nondaily;
};
PlaceDensities place_densities(std::span<const Place> places, double net_area);

// Blocks -------------------------------------------------------------------

struct BlockShape {
  MetricValue mean_block_area, intersection_density, anisotropicity;
};
/// Φ_j = area_j / (π r²) with r the radius of the block's minimum enclosing circle.
double block_anisotropicity(const Polygon& block);
BlockShape block_shape_metrics(std::span<const Polygon> blocks, std::size_t intersections, double net_area);

// Buildings and concentration ----------------------------------------------

/// ((last − start_b) + (last − end_b)) / 2.
double band_age(const AgeBand& b, int reference_year);

struct AgeStats {
  MetricValue avg, std;
};
AgeStats building_age_stats(const CensusAggregate& c, const MetricOptions& opts = {});

struct Concentration {
  MetricValue population_density, employment_density, pop_emp_ratio, apartments_per_building;
};
Concentration concentration_metrics(const CensusAggregate& c, double net_area, const MetricOptions& opts = {});

MetricValue employees_per_company(std::span<const Company> companies);

// Assembly -----------------------------------------------------------------

/// City-wide lookups shared by all districts: vacuum sets, daily places,
/// intersections and point-to-district membership. Immutable once built.
class MetricContext {
 public:
  MetricContext(const CityData& city, const VacuumOptions& vacuum_opts = {});

  const CityData& city() const { return *city_; }
  const VacuumSets& vacuums() const { return vacuums_; }
  const FeatureSet& daily_places() const { return daily_; }

  /// Members of district index k (position in city().districts), ascending id.
  std::span<const Place> places_in(std::size_t k) const { return places_[k]; }
  std::span<const Company> companies_in(std::size_t k) const { return companies_[k]; }
  std::size_t intersections_in(std::size_t k) const { return intersections_[k]; }
  std::span<const Block* const> blocks_in(std::size_t k) const { return blocks_[k]; }

 private:
  const CityData* city_;
  VacuumSets vacuums_;
  FeatureSet daily_;
  std::vector<std::vector<Place>> places_;
  std::vector<std::vector<Company>> companies_;
  std::vector<std::size_t> intersections_;
  std::vector<std::vector<const Block*>> blocks_;
};

/// Index of the district containing p under the half-open membership rule,
/// or -1. Ties (overlapping inputs) go to the smallest district id.
std::ptrdiff_t locate_district(const std::vector<District>& districts, const SpatialIndex& index, const Point& p);

FeatureVector compute_feature_vector(std::size_t district_index, const MetricContext& ctx,
                                     const MetricOptions& opts = {});

/// One vector per district in city order; districts run on up to `jobs` threads.
std::vector<FeatureVector> compute_features(const CityData& city, const MetricOptions& opts = {},
                                            const VacuumOptions& vacuum_opts = {}, unsigned jobs = 1);

/// features.csv: district_id then one column per metric, empty when missing.
/// The flags file has the same layout with reason codes.
void write_features(const std::filesystem::path& values, const std::filesystem::path& flags,
                    std::span<const FeatureVector> rows);
/// Reads a features.csv (flags are not restored).
std::vector<FeatureVector> read_features(const std::filesystem::path& values);

}  // namespace vitality
