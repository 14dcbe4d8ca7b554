#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vitality/geometry.hpp"
#include "vitality/spatial_index.hpp"

namespace vitality {

using BlockId = std::int64_t;
using DistrictId = std::int64_t;

/// Input that cannot be used as given. `what()` carries path and feature index
/// when known.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
  ValidationError(const std::string& path, std::optional<std::size_t> feature, const std::string& msg);

  const std::string& path() const { return path_; }
  std::optional<std::size_t> feature() const { return feature_; }

 private:
  std::string path_;
  std::optional<std::size_t> feature_;
};

class ClassificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Census counts for one block or one district (sums over blocks).
struct CensusAggregate {
  std::int64_t residents = 0;              // P1
  std::int64_t used_buildings = 0;         // E2
  std::int64_t residential_buildings = 0;  // E3
  std::array<std::int64_t, 9> age_bands{};        // E8..E16
  std::array<std::int64_t, 4> floor_bands{};      // E17..E20
  std::array<std::int64_t, 6> apartment_bands{};  // E21..E26
  std::int64_t employees = 0;              // ADDETTI

  CensusAggregate& operator+=(const CensusAggregate& o);
  bool operator==(const CensusAggregate&) const = default;
};

struct Block {
  BlockId id = 0;
  DistrictId district_id = 0;
  Polygon polygon;
  Point centroid = Point::Zero();
};

/// Explicit district outline as read from a districts layer.
struct DistrictShape {
  DistrictId id = 0;
  std::string city;
  Polygon polygon;
};

struct District {
  DistrictId id = 0;
  std::string city;
  /// Explicit outline, or the member block polygons when none was given.
  MultiPolygon region;
  std::vector<BlockId> blocks;  // ascending
  double gross_area = 0.0;
  double net_area = 0.0;
  CensusAggregate census;
};

enum class PlaceGroup { NightLife, ArtNight, Services, EatingDrinking, OrgActivity, Outside, Commercial };

inline constexpr std::array<PlaceGroup, 7> kPlaceGroups{
    PlaceGroup::NightLife,      PlaceGroup::ArtNight,    PlaceGroup::Services, PlaceGroup::EatingDrinking,
    PlaceGroup::OrgActivity,    PlaceGroup::Outside,     PlaceGroup::Commercial};

std::string_view to_string(PlaceGroup g);
/// Accepts the group labels used in place layers ("NightLife", "Art-night",
/// "Services", "Eating-drinking", "Org. activity", "Outside", "Commercial").
/// Throws ClassificationError otherwise.
PlaceGroup parse_place_group(std::string_view label);

struct PlaceFlags {
  bool daily_use = false;
  bool nightlife = false;
  bool third_place = false;
  bool operator==(const PlaceFlags&) const = default;
};

using ClassificationMap = std::map<PlaceGroup, PlaceFlags>;

/// Daily use: Eating-drinking, Services, Outside, Org. activity.
/// Nightlife: NightLife, Art-night.
/// Third place: Eating-drinking, Org. activity, Outside, Commercial.
const ClassificationMap& default_classification();

PlaceFlags classify_place(PlaceGroup g, const ClassificationMap& map = default_classification());
PlaceFlags classify_place(std::string_view label, const ClassificationMap& map = default_classification());

struct Place {
  FeatureId id = 0;
  Point location = Point::Zero();
  PlaceGroup group = PlaceGroup::Commercial;
  PlaceFlags flags;
};

struct Company {
  FeatureId id = 0;
  Point location = Point::Zero();
  double employees = 0.0;
};

enum class VacuumKind { SmallPark, LargePark, Railway, Station, Highway, Water };

std::string_view to_string(VacuumKind k);

struct VacuumFeature {
  FeatureId id = 0;
  VacuumKind kind = VacuumKind::Water;
  Polygon polygon;
  /// Representative point: polygon centroid, or the point itself for point
  /// features such as stations.
  Point anchor = Point::Zero();
  bool natural = false;
};

enum class LandUseClass { Residential, Work, GreenWater };

std::string_view to_string(LandUseClass c);
LandUseClass parse_land_use(std::string_view label);

struct LandUsePatch {
  Polygon polygon;
  LandUseClass klass = LandUseClass::Residential;
};

/// Undirected street graph; nodes are unique points.
struct StreetGraph {
  std::vector<Point> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> segments;
};

/// Nodes where three or more distinct street segments meet.
std::vector<Point> detect_intersections(const StreetGraph& g);

/// Point features used by the closeness metrics: one centroid per feature.
struct FeatureSet {
  std::vector<FeatureId> ids;
  std::vector<Point> centroids;
  SpatialIndex index;

  FeatureSet() = default;
  FeatureSet(std::vector<FeatureId> ids, std::vector<Point> centroids);
  bool empty() const { return ids.empty(); }
};

struct VacuumOptions {
  double small_park_max_area = 1e6;  // m²
  double station_buffer = 600.0;     // m
  int buffer_segments = 128;
};

/// Vacuum layer split into the sets the closeness metrics use. Railway
/// centroids are those of the railway area left after removing station
/// buffers; railways fully covered by buffers are dropped.
struct VacuumSets {
  FeatureSet small_parks;
  FeatureSet large_parks;
  FeatureSet railways;
  FeatureSet highways;
  FeatureSet water;
};

VacuumSets prepare_vacuums(const std::vector<VacuumFeature>& features, const VacuumOptions& opts = {});

struct NetAreaOptions {
  bool exclude_water = true;
  bool exclude_natural_large_parks = true;
  bool exclude_all_large_parks = false;
};

/// Joins blocks with census records and vacuum exclusions into districts,
/// ascending by id. `shapes` may be empty, in which case each district region
/// is the set of its member blocks.
std::vector<District> assemble_districts(const std::vector<Block>& blocks,
                                         const std::map<BlockId, CensusAggregate>& census,
                                         const std::vector<VacuumFeature>& vacuums,
                                         const std::vector<DistrictShape>& shapes = {},
                                         const NetAreaOptions& opts = {});

/// Every layer of one city, as consumed by the metrics and activity modules.
struct CityData {
  std::vector<Block> blocks;  // ascending id
  std::vector<District> districts;
  std::vector<LandUsePatch> landuse;
  std::vector<VacuumFeature> vacuums;
  std::vector<Place> places;
  std::vector<Company> companies;
  StreetGraph streets;
};

}  // namespace vitality
