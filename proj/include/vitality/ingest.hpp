#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "vitality/activity.hpp"
#include "vitality/model.hpp"

namespace vitality {

// Readers. Every GeoJSON layer must be a FeatureCollection carrying the
// top-level member "crs_units": "meters". Failures throw ValidationError with
// the path and, where it applies, the zero-based feature index.

std::vector<Block> load_blocks(const std::filesystem::path& path);
std::vector<DistrictShape> load_districts(const std::filesystem::path& path);
std::vector<LandUsePatch> load_landuse(const std::filesystem::path& path);
std::vector<VacuumFeature> load_vacuums(const std::filesystem::path& path, const VacuumOptions& opts = {});

struct PlaceLayer {
  std::vector<Place> places;
  std::vector<Company> companies;  // features with group "company"
};
PlaceLayer load_places(const std::filesystem::path& path,
                       const ClassificationMap& classification = default_classification());

StreetGraph load_streets(const std::filesystem::path& path);
std::vector<RadioStation> load_stations(const std::filesystem::path& path);
Polygon load_boundary(const std::filesystem::path& path);

/// Header: block_id,P1,E2,E3,E8..E16,E17..E20,E21..E26,ADDETTI.
std::map<BlockId, CensusAggregate> load_census_table(const std::filesystem::path& path);

/// Header: station_id,iso_hour,connections.
std::vector<ActivityRecord> load_activity_records(const std::filesystem::path& path);

// Writers, producing files the readers accept.

void write_blocks(const std::filesystem::path& path, const std::vector<Block>& blocks);
void write_districts(const std::filesystem::path& path, const std::vector<DistrictShape>& districts);
void write_landuse(const std::filesystem::path& path, const std::vector<LandUsePatch>& patches);
void write_vacuums(const std::filesystem::path& path, const std::vector<VacuumFeature>& features);
void write_places(const std::filesystem::path& path, const std::vector<Place>& places,
                  const std::vector<Company>& companies);
void write_streets(const std::filesystem::path& path, const StreetGraph& streets);
void write_stations(const std::filesystem::path& path, const std::vector<RadioStation>& stations);
void write_boundary(const std::filesystem::path& path, const Polygon& boundary);
void write_census_table(const std::filesystem::path& path, const std::map<BlockId, CensusAggregate>& census);
void write_activity_records(const std::filesystem::path& path, const std::vector<ActivityRecord>& records);

}  // namespace vitality
