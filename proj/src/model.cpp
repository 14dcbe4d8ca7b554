#include "vitality/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace vitality {

ValidationError::ValidationError(const std::string& path, std::optional<std::size_t> feature,
                                 const std::string& msg)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << path;
        if (feature) os << ": feature " << *feature;
        os << ": " << msg;
        return os.str();
      }()),
      path_(path),
      feature_(feature) {}

CensusAggregate& CensusAggregate::operator+=(const CensusAggregate& o) {
  residents += o.residents;
  used_buildings += o.used_buildings;
  residential_buildings += o.residential_buildings;
  for (std::size_t i = 0; i < age_bands.size(); ++i) age_bands[i] += o.age_bands[i];
  for (std::size_t i = 0; i < floor_bands.size(); ++i) floor_bands[i] += o.floor_bands[i];
  for (std::size_t i = 0; i < apartment_bands.size(); ++i) apartment_bands[i] += o.apartment_bands[i];
  employees += o.employees;
  return *this;
}

std::string_view to_string(PlaceGroup g) {
  switch (g) {
    case PlaceGroup::NightLife: return "NightLife";
    case PlaceGroup::ArtNight: return "Art-night";
    case PlaceGroup::Services: return "Services";
    case PlaceGroup::EatingDrinking: return "Eating-drinking";
    case PlaceGroup::OrgActivity: return "Org. activity";
    case PlaceGroup::Outside: return "Outside";
    case PlaceGroup::Commercial: return "Commercial";
  }
  return "?";
}

PlaceGroup parse_place_group(std::string_view label) {
  for (PlaceGroup g : kPlaceGroups)
    if (to_string(g) == label) return g;
  throw ClassificationError("unknown place group '" + std::string(label) + "'");
}

const ClassificationMap& default_classification() {
  static const ClassificationMap map{
      {PlaceGroup::NightLife, {false, true, false}},
      {PlaceGroup::ArtNight, {false, true, false}},
      {PlaceGroup::Services, {true, false, false}},
      {PlaceGroup::EatingDrinking, {true, false, true}},
      {PlaceGroup::OrgActivity, {true, false, true}},
      {PlaceGroup::Outside, {true, false, true}},
      {PlaceGroup::Commercial, {false, false, true}},
  };
  return map;
}

PlaceFlags classify_place(PlaceGroup g, const ClassificationMap& map) {
  const auto it = map.find(g);
  if (it == map.end())
    throw ClassificationError("no classification for place group '" + std::string(to_string(g)) + "'");
  return it->second;
}

PlaceFlags classify_place(std::string_view label, const ClassificationMap& map) {
  return classify_place(parse_place_group(label), map);
}

std::string_view to_string(VacuumKind k) {
  switch (k) {
    case VacuumKind::SmallPark: return "small_park";
    case VacuumKind::LargePark: return "large_park";
    case VacuumKind::Railway: return "railway";
    case VacuumKind::Station: return "station";
    case VacuumKind::Highway: return "highway";
    case VacuumKind::Water: return "water";
  }
  return "?";
}

std::string_view to_string(LandUseClass c) {
  switch (c) {
    case LandUseClass::Residential: return "residential";
    case LandUseClass::Work: return "work";
    case LandUseClass::GreenWater: return "green-water";
  }
  return "?";
}

LandUseClass parse_land_use(std::string_view label) {
  for (LandUseClass c : {LandUseClass::Residential, LandUseClass::Work, LandUseClass::GreenWater})
    if (to_string(c) == label) return c;
  throw ClassificationError("unknown land-use class '" + std::string(label) + "'");
}

std::vector<Point> detect_intersections(const StreetGraph& g) {
  std::vector<std::set<std::size_t>> neighbours(g.nodes.size());
  for (const auto& [a, b] : g.segments) {
    if (a == b) continue;
    neighbours[a].insert(b);
    neighbours[b].insert(a);
  }
  std::vector<Point> out;
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (neighbours[i].size() >= 3) out.push_back(g.nodes[i]);
  return out;
}

FeatureSet::FeatureSet(std::vector<FeatureId> ids_, std::vector<Point> centroids_)
    : ids(std::move(ids_)), centroids(std::move(centroids_)), index(SpatialIndex::from_points(ids, centroids)) {}

VacuumSets prepare_vacuums(const std::vector<VacuumFeature>& features, const VacuumOptions& opts) {
  std::vector<Polygon> buffers;
  for (const auto& f : features)
    if (f.kind == VacuumKind::Station)
      buffers.push_back(regular_polygon(f.anchor, opts.station_buffer, opts.buffer_segments));

  // Parts sharing an id form one feature with one area-weighted centroid.
  struct Acc {
    Moments kept;
    double full = 0.0;
  };
  std::map<std::pair<VacuumKind, FeatureId>, Acc> acc;
  for (const auto& f : features) {
    if (f.kind == VacuumKind::Station) continue;
    Acc& a = acc[{f.kind, f.id}];
    Moments m = moments(f.polygon);
    a.full += m.area;
    if (f.kind == VacuumKind::Railway && !buffers.empty()) m -= overlap_moments(f.polygon, buffers);
    a.kept += m;
  }

  std::map<VacuumKind, std::pair<std::vector<FeatureId>, std::vector<Point>>> sets;
  for (const auto& [key, a] : acc) {
    if (!(a.kept.area > 1e-9 * a.full)) continue;  // railway fully inside station buffers
    auto& [ids, pts] = sets[key.first];
    ids.push_back(key.second);
    pts.emplace_back(a.kept.mx / a.kept.area, a.kept.my / a.kept.area);
  }
  auto take = [&](VacuumKind k) {
    auto& [ids, pts] = sets[k];
    return FeatureSet(std::move(ids), std::move(pts));
  };
  return {take(VacuumKind::SmallPark), take(VacuumKind::LargePark), take(VacuumKind::Railway),
          take(VacuumKind::Highway), take(VacuumKind::Water)};
}

std::vector<District> assemble_districts(const std::vector<Block>& blocks,
                                         const std::map<BlockId, CensusAggregate>& census,
                                         const std::vector<VacuumFeature>& vacuums,
                                         const std::vector<DistrictShape>& shapes,
                                         const NetAreaOptions& opts) {
  std::set<BlockId> block_ids;
  for (const auto& b : blocks) {
    if (!block_ids.insert(b.id).second)
      throw ValidationError("duplicate block id " + std::to_string(b.id));
    if (!census.contains(b.id))
      throw ValidationError("block " + std::to_string(b.id) + " has no census record");
  }
  for (const auto& [id, _] : census)
    if (!block_ids.contains(id))
      throw ValidationError("census record for unknown block id " + std::to_string(id));

  std::map<DistrictId, District> by_id;
  for (const auto& s : shapes) {
    District d;
    d.id = s.id;
    d.city = s.city;
    d.region = {s.polygon};
    if (!by_id.emplace(s.id, std::move(d)).second)
      throw ValidationError("duplicate district id " + std::to_string(s.id));
  }
  const bool explicit_shapes = !shapes.empty();

  for (const auto& b : blocks) {
    auto it = by_id.find(b.district_id);
    if (it == by_id.end()) {
      if (explicit_shapes)
        throw ValidationError("orphan block " + std::to_string(b.id) + ": district " +
                              std::to_string(b.district_id) + " is not defined");
      District d;
      d.id = b.district_id;
      it = by_id.emplace(b.district_id, std::move(d)).first;
    }
    District& d = it->second;
    d.blocks.push_back(b.id);
    d.census += census.at(b.id);
    if (explicit_shapes) {
      const double inside = intersect_area(b.polygon, d.region);
      if (inside < (1.0 - 1e-6) * polygon_area(b.polygon))
        throw ValidationError("block " + std::to_string(b.id) + " extends outside district " +
                              std::to_string(d.id));
    } else {
      d.region.push_back(b.polygon);
    }
  }

  std::vector<Polygon> excluded;
  for (const auto& v : vacuums) {
    const bool take = (v.kind == VacuumKind::Water && opts.exclude_water) ||
                      (v.kind == VacuumKind::LargePark &&
                       (opts.exclude_all_large_parks || (v.natural && opts.exclude_natural_large_parks)));
    if (take) excluded.push_back(v.polygon);
  }
  std::vector<Box> excluded_boxes;
  for (const auto& p : excluded) excluded_boxes.push_back(bounds(p));

  std::vector<District> out;
  out.reserve(by_id.size());
  for (auto& [id, d] : by_id) {
    if (d.blocks.empty()) throw ValidationError("district " + std::to_string(id) + " has no blocks");
    std::sort(d.blocks.begin(), d.blocks.end());
    d.gross_area = polygon_area(d.region);
    // Overlapping exclusions count once: each region part loses the area of
    // its intersection with the union of the excluded polygons.
    double removed = 0.0;
    for (const auto& part : d.region) {
      const Box pb = bounds(part);
      std::vector<Polygon> near;
      for (std::size_t k = 0; k < excluded.size(); ++k)
        if (pb.intersects(excluded_boxes[k])) near.push_back(excluded[k]);
      if (!near.empty()) removed += overlap_moments(part, near).area;
    }
    d.net_area = d.gross_area - removed;
    if (!(d.net_area > 0.0))
      throw ValidationError("district " + std::to_string(id) + " has no net area left after exclusions");
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace vitality
