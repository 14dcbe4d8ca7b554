#include "vitality/ingest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vitality/csv.hpp"

namespace vitality {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kCensusColumns[] = {"block_id", "P1",  "E2",  "E3",  "E8",  "E9",  "E10", "E11", "E12",
                                "E13",      "E14", "E15", "E16", "E17", "E18", "E19", "E20", "E21",
                                "E22",      "E23", "E24", "E25", "E26", "ADDETTI"};

struct RawFeature {
  std::size_t index;
  const json* geometry;
  const json* properties;
};

class FeatureFile {
 public:
  explicit FeatureFile(const fs::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(path_, std::nullopt, "cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    try {
      doc_ = json::parse(text);
    } catch (const json::parse_error& e) {
      std::size_t line = 1, col = 1;
      for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      throw ValidationError(path_, std::nullopt,
                            "parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                                " (byte " + std::to_string(e.byte) + ")");
    }
    if (!doc_.is_object() || doc_.value("type", "") != "FeatureCollection")
      throw ValidationError(path_, std::nullopt, "not a GeoJSON FeatureCollection");
    const auto crs = doc_.find("crs_units");
    if (crs == doc_.end() || !crs->is_string() || *crs != "meters")
      throw ValidationError(path_, std::nullopt,
                            "CRS not declared projected: expected top-level \"crs_units\": \"meters\"");
    const auto feats = doc_.find("features");
    if (feats == doc_.end() || !feats->is_array())
      throw ValidationError(path_, std::nullopt, "missing \"features\" array");
    for (std::size_t i = 0; i < feats->size(); ++i) {
      const json& f = (*feats)[i];
      if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object())
        throw ValidationError(path_, i, "feature without geometry");
      static const json empty = json::object();
      const json* props = f.contains("properties") && f["properties"].is_object() ? &f["properties"] : &empty;
      features_.push_back({i, &f["geometry"], props});
    }
  }

  const std::vector<RawFeature>& features() const { return features_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(std::size_t feature, const std::string& msg) const {
    throw ValidationError(path_, feature, msg);
  }

  const json& require(const RawFeature& f, const char* key) const {
    const auto it = f.properties->find(key);
    if (it == f.properties->end() || it->is_null())
      fail(f.index, std::string("missing property '") + key + "'");
    return *it;
  }

  std::int64_t require_int(const RawFeature& f, const char* key) const {
    const json& v = require(f, key);
    if (!v.is_number_integer()) fail(f.index, std::string("property '") + key + "' must be an integer");
    return v.get<std::int64_t>();
  }

  std::string require_string(const RawFeature& f, const char* key) const {
    const json& v = require(f, key);
    if (!v.is_string()) fail(f.index, std::string("property '") + key + "' must be a string");
    return v.get<std::string>();
  }

  Point point(const RawFeature& f, const json& coords) const {
    if (!coords.is_array() || coords.size() < 2 || !coords[0].is_number() || !coords[1].is_number())
      fail(f.index, "malformed coordinate");
    Point p(coords[0].get<double>(), coords[1].get<double>());
    if (!p.allFinite()) fail(f.index, "non-finite coordinate");
    return p;
  }

  Ring ring(const RawFeature& f, const json& coords) const {
    if (!coords.is_array()) fail(f.index, "malformed ring");
    Ring r;
    for (const auto& c : coords) r.push_back(point(f, c));
    if (r.size() < 4 || r.front() != r.back()) fail(f.index, "ring is not closed or has fewer than 4 positions");
    return r;
  }

  Polygon polygon_from(const RawFeature& f, const json& rings) const {
    if (!rings.is_array() || rings.empty()) fail(f.index, "polygon without rings");
    std::vector<Ring> holes;
    for (std::size_t k = 1; k < rings.size(); ++k) holes.push_back(ring(f, rings[k]));
    Polygon p = make_polygon(ring(f, rings[0]), std::move(holes));
    try {
      validate(p);
    } catch (const GeometryError& e) {
      fail(f.index, std::string("invalid geometry: ") + e.what());
    }
    return p;
  }

  /// Polygon or MultiPolygon geometry as a list of polygons.
  std::vector<Polygon> polygons(const RawFeature& f) const {
    const std::string type = f.geometry->value("type", "");
    const json& coords = (*f.geometry)["coordinates"];
    if (type == "Polygon") return {polygon_from(f, coords)};
    if (type == "MultiPolygon") {
      std::vector<Polygon> out;
      for (const auto& p : coords) out.push_back(polygon_from(f, p));
      return out;
    }
    fail(f.index, "expected Polygon or MultiPolygon geometry, found '" + type + "'");
  }

  Polygon single_polygon(const RawFeature& f) const {
    if (f.geometry->value("type", "") != "Polygon") fail(f.index, "expected Polygon geometry");
    return polygon_from(f, (*f.geometry)["coordinates"]);
  }

  Point single_point(const RawFeature& f) const {
    if (f.geometry->value("type", "") != "Point") fail(f.index, "expected Point geometry");
    return point(f, (*f.geometry)["coordinates"]);
  }

 private:
  std::string path_;
  json doc_;
  std::vector<RawFeature> features_;
};

json collection() {
  return json{{"type", "FeatureCollection"}, {"crs_units", "meters"}, {"features", json::array()}};
}

json coords(const Point& p) { return json::array({p.x(), p.y()}); }

json ring_json(const Ring& r) {
  json out = json::array();
  for (const auto& p : r) out.push_back(coords(p));
  return out;
}

json polygon_json(const Polygon& p) {
  json rings = json::array({ring_json(p.exterior)});
  for (const auto& h : p.holes) rings.push_back(ring_json(h));
  return json{{"type", "Polygon"}, {"coordinates", rings}};
}

json feature(json geometry, json properties) {
  return json{{"type", "Feature"}, {"properties", std::move(properties)}, {"geometry", std::move(geometry)}};
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump() << '\n';
}

template <typename Id>
void check_unique(std::set<Id>& seen, Id id, const FeatureFile& file, std::size_t index) {
  if (!seen.insert(id).second) file.fail(index, "duplicate id " + std::to_string(id));
}

}  // namespace

std::vector<Block> load_blocks(const fs::path& path) {
  FeatureFile file(path);
  std::vector<Block> out;
  std::set<BlockId> seen;
  for (const auto& f : file.features()) {
    Block b;
    b.id = file.require_int(f, "id");
    b.district_id = file.require_int(f, "district_id");
    check_unique(seen, b.id, file, f.index);
    b.polygon = file.single_polygon(f);
    b.centroid = centroid(b.polygon);
    out.push_back(std::move(b));
  }
  std::sort(out.begin(), out.end(), [](const Block& a, const Block& b) { return a.id < b.id; });
  return out;
}

std::vector<DistrictShape> load_districts(const fs::path& path) {
  FeatureFile file(path);
  std::vector<DistrictShape> out;
  std::set<DistrictId> seen;
  for (const auto& f : file.features()) {
    DistrictShape d;
    d.id = file.require_int(f, "id");
    check_unique(seen, d.id, file, f.index);
    d.city = f.properties->value("city", "");
    d.polygon = file.single_polygon(f);
    out.push_back(std::move(d));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<LandUsePatch> load_landuse(const fs::path& path) {
  FeatureFile file(path);
  std::vector<LandUsePatch> out;
  for (const auto& f : file.features()) {
    LandUseClass klass;
    try {
      klass = parse_land_use(file.require_string(f, "klass"));
    } catch (const ClassificationError& e) {
      file.fail(f.index, e.what());
    }
    for (auto& p : file.polygons(f)) out.push_back({std::move(p), klass});
  }
  return out;
}

std::vector<VacuumFeature> load_vacuums(const fs::path& path, const VacuumOptions& opts) {
  FeatureFile file(path);
  std::vector<VacuumFeature> out;
  std::set<FeatureId> seen;
  for (const auto& f : file.features()) {
    const FeatureId id = file.require_int(f, "id");
    check_unique(seen, id, file, f.index);
    const std::string kind = file.require_string(f, "kind");
    const bool natural = f.properties->value("natural", false);

    if (kind == "station") {
      VacuumFeature v;
      v.id = id;
      v.kind = VacuumKind::Station;
      if (f.geometry->value("type", "") == "Point") {
        v.anchor = file.single_point(f);
      } else {
        v.polygon = file.single_polygon(f);
        v.anchor = centroid(v.polygon);
      }
      out.push_back(std::move(v));
      continue;
    }

    VacuumKind k;
    if (kind == "park" || kind == "small_park" || kind == "large_park") k = VacuumKind::SmallPark;
    else if (kind == "railway") k = VacuumKind::Railway;
    else if (kind == "highway") k = VacuumKind::Highway;
    else if (kind == "water") k = VacuumKind::Water;
    else file.fail(f.index, "unknown vacuum kind '" + kind + "'");

    // A MultiPolygon feature is one feature: its parts share the id and the
    // representative point is the area-weighted centroid of all parts.
    const auto parts = file.polygons(f);
    Moments total;
    for (const auto& p : parts) total += moments(p);
    if (k == VacuumKind::SmallPark) {
      const bool large = total.area >= opts.small_park_max_area;
      if ((kind == "small_park" && large) || (kind == "large_park" && !large))
        file.fail(f.index, "park kind '" + kind + "' contradicts its area of " + format_number(total.area) + " m²");
      k = large ? VacuumKind::LargePark : VacuumKind::SmallPark;
    }
    for (const auto& p : parts) {
      VacuumFeature v;
      v.id = id;
      v.kind = k;
      v.polygon = p;
      v.anchor = Point(total.mx / total.area, total.my / total.area);
      v.natural = natural;
      out.push_back(std::move(v));
    }
  }
  return out;
}

PlaceLayer load_places(const fs::path& path, const ClassificationMap& classification) {
  FeatureFile file(path);
  PlaceLayer out;
  std::set<FeatureId> seen;
  for (const auto& f : file.features()) {
    const FeatureId id = file.require_int(f, "id");
    check_unique(seen, id, file, f.index);
    const std::string group = file.require_string(f, "group");
    const Point loc = file.single_point(f);
    if (group == "company") {
      const json& e = file.require(f, "employees");
      if (!e.is_number() || e.get<double>() < 0.0) file.fail(f.index, "employees must be a non-negative number");
      out.companies.push_back({id, loc, e.get<double>()});
      continue;
    }
    try {
      const PlaceGroup g = parse_place_group(group);
      out.places.push_back({id, loc, g, classify_place(g, classification)});
    } catch (const ClassificationError& e) {
      file.fail(f.index, e.what());
    }
  }
  return out;
}

StreetGraph load_streets(const fs::path& path) {
  FeatureFile file(path);
  StreetGraph g;
  std::map<std::pair<double, double>, std::size_t> node_of;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  auto node = [&](const Point& p) {
    const auto key = std::make_pair(p.x(), p.y());
    auto [it, inserted] = node_of.emplace(key, g.nodes.size());
    if (inserted) g.nodes.push_back(p);
    return it->second;
  };
  auto add_line = [&](const RawFeature& f, const json& line) {
    if (!line.is_array() || line.size() < 2) file.fail(f.index, "LineString needs at least 2 positions");
    std::size_t prev = node(file.point(f, line[0]));
    for (std::size_t k = 1; k < line.size(); ++k) {
      const std::size_t cur = node(file.point(f, line[k]));
      if (cur != prev) {
        const auto e = std::minmax(prev, cur);
        if (seen.insert(e).second) g.segments.push_back(e);
      }
      prev = cur;
    }
  };
  for (const auto& f : file.features()) {
    const std::string type = f.geometry->value("type", "");
    const json& c = (*f.geometry)["coordinates"];
    if (type == "LineString") add_line(f, c);
    else if (type == "MultiLineString")
      for (const auto& line : c) add_line(f, line);
    else file.fail(f.index, "expected LineString or MultiLineString geometry");
  }
  return g;
}

std::vector<RadioStation> load_stations(const fs::path& path) {
  FeatureFile file(path);
  std::vector<RadioStation> out;
  std::set<FeatureId> seen;
  for (const auto& f : file.features()) {
    const FeatureId id = file.require_int(f, "id");
    check_unique(seen, id, file, f.index);
    out.push_back({id, file.single_point(f)});
  }
  return out;
}

Polygon load_boundary(const fs::path& path) {
  FeatureFile file(path);
  if (file.features().empty()) throw ValidationError(path.string(), std::nullopt, "boundary layer is empty");
  return file.single_polygon(file.features().front());
}

std::map<BlockId, CensusAggregate> load_census_table(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::string where = path.string();
  const std::size_t ncols = std::size(kCensusColumns);
  if (t.header.size() != ncols)
    throw ValidationError(where, std::nullopt, "census header must have exactly " + std::to_string(ncols) + " columns");
  for (std::size_t i = 0; i < ncols; ++i)
    if (t.header[i] != kCensusColumns[i])
      throw ValidationError(where, std::nullopt,
                            "census column " + std::to_string(i) + " must be '" + kCensusColumns[i] + "', found '" +
                                t.header[i] + "'");

  std::map<BlockId, CensusAggregate> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string at = where + ": row " + std::to_string(r + 1);
    std::array<std::int64_t, 24> v{};
    for (std::size_t i = 0; i < ncols; ++i) {
      v[i] = parse_int(row[i], at);
      if (i > 0 && v[i] < 0)
        throw ValidationError(at, std::nullopt, std::string("negative count in column ") + kCensusColumns[i]);
    }
    CensusAggregate c;
    c.residents = v[1];
    c.used_buildings = v[2];
    c.residential_buildings = v[3];
    for (std::size_t i = 0; i < 9; ++i) c.age_bands[i] = v[4 + i];
    for (std::size_t i = 0; i < 4; ++i) c.floor_bands[i] = v[13 + i];
    for (std::size_t i = 0; i < 6; ++i) c.apartment_bands[i] = v[17 + i];
    c.employees = v[23];
    if (!out.emplace(v[0], c).second)
      throw ValidationError(at, std::nullopt, "duplicate block id " + std::to_string(v[0]));
  }
  return out;
}

std::vector<ActivityRecord> load_activity_records(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::string where = path.string();
  const std::size_t cs = t.column("station_id", where);
  const std::size_t ch = t.column("iso_hour", where);
  const std::size_t cc = t.column("connections", where);
  std::vector<ActivityRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string at = where + ": row " + std::to_string(r + 1);
    ActivityRecord rec;
    rec.station_id = parse_int(row[cs], at);
    try {
      rec.hour = parse_iso_hour(row[ch]);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(at, std::nullopt, e.what());
    }
    rec.connections = parse_double(row[cc], at);
    if (!(rec.connections >= 0.0) || !std::isfinite(rec.connections))
      throw ValidationError(at, std::nullopt, "connections must be a non-negative number");
    out.push_back(rec);
  }
  return out;
}

void write_blocks(const fs::path& path, const std::vector<Block>& blocks) {
  json doc = collection();
  for (const auto& b : blocks)
    doc["features"].push_back(feature(polygon_json(b.polygon), {{"id", b.id}, {"district_id", b.district_id}}));
  write_json(path, doc);
}

void write_districts(const fs::path& path, const std::vector<DistrictShape>& districts) {
  json doc = collection();
  for (const auto& d : districts)
    doc["features"].push_back(feature(polygon_json(d.polygon), {{"id", d.id}, {"city", d.city}}));
  write_json(path, doc);
}

void write_landuse(const fs::path& path, const std::vector<LandUsePatch>& patches) {
  json doc = collection();
  for (const auto& p : patches)
    doc["features"].push_back(feature(polygon_json(p.polygon), {{"klass", std::string(to_string(p.klass))}}));
  write_json(path, doc);
}

void write_vacuums(const fs::path& path, const std::vector<VacuumFeature>& features) {
  json doc = collection();
  for (const auto& v : features) {
    json props{{"id", v.id}, {"kind", std::string(to_string(v.kind))}};
    if (v.natural) props["natural"] = true;
    if (v.kind == VacuumKind::Station && v.polygon.exterior.empty())
      doc["features"].push_back(feature({{"type", "Point"}, {"coordinates", coords(v.anchor)}}, props));
    else
      doc["features"].push_back(feature(polygon_json(v.polygon), props));
  }
  write_json(path, doc);
}

void write_places(const fs::path& path, const std::vector<Place>& places, const std::vector<Company>& companies) {
  json doc = collection();
  for (const auto& p : places)
    doc["features"].push_back(feature({{"type", "Point"}, {"coordinates", coords(p.location)}},
                                      {{"id", p.id}, {"group", std::string(to_string(p.group))}}));
  for (const auto& c : companies)
    doc["features"].push_back(feature({{"type", "Point"}, {"coordinates", coords(c.location)}},
                                      {{"id", c.id}, {"group", "company"}, {"employees", c.employees}}));
  write_json(path, doc);
}

void write_streets(const fs::path& path, const StreetGraph& streets) {
  json doc = collection();
  for (const auto& [a, b] : streets.segments)
    doc["features"].push_back(
        feature({{"type", "LineString"}, {"coordinates", json::array({coords(streets.nodes[a]), coords(streets.nodes[b])})}},
                json::object()));
  write_json(path, doc);
}

void write_stations(const fs::path& path, const std::vector<RadioStation>& stations) {
  json doc = collection();
  for (const auto& s : stations)
    doc["features"].push_back(feature({{"type", "Point"}, {"coordinates", coords(s.location)}}, {{"id", s.id}}));
  write_json(path, doc);
}

void write_boundary(const fs::path& path, const Polygon& boundary) {
  json doc = collection();
  doc["features"].push_back(feature(polygon_json(boundary), json::object()));
  write_json(path, doc);
}

void write_census_table(const fs::path& path, const std::map<BlockId, CensusAggregate>& census) {
  CsvTable t;
  t.header.assign(std::begin(kCensusColumns), std::end(kCensusColumns));
  for (const auto& [id, c] : census) {
    std::vector<std::string> row{std::to_string(id), std::to_string(c.residents), std::to_string(c.used_buildings),
                                 std::to_string(c.residential_buildings)};
    for (auto v : c.age_bands) row.push_back(std::to_string(v));
    for (auto v : c.floor_bands) row.push_back(std::to_string(v));
    for (auto v : c.apartment_bands) row.push_back(std::to_string(v));
    row.push_back(std::to_string(c.employees));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void write_activity_records(const fs::path& path, const std::vector<ActivityRecord>& records) {
  CsvTable t;
  t.header = {"station_id", "iso_hour", "connections"};
  for (const auto& r : records)
    t.rows.push_back({std::to_string(r.station_id), format_iso_hour(r.hour), format_number(r.connections)});
  write_csv(path, t);
}

}  // namespace vitality
