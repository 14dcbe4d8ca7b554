#include "vitality/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vitality/csv.hpp"
#include "vitality/parallel.hpp"

namespace vitality {

namespace {

constexpr std::array<std::string_view, kMetricCount> kNames{
    "lum",
    "closeness_small_parks",
    "rnr",
    "housing_types",
    "commercial",
    "nightlife",
    "nightlife_density",
    "daily",
    "third_places",
    "mean_block_area",
    "intersection_density",
    "anisotropicity",
    "avg_building_age",
    "std_building_age",
    "employees_per_company",
    "population_density",
    "employment_density",
    "pop_emp_ratio",
    "apartments_per_building",
    "density_daily_places",
    "density_nondaily_places",
    "closeness_large_parks",
    "closeness_railways",
    "closeness_highways",
    "closeness_water",
};

/// Sum that does not depend on the order the terms arrive in.
double ordered_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

}  // namespace

std::string_view metric_name(Metric m) { return kNames[static_cast<std::size_t>(m)]; }

std::optional<Metric> parse_metric(std::string_view name) {
  for (std::size_t i = 0; i < kMetricCount; ++i)
    if (kNames[i] == name) return static_cast<Metric>(i);
  return std::nullopt;
}

std::array<Metric, kMetricCount> all_metrics() {
  std::array<Metric, kMetricCount> out{};
  for (std::size_t i = 0; i < kMetricCount; ++i) out[i] = static_cast<Metric>(i);
  return out;
}

LandUseAreas land_use_areas(const District& d, std::span<const LandUsePatch> patches) {
  std::array<std::vector<double>, 3> terms;
  const Box db = bounds(d.region);
  for (const auto& p : patches) {
    if (!db.intersects(bounds(p.polygon))) continue;
    const double a = intersect_area(p.polygon, d.region);
    if (a > 0.0) terms[static_cast<std::size_t>(p.klass)].push_back(a);
  }
  return {ordered_sum(terms[0]), ordered_sum(terms[1]), ordered_sum(terms[2])};
}

MetricValue land_use_mix(const LandUseAreas& areas) {
  const double total = areas[0] + areas[1] + areas[2];
  if (!(total > 0.0)) return MetricValue::missing("NoClassifiedLand");
  double h = 0.0;
  for (double a : areas)
    if (a > 0.0) {
      const double p = a / total;
      h -= p * std::log(p);
    }
  return MetricValue::of(std::clamp(h / std::log(3.0), 0.0, 1.0));
}

MetricValue rnr_balance(const LandUseAreas& areas) {
  const double res = areas[static_cast<std::size_t>(LandUseClass::Residential)];
  const double non = areas[static_cast<std::size_t>(LandUseClass::Work)];
  if (!(res + non > 0.0)) return MetricValue::missing("NoResNonResArea");
  return MetricValue::of(1.0 - std::abs(res - non) / (res + non));
}

MetricValue housing_types(const CensusAggregate& c, const MetricOptions& opts) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < c.floor_bands.size(); ++k) {
    num += static_cast<double>(c.floor_bands[k]) * opts.floor_values[k];
    den += static_cast<double>(c.floor_bands[k]);
  }
  if (den == 0.0) return MetricValue::missing("NoFloorData");
  return MetricValue::of(num / den);
}

MetricValue mean_block_closeness(std::span<const Point> block_centroids, const FeatureSet& features) {
  if (block_centroids.empty()) return MetricValue::missing("NoBlocks");
  if (features.empty()) return {0.0, "EmptyFeatureSet"};
  double sum = 0.0;
  for (const auto& c : block_centroids) sum += features.index.nearest(c).distance;
  const double mean = sum / static_cast<double>(block_centroids.size());
  if (!(mean > 0.0)) return MetricValue::missing("ZeroDistance");
  return MetricValue::of(1.0 / mean);
}

PlaceShares place_shares(std::span<const Place> places) {
  if (places.empty()) {
    const auto m = MetricValue::missing("NoPlaces");
    return {m, m, m};
  }
  std::size_t nondaily = 0, night = 0, third = 0;
  for (const auto& p : places) {
    nondaily += !p.flags.daily_use;
    night += p.flags.nightlife;
    third += p.flags.third_place;
  }
  const double n = static_cast<double>(places.size());
  return {MetricValue::of(static_cast<double>(nondaily) / n), MetricValue::of(static_cast<double>(night) / n),
          MetricValue::of(static_cast<double>(third) / n)};
}

PlaceDensities place_densities(std::span<const Place> places, double net_area) {
  std::size_t night = 0, daily = 0;
  for (const auto& p : places) {
    night += p.flags.nightlife;
    daily += p.flags.daily_use;
  }
  const std::size_t nondaily = places.size() - daily;
  return {MetricValue::of(static_cast<double>(night) / net_area),
          MetricValue::of(static_cast<double>(daily) / net_area),
          MetricValue::of(static_cast<double>(nondaily) / net_area)};
}

double block_anisotropicity(const Polygon& block) {
  const Circle c = min_enclosing_circle(block);
  return polygon_area(block) / (M_PI * c.radius * c.radius);
}

BlockShape block_shape_metrics(std::span<const Polygon> blocks, std::size_t intersections, double net_area) {
  const auto density = MetricValue::of(static_cast<double>(intersections) / net_area);
  if (blocks.empty()) {
    const auto m = MetricValue::missing("NoBlocks");
    return {m, density, m};
  }
  double area = 0.0, phi = 0.0;
  for (const auto& b : blocks) {
    area += polygon_area(b);
    phi += block_anisotropicity(b);
  }
  const double n = static_cast<double>(blocks.size());
  return {MetricValue::of(area / n), density, MetricValue::of(phi / n)};
}

double band_age(const AgeBand& b, int reference_year) {
  return ((reference_year - b.start) + (reference_year - b.end)) / 2.0;
}

AgeStats building_age_stats(const CensusAggregate& c, const MetricOptions& opts) {
  const std::size_t nb = c.age_bands.size();
  double total = 0.0, weighted = 0.0, squares = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const double n = static_cast<double>(c.age_bands[b]);
    total += n;
    weighted += n * band_age(opts.age_bands[b], opts.reference_year);
    squares += n * n;
  }
  if (total == 0.0) {
    const auto m = MetricValue::missing("NoAgeData");
    return {m, m};
  }
  const double avg = weighted / total;
  double dispersion = 0.0;
  if (opts.age_dispersion == AgeDispersion::Verbatim) {
    const double mean_count = total / static_cast<double>(nb);
    double var = 0.0;
    for (auto n : c.age_bands) var += (static_cast<double>(n) - mean_count) * (static_cast<double>(n) - mean_count);
    var /= static_cast<double>(nb);
    dispersion = squares / (total * total) * var;
  } else {
    double ss = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const double dev = band_age(opts.age_bands[b], opts.reference_year) - avg;
      ss += static_cast<double>(c.age_bands[b]) * dev * dev;
    }
    dispersion = std::sqrt(ss / total);
  }
  return {MetricValue::of(avg), MetricValue::of(dispersion)};
}

Concentration concentration_metrics(const CensusAggregate& c, double net_area, const MetricOptions& opts) {
  Concentration out;
  const double pd = static_cast<double>(c.residents) / net_area;
  const double ed = static_cast<double>(c.employees) / net_area;
  out.population_density = MetricValue::of(pd);
  out.employment_density = MetricValue::of(ed);
  out.pop_emp_ratio = c.employees > 0 ? MetricValue::of(pd / ed) : MetricValue::missing("NoEmployees");
  if (c.used_buildings > 0) {
    double apartments = 0.0;
    for (std::size_t k = 0; k < c.apartment_bands.size(); ++k)
      apartments += static_cast<double>(c.apartment_bands[k]) * opts.apartment_midpoints[k];
    out.apartments_per_building = MetricValue::of(apartments / static_cast<double>(c.used_buildings));
  } else {
    out.apartments_per_building = MetricValue::missing("NoBuildings");
  }
  return out;
}

MetricValue employees_per_company(std::span<const Company> companies) {
  if (companies.empty()) return MetricValue::missing("NoCompanies");
  double sum = 0.0;
  for (const auto& c : companies) sum += c.employees;
  return MetricValue::of(sum / static_cast<double>(companies.size()));
}

std::ptrdiff_t locate_district(const std::vector<District>& districts, const SpatialIndex& index, const Point& p) {
  if (index.empty()) return -1;
  std::ptrdiff_t best = -1;
  for (FeatureId k : index.query(Box(p, p))) {
    const auto& d = districts[static_cast<std::size_t>(k)];
    if (contains(d.region, p) && (best < 0 || d.id < districts[static_cast<std::size_t>(best)].id))
      best = static_cast<std::ptrdiff_t>(k);
  }
  return best;
}

MetricContext::MetricContext(const CityData& city, const VacuumOptions& vacuum_opts)
    : city_(&city), vacuums_(prepare_vacuums(city.vacuums, vacuum_opts)) {
  const std::size_t nd = city.districts.size();
  places_.resize(nd);
  companies_.resize(nd);
  intersections_.assign(nd, 0);
  blocks_.resize(nd);

  std::vector<IndexEntry> entries;
  for (std::size_t k = 0; k < nd; ++k)
    entries.push_back({static_cast<FeatureId>(k), bounds(city.districts[k].region)});
  const SpatialIndex index(std::move(entries));

  std::vector<FeatureId> daily_ids;
  std::vector<Point> daily_pts;
  for (const auto& p : city.places) {
    if (p.flags.daily_use) {
      daily_ids.push_back(p.id);
      daily_pts.push_back(p.location);
    }
    const auto k = locate_district(city.districts, index, p.location);
    if (k >= 0) places_[static_cast<std::size_t>(k)].push_back(p);
  }
  daily_ = FeatureSet(std::move(daily_ids), std::move(daily_pts));

  for (const auto& c : city.companies) {
    const auto k = locate_district(city.districts, index, c.location);
    if (k >= 0) companies_[static_cast<std::size_t>(k)].push_back(c);
  }
  for (const auto& q : detect_intersections(city.streets)) {
    const auto k = locate_district(city.districts, index, q);
    if (k >= 0) ++intersections_[static_cast<std::size_t>(k)];
  }

  std::map<DistrictId, std::size_t> position;
  for (std::size_t k = 0; k < nd; ++k) position.emplace(city.districts[k].id, k);
  for (const auto& b : city.blocks) {
    const auto it = position.find(b.district_id);
    if (it != position.end()) blocks_[it->second].push_back(&b);
  }

  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  for (auto& v : places_) std::sort(v.begin(), v.end(), by_id);
  for (auto& v : companies_) std::sort(v.begin(), v.end(), by_id);
  for (auto& v : blocks_) std::sort(v.begin(), v.end(), [](const Block* a, const Block* b) { return a->id < b->id; });
}

FeatureVector compute_feature_vector(std::size_t k, const MetricContext& ctx, const MetricOptions& opts) {
  const District& d = ctx.city().districts[k];
  FeatureVector fv;
  fv.district = d.id;

  std::vector<Point> centroids;
  std::vector<Polygon> polygons;
  for (const Block* b : ctx.blocks_in(k)) {
    centroids.push_back(b->centroid);
    polygons.push_back(b->polygon);
  }

  const LandUseAreas lu = land_use_areas(d, ctx.city().landuse);
  fv[Metric::Lum] = land_use_mix(lu);
  fv[Metric::Rnr] = rnr_balance(lu);
  fv[Metric::HousingTypes] = housing_types(d.census, opts);

  const auto& vac = ctx.vacuums();
  fv[Metric::ClosenessSmallParks] = mean_block_closeness(centroids, vac.small_parks);
  fv[Metric::Daily] = mean_block_closeness(centroids, ctx.daily_places());
  fv[Metric::ClosenessLargeParks] = mean_block_closeness(centroids, vac.large_parks);
  fv[Metric::ClosenessRailways] = mean_block_closeness(centroids, vac.railways);
  fv[Metric::ClosenessHighways] = mean_block_closeness(centroids, vac.highways);
  fv[Metric::ClosenessWater] = mean_block_closeness(centroids, vac.water);

  const auto places = ctx.places_in(k);
  const PlaceShares shares = place_shares(places);
  fv[Metric::Commercial] = shares.commercial;
  fv[Metric::Nightlife] = shares.nightlife;
  fv[Metric::ThirdPlaces] = shares.third_places;
  const PlaceDensities dens = place_densities(places, d.net_area);
  fv[Metric::NightlifeDensity] = dens.nightlife_density;
  fv[Metric::DensityDailyPlaces] = dens.density_daily;
  fv[Metric::DensityNondailyPlaces] = dens.density_nondaily;

  const BlockShape shape = block_shape_metrics(polygons, ctx.intersections_in(k), d.net_area);
  fv[Metric::MeanBlockArea] = shape.mean_block_area;
  fv[Metric::IntersectionDensity] = shape.intersection_density;
  fv[Metric::Anisotropicity] = shape.anisotropicity;

  const AgeStats age = building_age_stats(d.census, opts);
  fv[Metric::AvgBuildingAge] = age.avg;
  fv[Metric::StdBuildingAge] = age.std;

  fv[Metric::EmployeesPerCompany] = employees_per_company(ctx.companies_in(k));

  const Concentration conc = concentration_metrics(d.census, d.net_area, opts);
  fv[Metric::PopulationDensity] = conc.population_density;
  fv[Metric::EmploymentDensity] = conc.employment_density;
  fv[Metric::PopEmpRatio] = conc.pop_emp_ratio;
  fv[Metric::ApartmentsPerBuilding] = conc.apartments_per_building;
  return fv;
}

std::vector<FeatureVector> compute_features(const CityData& city, const MetricOptions& opts,
                                            const VacuumOptions& vacuum_opts, unsigned jobs) {
  const MetricContext ctx(city, vacuum_opts);
  std::vector<FeatureVector> out(city.districts.size());
  parallel_for(out.size(), jobs, [&](std::size_t k) { out[k] = compute_feature_vector(k, ctx, opts); });
  return out;
}

void write_features(const std::filesystem::path& values, const std::filesystem::path& flags,
                    std::span<const FeatureVector> rows) {
  CsvTable v, f;
  v.header.push_back("district_id");
  for (auto name : kNames) v.header.emplace_back(name);
  f.header = v.header;
  for (const auto& fv : rows) {
    std::vector<std::string> vr{std::to_string(fv.district)}, fr{std::to_string(fv.district)};
    for (const auto& m : fv.metrics) {
      vr.push_back(m.value ? format_number(*m.value) : std::string());
      fr.push_back(m.flag);
    }
    v.rows.push_back(std::move(vr));
    f.rows.push_back(std::move(fr));
  }
  write_csv(values, v);
  write_csv(flags, f);
}

std::vector<FeatureVector> read_features(const std::filesystem::path& values) {
  const CsvTable t = read_csv(values);
  const std::string where = values.string();
  const std::size_t id_col = t.column("district_id", where);
  std::array<std::size_t, kMetricCount> cols{};
  for (std::size_t i = 0; i < kMetricCount; ++i) cols[i] = t.column(kNames[i], where);
  std::vector<FeatureVector> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string at = where + ": row " + std::to_string(r + 1);
    FeatureVector fv;
    fv.district = parse_int(row[id_col], at);
    for (std::size_t i = 0; i < kMetricCount; ++i)
      fv.metrics[i] = row[cols[i]].empty() ? MetricValue::missing("Missing")
                                           : MetricValue::of(parse_double(row[cols[i]], at));
    out.push_back(std::move(fv));
  }
  return out;
}

}  // namespace vitality
