#include "vitality/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <toml.hpp>

#include "vitality/config.hpp"
#include "vitality/csv.hpp"
#include "vitality/ingest.hpp"
#include "vitality/stats.hpp"

namespace vitality {

namespace fs = std::filesystem;

namespace {

/// Lattice units per cell side; every subdivision 1..4 divides it.
constexpr int kUnits = 12;

// Independent random streams so that optional stages never shift the others.
enum Stream : std::uint64_t { kLayout = 1, kLandUse, kCensus, kPlaces, kStations, kNoise };

std::mt19937_64 stream(const SynthSpec& s, Stream k) { return std::mt19937_64(derive_seed(s.seed, 0x5e11, k)); }

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

std::int64_t poisson(std::mt19937_64& rng, double mean) {
  return mean > 0.0 ? std::poisson_distribution<std::int64_t>(mean)(rng) : 0;
}

/// Axis-aligned rectangle in lattice units.
struct URect {
  int i0, j0, i1, j1;
};

struct SynthBlock {
  URect r;
  LandUseClass klass;
};

struct DistrictPlan {
  DistrictId id;
  int ax, ay;  // district column and row
  int fx, fy;
  std::vector<std::pair<int, int>> water;  // cells
  std::vector<SynthBlock> blocks;
  std::vector<std::size_t> block_index;  // into the city block list
};

/// Exact metric values of one district computed from its construction.
struct TruthInput {
  const DistrictPlan* plan;
  double gross, net;
  CensusAggregate census;
  std::array<std::size_t, 7> group_counts{};
  std::vector<double> employees;
  std::size_t intersections = 0;
};

double closeness(const std::vector<Point>& from, const std::vector<Point>& to) {
  double sum = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, std::hypot(p.x() - q.x(), p.y() - q.y()));
    sum += best;
  }
  return 1.0 / (sum / static_cast<double>(from.size()));
}

}  // namespace

void SynthSpec::validate() const {
  if (grid_x < 3 || grid_y < 3) throw SynthSpecError("grid dimensions must be at least 3");
  if (district_tile < 1 || grid_x % district_tile != 0 || grid_y % district_tile != 0)
    throw SynthSpecError("district_tile must divide both grid dimensions");
  if (!(block_size > 0.0)) throw SynthSpecError("block_size must be positive");
  if (!(noise_sd >= 0.0)) throw SynthSpecError("noise_sd must be non-negative");
  if (water_cells < 0 || water_cells > district_count())
    throw SynthSpecError("water_cells must lie in [0, number of districts]");
  if (water_cells > 0 && district_tile < 2) throw SynthSpecError("water cells need district_tile >= 2");
  if (activity && !(station_factor > 0.0)) throw SynthSpecError("station count must be positive");
  if (days < 1) throw SynthSpecError("days must be positive");
  for (const auto& [g, v] : place_intensity)
    if (!(v >= 0.0)) throw SynthSpecError("place intensity must be non-negative");
  for (const auto& [name, b] : beta) {
    if (!parse_metric(name)) throw SynthSpecError("unknown metric '" + name + "' in beta");
    if (!std::isfinite(b)) throw SynthSpecError("beta for '" + name + "' is not finite");
  }
  parse_iso_date(start_date);
}

std::map<std::string, double> jacobs_beta() {
  return {{"intersection_density", 0.4},
          {"employment_density", 0.4},
          {"third_places", 0.3},
          {"closeness_highways", -0.3}};
}

SynthCity generate_city(const SynthSpec& spec) {
  spec.validate();
  SynthCity out;
  out.spec = spec;
  const int k = spec.district_tile;
  const int nx = spec.grid_x * kUnits, ny = spec.grid_y * kUnits;
  const double unit = spec.block_size / kUnits;
  auto coord = [&](int i) { return static_cast<double>(i) * unit; };
  const double width = coord(nx), height = coord(ny);
  const double cell_area = spec.block_size * spec.block_size;

  // Districts, subdivisions and lakes.
  auto layout = stream(spec, kLayout);
  std::vector<DistrictPlan> plans;
  for (int ay = 0; ay < spec.districts_y(); ++ay)
    for (int ax = 0; ax < spec.districts_x(); ++ax) {
      DistrictPlan p;
      p.id = static_cast<DistrictId>(plans.size() + 1);
      p.ax = ax;
      p.ay = ay;
      p.fx = std::uniform_int_distribution<int>(1, 4)(layout);
      p.fy = std::uniform_int_distribution<int>(1, 4)(layout);
      plans.push_back(std::move(p));
    }
  {
    std::vector<std::size_t> order(plans.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), layout);
    for (int w = 0; w < spec.water_cells; ++w) {
      auto& p = plans[order[static_cast<std::size_t>(w)]];
      const int c = std::uniform_int_distribution<int>(0, k * k - 1)(layout);
      p.water.push_back({p.ax * k + c % k, p.ay * k + c / k});
    }
  }
  auto plan_of_cell = [&](int cx, int cy) -> DistrictPlan& {
    return plans[static_cast<std::size_t>((cy / k) * spec.districts_x() + cx / k)];
  };

  // Blocks, in global row-major cell order.
  auto landuse_rng = stream(spec, kLandUse);
  std::vector<std::array<double, 3>> class_weights;
  for (std::size_t d = 0; d < plans.size(); ++d)
    class_weights.push_back({uniform(landuse_rng, 0.05, 1.0), uniform(landuse_rng, 0.05, 1.0),
                             uniform(landuse_rng, 0.0, 0.5)});
  for (int cy = 0; cy < spec.grid_y; ++cy)
    for (int cx = 0; cx < spec.grid_x; ++cx) {
      auto& p = plan_of_cell(cx, cy);
      if (std::find(p.water.begin(), p.water.end(), std::pair{cx, cy}) != p.water.end()) continue;
      const auto& w = class_weights[static_cast<std::size_t>(p.id - 1)];
      std::discrete_distribution<int> pick({w[0], w[1], w[2]});
      for (int j = 0; j < p.fy; ++j)
        for (int i = 0; i < p.fx; ++i) {
          const URect r{cx * kUnits + i * kUnits / p.fx, cy * kUnits + j * kUnits / p.fy,
                        cx * kUnits + (i + 1) * kUnits / p.fx, cy * kUnits + (j + 1) * kUnits / p.fy};
          p.block_index.push_back(out.city.blocks.size());
          p.blocks.push_back({r, static_cast<LandUseClass>(pick(landuse_rng))});
          Block b;
          b.id = static_cast<BlockId>(out.city.blocks.size() + 1);
          b.district_id = p.id;
          b.polygon = rectangle(coord(r.i0), coord(r.j0), coord(r.i1), coord(r.j1));
          b.centroid = centroid(b.polygon);
          out.city.blocks.push_back(std::move(b));
        }
    }
  for (auto& p : plans) {
    // At least one residential block keeps the residential/work balance defined.
    const bool any = std::any_of(p.blocks.begin(), p.blocks.end(), [](const SynthBlock& b) {
      return b.klass != LandUseClass::GreenWater;
    });
    if (!any) p.blocks.front().klass = LandUseClass::Residential;
    for (std::size_t b = 0; b < p.blocks.size(); ++b)
      out.city.landuse.push_back({out.city.blocks[p.block_index[b]].polygon, p.blocks[b].klass});
  }

  // Vacuums: lakes inside the grid, everything else around it.
  FeatureId vid = 1;
  std::vector<Point> small_parks, large_parks, railways, highways, water;
  auto add_vacuum = [&](VacuumKind kind, double x0, double y0, double x1, double y1, bool natural = false) {
    VacuumFeature v;
    v.id = vid++;
    v.kind = kind;
    v.polygon = rectangle(x0, y0, x1, y1);
    v.anchor = Point((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    v.natural = natural;
    out.city.vacuums.push_back(v);
    return v.anchor;
  };
  std::vector<Polygon> water_polygons;
  for (const auto& p : plans)
    for (const auto& [cx, cy] : p.water) {
      water.push_back(add_vacuum(VacuumKind::Water, coord(cx * kUnits), coord(cy * kUnits), coord((cx + 1) * kUnits),
                                 coord((cy + 1) * kUnits)));
      water_polygons.push_back(out.city.vacuums.back().polygon);
      out.city.landuse.push_back({out.city.vacuums.back().polygon, LandUseClass::GreenWater});
    }
  water.push_back(add_vacuum(VacuumKind::Water, -1000.0, -1000.0, -600.0, -600.0));
  for (double y : {0.0, std::round(height / 2.0), height})
    small_parks.push_back(add_vacuum(VacuumKind::SmallPark, width + 200.0, y - 100.0, width + 400.0, y + 100.0));
  large_parks.push_back(add_vacuum(VacuumKind::LargePark, -600.0, height + 300.0, 600.0, height + 1300.0, true));
  large_parks.push_back(add_vacuum(VacuumKind::LargePark, width, height + 300.0, width + 1200.0, height + 1300.0));
  // Railway pieces 960 m apart on the west side; the station at the centre of
  // piece 0 covers that piece entirely and stays more than 600 m from the rest.
  for (int j = -1; j * 960.0 <= height; ++j) {
    const Point c = add_vacuum(VacuumKind::Railway, -300.0, j * 960.0, -280.0, j * 960.0 + 240.0);
    if (j != 0) railways.push_back(c);
  }
  {
    VacuumFeature st;
    st.id = vid++;
    st.kind = VacuumKind::Station;
    st.anchor = Point(-290.0, 120.0);
    out.city.vacuums.push_back(st);
  }
  // Highways run south of the grid so that their closeness varies along y,
  // unlike the railways (west) and small parks (east).
  for (int i = -1; i * 720.0 <= width; ++i)
    highways.push_back(add_vacuum(VacuumKind::Highway, i * 720.0, -280.0, i * 720.0 + 600.0, -250.0));

  // Census per block.
  auto census_rng = stream(spec, kCensus);
  for (auto& p : plans) {
    const double res_rate = uniform(census_rng, 20.0, 400.0);  // per hectare
    const double emp_rate = log_uniform(census_rng, 10.0, 400.0);
    const double bld_rate = uniform(census_rng, 2.0, 20.0);
    const double res_share = uniform(census_rng, 0.3, 1.0);
    std::array<double, 9> age_w;
    std::array<double, 4> floor_w;
    std::array<double, 6> apt_w;
    for (auto& w : age_w) w = std::pow(uniform(census_rng, 0.0, 1.0), 3.0);
    for (auto& w : floor_w) w = std::pow(uniform(census_rng, 0.0, 1.0), 2.0) + 0.01;
    for (auto& w : apt_w) w = std::pow(uniform(census_rng, 0.0, 1.0), 2.0) + 0.01;
    age_w[0] += 0.01;
    std::discrete_distribution<int> age(age_w.begin(), age_w.end()), floors(floor_w.begin(), floor_w.end()),
        apts(apt_w.begin(), apt_w.end());
    std::int64_t employees = 0;
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
      const auto& r = p.blocks[b].r;
      const double hectares = coord(r.i1 - r.i0) * coord(r.j1 - r.j0) / 1e4;
      CensusAggregate c;
      c.residents = poisson(census_rng, res_rate * hectares);
      c.employees = poisson(census_rng, emp_rate * hectares);
      c.used_buildings = 1 + poisson(census_rng, bld_rate * hectares);
      c.residential_buildings = std::binomial_distribution<std::int64_t>(c.used_buildings, res_share)(census_rng);
      for (std::int64_t n = 0; n < c.used_buildings; ++n) {
        ++c.age_bands[static_cast<std::size_t>(age(census_rng))];
        ++c.floor_bands[static_cast<std::size_t>(floors(census_rng))];
      }
      for (std::int64_t n = 0; n < c.residential_buildings; ++n) ++c.apartment_bands[static_cast<std::size_t>(apts(census_rng))];
      employees += c.employees;
      out.census[out.city.blocks[p.block_index[b]].id] = c;
    }
    if (employees == 0) out.census[out.city.blocks[p.block_index.front()].id].employees = 1;
  }

  // Places and companies at block interiors.
  auto place_rng = stream(spec, kPlaces);
  FeatureId pid = 1;
  std::vector<Point> daily;
  std::vector<TruthInput> inputs(plans.size());
  for (auto& p : plans) {
    auto& in = inputs[static_cast<std::size_t>(p.id - 1)];
    in.plan = &p;
    std::uniform_int_distribution<std::size_t> which(0, p.blocks.size() - 1);
    auto interior = [&] {
      const auto& r = p.blocks[which(place_rng)].r;
      return Point(uniform(place_rng, coord(r.i0), coord(r.i1)) * 0.9 + 0.05 * (coord(r.i0) + coord(r.i1)),
                   uniform(place_rng, coord(r.j0), coord(r.j1)) * 0.9 + 0.05 * (coord(r.j0) + coord(r.j1)));
    };
    std::size_t total = 0;
    for (std::size_t g = 0; g < kPlaceGroups.size(); ++g) {
      const auto it = spec.place_intensity.find(kPlaceGroups[g]);
      const double mean = it == spec.place_intensity.end() ? 0.0 : it->second * uniform(place_rng, 0.2, 1.8);
      auto n = static_cast<std::size_t>(poisson(place_rng, mean));
      if (g + 1 == kPlaceGroups.size() && total + n == 0) n = 1;
      for (std::size_t m = 0; m < n; ++m) {
        const Place pl{pid++, interior(), kPlaceGroups[g], classify_place(kPlaceGroups[g])};
        if (pl.flags.daily_use) daily.push_back(pl.location);
        out.city.places.push_back(pl);
      }
      in.group_counts[g] = n;
      total += n;
    }
    const double size = log_uniform(place_rng, 2.0, 50.0);
    const auto companies = 1 + poisson(place_rng, 4.0);
    for (std::int64_t m = 0; m < companies; ++m) {
      const double e = static_cast<double>(1 + poisson(place_rng, size));
      out.city.companies.push_back({pid++, interior(), e});
      in.employees.push_back(e);
    }
  }

  // Streets from block edges on the unit lattice, split at every block corner.
  {
    const auto w = static_cast<std::size_t>(nx + 1);
    std::vector<char> horizontal(w * static_cast<std::size_t>(ny + 1), 0), vertical = horizontal, corner = horizontal;
    auto at = [&](int i, int j) { return static_cast<std::size_t>(j) * w + static_cast<std::size_t>(i); };
    for (const auto& p : plans)
      for (const auto& b : p.blocks) {
        const auto& r = b.r;
        for (int i = r.i0; i < r.i1; ++i) horizontal[at(i, r.j0)] = horizontal[at(i, r.j1)] = 1;
        for (int j = r.j0; j < r.j1; ++j) vertical[at(r.i0, j)] = vertical[at(r.i1, j)] = 1;
        corner[at(r.i0, r.j0)] = corner[at(r.i1, r.j0)] = corner[at(r.i0, r.j1)] = corner[at(r.i1, r.j1)] = 1;
      }
    std::map<std::pair<int, int>, std::size_t> node_of;
    auto node = [&](int i, int j) {
      const auto [it, fresh] = node_of.emplace(std::pair{i, j}, out.city.streets.nodes.size());
      if (fresh) out.city.streets.nodes.push_back(Point(coord(i), coord(j)));
      return it->second;
    };
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx;) {
        if (!horizontal[at(i, j)]) {
          ++i;
          continue;
        }
        const int start = i++;
        while (i < nx && horizontal[at(i, j)] && !corner[at(i, j)]) ++i;
        out.city.streets.segments.push_back({node(start, j), node(i, j)});
      }
    for (int i = 0; i <= nx; ++i)
      for (int j = 0; j < ny;) {
        if (!vertical[at(i, j)]) {
          ++j;
          continue;
        }
        const int start = j++;
        while (j < ny && vertical[at(i, j)] && !corner[at(i, j)]) ++j;
        out.city.streets.segments.push_back({node(i, start), node(i, j)});
      }
    // Degree from the lattice; nodes on the top or right city edge belong to no district.
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!corner[at(i, j)]) continue;
        const int degree = (i > 0 && horizontal[at(i - 1, j)]) + horizontal[at(i, j)] +
                           (j > 0 && vertical[at(i, j - 1)]) + vertical[at(i, j)];
        if (degree >= 3) ++inputs[static_cast<std::size_t>((j / (k * kUnits)) * spec.districts_x() + i / (k * kUnits))].intersections;
      }
  }

  // District outlines and the assembled city.
  for (const auto& p : plans)
    out.shapes.push_back({p.id, "synth",
                          rectangle(coord(p.ax * k * kUnits), coord(p.ay * k * kUnits), coord((p.ax + 1) * k * kUnits),
                                    coord((p.ay + 1) * k * kUnits))});
  out.city.districts = assemble_districts(out.city.blocks, out.census, out.city.vacuums, out.shapes);
  out.boundary = rectangle(0.0, 0.0, width, height);

  // Ground truth.
  MetricOptions mo;
  for (auto& in : inputs) {
    const auto& p = *in.plan;
    in.gross = static_cast<double>(k * k) * cell_area;
    in.net = in.gross - static_cast<double>(p.water.size()) * cell_area;
    for (auto idx : p.block_index) in.census += out.census.at(out.city.blocks[idx].id);

    SynthTruth t;
    t.district = p.id;
    t.fx = p.fx;
    t.fy = p.fy;
    t.net_area = in.net;
    auto& fv = t.metrics;
    fv.district = p.id;

    std::array<double, 3> lu{0.0, 0.0, static_cast<double>(p.water.size()) * cell_area};
    std::vector<Point> centres;
    double area_sum = 0.0, phi_sum = 0.0;
    for (const auto& b : p.blocks) {
      const double w = coord(b.r.i1) - coord(b.r.i0), h = coord(b.r.j1) - coord(b.r.j0);
      lu[static_cast<std::size_t>(b.klass)] += w * h;
      area_sum += w * h;
      phi_sum += 4.0 * w * h / (M_PI * (w * w + h * h));
      centres.push_back(Point((coord(b.r.i0) + coord(b.r.i1)) / 2.0, (coord(b.r.j0) + coord(b.r.j1)) / 2.0));
    }
    const double classified = lu[0] + lu[1] + lu[2];
    double entropy = 0.0;
    for (double a : lu)
      if (a > 0.0) entropy -= a / classified * std::log(a / classified);
    fv[Metric::Lum] = MetricValue::of(entropy / std::log(3.0));
    fv[Metric::Rnr] = MetricValue::of(1.0 - std::abs(lu[0] - lu[1]) / (lu[0] + lu[1]));

    const auto& c = in.census;
    double floors = 0.0, buildings = 0.0;
    for (std::size_t b = 0; b < 4; ++b) {
      floors += static_cast<double>(c.floor_bands[b]) * static_cast<double>(b + 1);
      buildings += static_cast<double>(c.floor_bands[b]);
    }
    fv[Metric::HousingTypes] = MetricValue::of(floors / buildings);

    fv[Metric::ClosenessSmallParks] = MetricValue::of(closeness(centres, small_parks));
    fv[Metric::Daily] = MetricValue::of(closeness(centres, daily));
    fv[Metric::ClosenessLargeParks] = MetricValue::of(closeness(centres, large_parks));
    fv[Metric::ClosenessRailways] = MetricValue::of(closeness(centres, railways));
    fv[Metric::ClosenessHighways] = MetricValue::of(closeness(centres, highways));
    fv[Metric::ClosenessWater] = MetricValue::of(closeness(centres, water));

    // Group order: NightLife, Art-night, Services, Eating-drinking, Org. activity, Outside, Commercial.
    const auto& n = in.group_counts;
    const double places = static_cast<double>(std::accumulate(n.begin(), n.end(), std::size_t{0}));
    const double night = static_cast<double>(n[0] + n[1]);
    const double daily_n = static_cast<double>(n[2] + n[3] + n[4] + n[5]);
    const double third = static_cast<double>(n[3] + n[4] + n[5] + n[6]);
    fv[Metric::Commercial] = MetricValue::of((places - daily_n) / places);
    fv[Metric::Nightlife] = MetricValue::of(night / places);
    fv[Metric::ThirdPlaces] = MetricValue::of(third / places);
    fv[Metric::NightlifeDensity] = MetricValue::of(night / in.net);
    fv[Metric::DensityDailyPlaces] = MetricValue::of(daily_n / in.net);
    fv[Metric::DensityNondailyPlaces] = MetricValue::of((places - daily_n) / in.net);

    const double nb = static_cast<double>(p.blocks.size());
    fv[Metric::MeanBlockArea] = MetricValue::of(area_sum / nb);
    fv[Metric::IntersectionDensity] = MetricValue::of(static_cast<double>(in.intersections) / in.net);
    fv[Metric::Anisotropicity] = MetricValue::of(phi_sum / nb);

    double total = 0.0, weighted = 0.0, squares = 0.0;
    for (std::size_t b = 0; b < 9; ++b) {
      const double cnt = static_cast<double>(c.age_bands[b]);
      const auto& band = mo.age_bands[b];
      total += cnt;
      weighted += cnt * ((mo.reference_year - band.start) + (mo.reference_year - band.end)) / 2.0;
      squares += cnt * cnt;
    }
    double var = 0.0;
    for (auto cnt : c.age_bands) var += std::pow(static_cast<double>(cnt) - total / 9.0, 2.0);
    var /= 9.0;
    fv[Metric::AvgBuildingAge] = MetricValue::of(weighted / total);
    fv[Metric::StdBuildingAge] = MetricValue::of(squares / (total * total) * var);

    fv[Metric::EmployeesPerCompany] =
        MetricValue::of(std::accumulate(in.employees.begin(), in.employees.end(), 0.0) / static_cast<double>(in.employees.size()));
    const double pd = static_cast<double>(c.residents) / in.net, ed = static_cast<double>(c.employees) / in.net;
    fv[Metric::PopulationDensity] = MetricValue::of(pd);
    fv[Metric::EmploymentDensity] = MetricValue::of(ed);
    fv[Metric::PopEmpRatio] = MetricValue::of(pd / ed);
    double apartments = 0.0;
    for (std::size_t b = 0; b < 6; ++b) apartments += static_cast<double>(c.apartment_bands[b]) * mo.apartment_midpoints[b];
    fv[Metric::ApartmentsPerBuilding] = MetricValue::of(apartments / static_cast<double>(c.used_buildings));
    out.truth.push_back(std::move(t));
  }

  // Planted activity density.
  {
    const auto n = static_cast<Eigen::Index>(out.truth.size());
    VectorXd signal = VectorXd::Constant(n, spec.intercept);
    for (const auto& [name, b] : spec.beta) {
      const Metric m = *parse_metric(name);
      VectorXd raw(n), transformed;
      for (Eigen::Index i = 0; i < n; ++i) raw(i) = *out.truth[static_cast<std::size_t>(i)].metrics[m].value;
      const ColumnTransform tr = fit_column_transform(name, raw, TransformKind::BoxCox, true, transformed);
      signal += b * ((transformed.array() - tr.mean) / tr.sd).matrix();
    }
    auto noise = stream(spec, kNoise);
    std::normal_distribution<double> g;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& t = out.truth[static_cast<std::size_t>(i)];
      t.ln_signal = signal(i);
      t.activity_density = std::exp(signal(i) + spec.noise_sd * g(noise));
    }
  }

  if (!spec.activity) return out;

  // Radio stations and the hourly trace.
  auto station_rng = stream(spec, kStations);
  const auto stations = static_cast<std::size_t>(std::ceil(spec.station_factor * static_cast<double>(plans.size())));
  for (std::size_t s = 0; s < stations; ++s)
    out.stations.push_back({static_cast<FeatureId>(s + 1),
                            Point(uniform(station_rng, 0.0, width), uniform(station_rng, 0.0, height))});
  const auto cells = build_cell_coverage(out.stations, out.boundary, water_polygons);

  // Station totals R_v such that Σ_v R_v·w_iv reproduces each district's
  // target S_i: start from the uniform-density split, then refine
  // multiplicatively (Richardson-Lucy) until the aggregation inverts it.
  std::vector<std::vector<CellWeight>> weights;
  VectorXd target(static_cast<Eigen::Index>(plans.size()));
  for (std::size_t d = 0; d < plans.size(); ++d) {
    weights.push_back(district_weights(out.city.districts[d], cells));
    target(static_cast<Eigen::Index>(d)) = out.truth[d].activity_density * out.truth[d].net_area;
  }
  VectorXd r = VectorXd::Zero(static_cast<Eigen::Index>(cells.size())), column = r;
  for (std::size_t d = 0; d < plans.size(); ++d)
    for (const auto& w : weights[d]) {
      r(static_cast<Eigen::Index>(w.cell)) += w.weight * cells[w.cell].effective_area() * out.truth[d].activity_density;
      column(static_cast<Eigen::Index>(w.cell)) += w.weight;
    }
  auto forward = [&](const VectorXd& x) {
    VectorXd s = VectorXd::Zero(target.size());
    for (std::size_t d = 0; d < plans.size(); ++d)
      for (const auto& w : weights[d]) s(static_cast<Eigen::Index>(d)) += w.weight * x(static_cast<Eigen::Index>(w.cell));
    return s;
  };
  for (int it = 0; it < 5000; ++it) {
    const VectorXd ratio = target.cwiseQuotient(forward(r));
    if ((ratio.array() - 1.0).abs().maxCoeff() < 1e-13) break;
    VectorXd update = VectorXd::Zero(r.size());
    for (std::size_t d = 0; d < plans.size(); ++d)
      for (const auto& w : weights[d]) update(static_cast<Eigen::Index>(w.cell)) += w.weight * ratio(static_cast<Eigen::Index>(d));
    for (Eigen::Index v = 0; v < r.size(); ++v)
      if (column(v) > 0.0) r(v) *= update(v) / column(v);
  }

  // Diurnal profile with mean exactly 1 over a day; weekends at half level.
  const auto start = parse_iso_date(spec.start_date);
  for (int day = 0; day < spec.days; ++day) {
    const std::chrono::sys_days date = start + std::chrono::days(day);
    const std::chrono::weekday wd(date);
    const double level = (wd == std::chrono::Saturday || wd == std::chrono::Sunday) ? 0.5 : 1.0;
    for (int h = 0; h < 24; ++h) {
      const HourStamp stamp = static_cast<HourStamp>(date.time_since_epoch().count()) * 24 + h;
      const double profile = level * (1.0 + 0.6 * std::cos(2.0 * M_PI * (h - 14) / 24.0));
      for (std::size_t v = 0; v < cells.size(); ++v)
        out.records.push_back({cells[v].station_id, stamp, r(static_cast<Eigen::Index>(v)) * profile});
    }
  }
  return out;
}

void write_synth_city(const fs::path& dir, const SynthCity& c) {
  fs::create_directories(dir);
  write_blocks(dir / "blocks.geojson", c.city.blocks);
  write_districts(dir / "districts.geojson", c.shapes);
  write_census_table(dir / "census.csv", c.census);
  write_landuse(dir / "landuse.geojson", c.city.landuse);
  write_vacuums(dir / "vacuums.geojson", c.city.vacuums);
  write_places(dir / "places.geojson", c.city.places, c.city.companies);
  write_streets(dir / "streets.geojson", c.city.streets);
  write_boundary(dir / "boundary.geojson", c.boundary);

  PipelineConfig cfg;
  cfg.inputs.blocks = "blocks.geojson";
  cfg.inputs.districts = "districts.geojson";
  cfg.inputs.census = "census.csv";
  cfg.inputs.landuse = "landuse.geojson";
  cfg.inputs.vacuums = "vacuums.geojson";
  cfg.inputs.places = "places.geojson";
  cfg.inputs.streets = "streets.geojson";
  cfg.inputs.boundary = "boundary.geojson";
  if (c.spec.activity) {
    write_stations(dir / "stations.geojson", c.stations);
    write_activity_records(dir / "activity.csv", c.records);
    cfg.inputs.stations = "stations.geojson";
    cfg.inputs.activity = "activity.csv";
  }
  cfg.output_dir = "out";
  cfg.model.seed = c.spec.seed;
  write_config(dir / "config.toml", cfg);

  CsvTable truth;
  truth.header = {"district_id", "fx", "fy", "net_area"};
  for (Metric m : all_metrics()) truth.header.emplace_back(metric_name(m));
  truth.header.insert(truth.header.end(), {"ln_signal", "activity_density"});
  for (const auto& t : c.truth) {
    std::vector<std::string> row{std::to_string(t.district), std::to_string(t.fx), std::to_string(t.fy),
                                 format_number(t.net_area)};
    for (const auto& v : t.metrics.metrics) row.push_back(v.value ? format_number(*v.value) : "");
    row.push_back(format_number(t.ln_signal));
    row.push_back(format_number(t.activity_density));
    truth.rows.push_back(std::move(row));
  }
  write_csv(dir / "ground_truth.csv", truth);

  CsvTable beta;
  beta.header = {"metric", "beta"};
  beta.rows.push_back({"(intercept)", format_number(c.spec.intercept)});
  for (const auto& [name, b] : c.spec.beta) beta.rows.push_back({name, format_number(b)});
  beta.rows.push_back({"(noise_sd)", format_number(c.spec.noise_sd)});
  write_csv(dir / "planted_beta.csv", beta);
}

SynthJob load_synth_spec(const fs::path& path) {
  toml::table doc;
  try {
    doc = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw ValidationError(path.string(), std::nullopt,
                          std::string(e.description()) + " at line " + std::to_string(e.source().begin.line));
  }
  SynthJob job;
  const auto* t = doc["synth"].as_table();
  if (!t) throw ValidationError(path.string(), std::nullopt, "missing [synth] table");
  auto& s = job.spec;
  auto get_int = [&](const char* key, int& dst) {
    if (auto v = (*t)[key].value<std::int64_t>()) dst = static_cast<int>(*v);
  };
  auto get_double = [&](const char* key, double& dst) {
    if (auto v = (*t)[key].value<double>()) dst = *v;
  };
  if (auto v = (*t)["seed"].value<std::int64_t>()) s.seed = static_cast<std::uint64_t>(*v);
  get_int("grid_x", s.grid_x);
  get_int("grid_y", s.grid_y);
  get_double("block_size", s.block_size);
  get_int("district_tile", s.district_tile);
  get_int("water_cells", s.water_cells);
  get_double("station_factor", s.station_factor);
  get_double("intercept", s.intercept);
  get_double("noise_sd", s.noise_sd);
  get_int("days", s.days);
  if (auto v = (*t)["activity"].value<bool>()) s.activity = *v;
  if (auto v = (*t)["start_date"].value<std::string>()) s.start_date = *v;
  if (auto v = (*t)["preset"].value<std::string>()) {
    if (*v != "jacobs") throw ValidationError(path.string(), std::nullopt, "unknown preset '" + *v + "'");
    s.beta = jacobs_beta();
  }
  if (const auto* b = (*t)["beta"].as_table())
    for (const auto& [key, node] : *b) {
      const auto v = node.value<double>();
      if (!v) throw ValidationError(path.string(), std::nullopt, "beta." + std::string(key.str()) + " must be a number");
      s.beta[std::string(key.str())] = *v;
    }
  if (const auto* pi = (*t)["place_intensity"].as_table())
    for (const auto& [key, node] : *pi) {
      const auto v = node.value<double>();
      if (!v) throw ValidationError(path.string(), std::nullopt, "place_intensity values must be numbers");
      try {
        s.place_intensity[parse_place_group(key.str())] = *v;
      } catch (const ClassificationError& e) {
        throw ValidationError(path.string(), std::nullopt, e.what());
      }
    }
  const std::string out = (*t)["output"].value_or(std::string("synth_city"));
  job.output = fs::path(out).is_absolute() ? fs::path(out) : path.parent_path() / out;
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ValidationError(path.string(), std::nullopt, e.what());
  }
  return job;
}

}  // namespace vitality
