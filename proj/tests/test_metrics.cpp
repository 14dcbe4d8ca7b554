#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vitality/metrics.hpp"

using namespace vitality;

namespace {

Block make_block(BlockId id, DistrictId d, Polygon p) {
  Block b;
  b.id = id;
  b.district_id = d;
  b.polygon = std::move(p);
  b.centroid = centroid(b.polygon);
  return b;
}

Place make_place(FeatureId id, Point at, PlaceGroup g) { return {id, at, g, classify_place(g)}; }

FeatureSet points(std::vector<Point> pts) {
  std::vector<FeatureId> ids(pts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<FeatureId>(i);
  return FeatureSet(std::move(ids), std::move(pts));
}

/// A small two-district city with every layer populated.
CityData small_city(std::mt19937_64& rng) {
  CityData city;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::map<BlockId, CensusAggregate> census;
  BlockId id = 1;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) {
      const double x = i * 100.0, y = j * 100.0;
      city.blocks.push_back(make_block(id, i < 2 ? 1 : 2, rectangle(x, y, x + 100.0, y + 100.0)));
      CensusAggregate c;
      c.residents = static_cast<std::int64_t>(rng() % 500);
      c.employees = static_cast<std::int64_t>(rng() % 300);
      c.used_buildings = 1 + static_cast<std::int64_t>(rng() % 30);
      for (auto& v : c.age_bands) v = static_cast<std::int64_t>(rng() % 10);
      for (auto& v : c.floor_bands) v = static_cast<std::int64_t>(rng() % 10);
      for (auto& v : c.apartment_bands) v = static_cast<std::int64_t>(rng() % 10);
      census[id++] = c;
    }
  const LandUseClass classes[] = {LandUseClass::Residential, LandUseClass::Work, LandUseClass::GreenWater};
  for (const auto& b : city.blocks) city.landuse.push_back({b.polygon, classes[rng() % 3]});
  for (int k = 0; k < 30; ++k)
    city.places.push_back(make_place(100 + k, Point(400 * u(rng), 200 * u(rng)), kPlaceGroups[rng() % 7]));
  for (int k = 0; k < 10; ++k) city.companies.push_back({200 + k, Point(400 * u(rng), 200 * u(rng)), 1.0 + rng() % 40});
  VacuumFeature park{1, VacuumKind::SmallPark, rectangle(-60, 20, -40, 40), Point::Zero(), false};
  VacuumFeature lake{2, VacuumKind::Water, rectangle(300, 150, 400, 200), Point::Zero(), false};
  VacuumFeature hw{3, VacuumKind::Highway, rectangle(0, 250, 400, 260), Point::Zero(), false};
  city.vacuums = {park, lake, hw};
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 2; ++j) city.streets.nodes.emplace_back(i * 100.0, j * 100.0);
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 2; ++j) {
      const auto n = static_cast<std::size_t>(i * 3 + j);
      if (i < 4) city.streets.segments.emplace_back(n, n + 3);
      if (j < 2) city.streets.segments.emplace_back(n, n + 1);
    }
  city.districts = assemble_districts(city.blocks, census, city.vacuums);
  return city;
}

}  // namespace

TEST_CASE("land use mix") {
  CHECK(*land_use_mix({5.0, 0.0, 0.0}).value == 0.0);
  CHECK(*land_use_mix({2.0, 2.0, 2.0}).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(*land_use_mix({1.0, 1.0, 0.0}).value == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(1e-15));
  CHECK(land_use_mix({0.0, 0.0, 0.0}).flag == "NoClassifiedLand");

  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    LandUseAreas a{u(rng), u(rng), u(rng)};
    const double base = *land_use_mix(a).value;
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    CHECK(*land_use_mix({a[2], a[0], a[1]}).value == doctest::Approx(base).epsilon(1e-14));
    // Moving area from the dominant class to the smallest raises the entropy.
    const auto hi = std::max_element(a.begin(), a.end()) - a.begin();
    const auto lo = std::min_element(a.begin(), a.end()) - a.begin();
    if (a[hi] - a[lo] > 1e-3) {
      LandUseAreas b = a;
      const double delta = (a[hi] - a[lo]) / 4.0;
      b[hi] -= delta;
      b[lo] += delta;
      CHECK(*land_use_mix(b).value > base);
    }
  }

  // Areas are measured inside the district only.
  District d;
  d.region = {rectangle(0, 0, 10, 10)};
  const std::vector<LandUsePatch> patches{{rectangle(-5, 0, 5, 10), LandUseClass::Residential},
                                          {rectangle(5, 0, 10, 10), LandUseClass::Work},
                                          {rectangle(20, 0, 30, 10), LandUseClass::GreenWater}};
  const auto areas = land_use_areas(d, patches);
  CHECK(areas == LandUseAreas{50.0, 50.0, 0.0});
}

TEST_CASE("rnr balance") {
  CHECK(*rnr_balance({2.0, 2.0, 7.0}).value == 1.0);
  CHECK(*rnr_balance({2.0, 0.0, 7.0}).value == 0.0);
  CHECK(*rnr_balance({3.0, 1.0, 0.0}).value == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(!rnr_balance({0.0, 0.0, 4.0}).value);
}

TEST_CASE("housing types") {
  CensusAggregate c;
  c.floor_bands = {9, 0, 0, 0};
  CHECK(*housing_types(c).value == 1.0);
  c.floor_bands = {5, 5, 5, 5};
  CHECK(*housing_types(c).value == 2.5);
  c.floor_bands = {10, 20, 30, 40};
  CHECK(*housing_types(c).value == doctest::Approx((10 + 40 + 90 + 160) / 100.0).epsilon(1e-15));
  CHECK(*housing_types(c).value == doctest::Approx(3.0).epsilon(1e-15));
  c.floor_bands = {0, 0, 0, 0};
  CHECK(housing_types(c).flag == "NoFloorData");
}

TEST_CASE("mean block closeness") {
  const std::vector<Point> one{Point(0, 0)};
  CHECK(*mean_block_closeness(one, points({Point(100, 0)})).value == doctest::Approx(0.01).epsilon(1e-15));
  const std::vector<Point> two{Point(0, 0), Point(0, 400)};
  CHECK(*mean_block_closeness(two, points({Point(0, 100)})).value == doctest::Approx(0.005).epsilon(1e-15));

  const auto empty = mean_block_closeness(one, FeatureSet{});
  CHECK(*empty.value == 0.0);
  CHECK(empty.flag == "EmptyFeatureSet");
  CHECK(mean_block_closeness(one, points({Point(0, 0)})).flag == "ZeroDistance");

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Point> blocks(50), parks(20);
    for (auto& p : blocks) p = Point(u(rng), u(rng));
    for (auto& p : parks) p = Point(u(rng), u(rng));
    double sum = 0.0;
    for (const auto& b : blocks) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : parks) best = std::min(best, std::hypot(b.x() - p.x(), b.y() - p.y()));
      sum += best;
    }
    CHECK(*mean_block_closeness(blocks, points(parks)).value == doctest::Approx(50.0 / sum).epsilon(1e-12));
  }
}

TEST_CASE("place shares and densities") {
  std::vector<Place> night;
  for (int i = 0; i < 5; ++i) night.push_back(make_place(i, Point(0, 0), PlaceGroup::NightLife));
  const auto s = place_shares(night);
  CHECK(*s.nightlife.value == 1.0);
  CHECK(*s.commercial.value == 1.0);
  CHECK(*s.third_places.value == 0.0);
  const auto d = place_densities(night, 1e6);
  CHECK(*d.nightlife_density.value == doctest::Approx(5e-6).epsilon(1e-15));

  const auto none = place_shares({});
  CHECK(!none.commercial.value);
  CHECK(none.third_places.flag == "NoPlaces");
  const auto zero = place_densities({}, 1e6);
  CHECK(*zero.nightlife_density.value == 0.0);
  CHECK(*zero.density_daily.value == 0.0);
  CHECK(*zero.density_nondaily.value == 0.0);

  std::mt19937_64 rng(42);
  std::vector<Place> mixed;
  for (int i = 0; i < 20; ++i) mixed.push_back(make_place(i, Point(0, 0), kPlaceGroups[rng() % 7]));
  int nondaily = 0, nightlife = 0, third = 0, daily = 0;
  for (const auto& p : mixed) {
    const auto g = p.group;
    const bool is_daily = g == PlaceGroup::EatingDrinking || g == PlaceGroup::Services ||
                          g == PlaceGroup::Outside || g == PlaceGroup::OrgActivity;
    daily += is_daily;
    nondaily += !is_daily;
    nightlife += g == PlaceGroup::NightLife || g == PlaceGroup::ArtNight;
    third += g == PlaceGroup::EatingDrinking || g == PlaceGroup::OrgActivity || g == PlaceGroup::Outside ||
             g == PlaceGroup::Commercial;
  }
  const auto ms = place_shares(mixed);
  CHECK(*ms.commercial.value == nondaily / 20.0);
  CHECK(*ms.nightlife.value == nightlife / 20.0);
  CHECK(*ms.third_places.value == third / 20.0);
  const auto md = place_densities(mixed, 2500.0);
  CHECK(*md.density_daily.value == daily / 2500.0);
  CHECK(*md.density_nondaily.value == nondaily / 2500.0);
}

TEST_CASE("block shape") {
  CHECK(block_anisotropicity(rectangle(3, 4, 13, 14)) == doctest::Approx(2.0 / M_PI).epsilon(1e-12));
  CHECK(std::abs(block_anisotropicity(regular_polygon(Point(5, 5), 10.0, 64)) - 1.0) < 0.01);

  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const double phi = block_anisotropicity(make_polygon(oracle::random_star(rng, 9, Point(0, 0), 1.0, 5.0)));
    CHECK(phi > 0.0);
    CHECK(phi <= 1.0);
  }

  // 10×10 grid of 50 m blocks: 11×11 street lattice, all but the 4 corners
  // have degree ≥ 3.
  std::vector<Polygon> blocks;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) blocks.push_back(rectangle(i * 50.0, j * 50.0, i * 50.0 + 50.0, j * 50.0 + 50.0));
  const auto s = block_shape_metrics(blocks, 121 - 4, 250000.0);
  CHECK(*s.mean_block_area.value == doctest::Approx(2500.0).epsilon(1e-14));
  CHECK(*s.intersection_density.value == doctest::Approx(117.0 / 250000.0).epsilon(1e-15));
  CHECK(*s.anisotropicity.value == doctest::Approx(2.0 / M_PI).epsilon(1e-12));
}

TEST_CASE("building age") {
  CHECK(band_age({2001, 2011}, 2011) == 5.0);
  CensusAggregate c;
  MetricOptions opts;
  opts.age_bands[8] = {2001, 2011};
  c.age_bands[8] = 12;
  CHECK(*building_age_stats(c, opts).avg.value == 5.0);

  c = {};
  c.age_bands[1] = 4;
  c.age_bands[3] = 4;
  const MetricOptions def;
  const double expected = (band_age(def.age_bands[1], 2011) + band_age(def.age_bands[3], 2011)) / 2.0;
  CHECK(*building_age_stats(c).avg.value == doctest::Approx(expected).epsilon(1e-15));

  // Counts (3,0,...,0,7) over the default bands, evaluated by hand:
  // old = 102 for [1900,1918], 2.5 for [2006,2011]; avg = (3·102 + 7·2.5)/10.
  // Σc² / (Σc)² = 58/100; σ² of the nine counts = 58/9 − (10/9)² = 422/81.
  c = {};
  c.age_bands[0] = 3;
  c.age_bands[8] = 7;
  const auto s = building_age_stats(c);
  CHECK(*s.avg.value == doctest::Approx(32.35).epsilon(1e-15));
  CHECK(*s.std.value == doctest::Approx(0.58 * 422.0 / 81.0).epsilon(1e-14));

  MetricOptions wsd;
  wsd.age_dispersion = AgeDispersion::WeightedSd;
  const double var = (3 * (102 - 32.35) * (102 - 32.35) + 7 * (2.5 - 32.35) * (2.5 - 32.35)) / 10.0;
  CHECK(*building_age_stats(c, wsd).std.value == doctest::Approx(std::sqrt(var)).epsilon(1e-14));

  CHECK(building_age_stats(CensusAggregate{}).avg.flag == "NoAgeData");
}

TEST_CASE("concentration and companies") {
  CensusAggregate c;
  c.residents = 10000;
  c.employees = 10000;
  const auto k = concentration_metrics(c, 1e6);
  CHECK(*k.population_density.value == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(*k.pop_emp_ratio.value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k.apartments_per_building.flag == "NoBuildings");

  c.employees = 0;
  c.used_buildings = 4;
  c.apartment_bands = {1, 1, 2, 0, 0, 1};
  const auto k2 = concentration_metrics(c, 2e6);
  CHECK(k2.pop_emp_ratio.flag == "NoEmployees");
  CHECK(*k2.employment_density.value == 0.0);
  CHECK(*k2.apartments_per_building.value == doctest::Approx((1 + 2 + 7 + 20) / 4.0).epsilon(1e-15));

  CHECK(*employees_per_company(std::vector<Company>{{1, Point(0, 0), 7}}).value == 7.0);
  CHECK(*employees_per_company(std::vector<Company>{{1, {}, 2}, {2, {}, 4}, {3, {}, 6}}).value == 4.0);
  CHECK(employees_per_company({}).flag == "NoCompanies");

  std::mt19937_64 rng(44);
  std::vector<Company> many;
  double sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    many.push_back({i, Point(0, 0), static_cast<double>(rng() % 250)});
    sum += many.back().employees;
  }
  CHECK(*employees_per_company(many).value == doctest::Approx(sum / 100.0).epsilon(1e-15));
}

TEST_CASE("feature vector assembly") {
  std::mt19937_64 rng(45);
  const CityData city = small_city(rng);
  const auto fv = compute_features(city);
  REQUIRE(fv.size() == 2);

  // District 1 covers x in [0, 200): its blocks sit at x = 50 and 150.
  const auto& d1 = fv[0];
  CHECK(d1.district == 1);
  std::vector<Point> c1{Point(50, 50), Point(50, 150), Point(150, 50), Point(150, 150)};
  const Point park(-50, 30);
  double dsum = 0.0;
  for (const auto& c : c1) dsum += std::hypot(c.x() - park.x(), c.y() - park.y());
  CHECK(*d1[Metric::ClosenessSmallParks].value == doctest::Approx(4.0 / dsum).epsilon(1e-14));
  CHECK(*d1[Metric::ClosenessLargeParks].value == 0.0);
  CHECK(d1[Metric::ClosenessRailways].flag == "EmptyFeatureSet");
  // Lattice nodes in [0,200)×[0,200): x ∈ {0,100}, y ∈ {0,100}; the corner
  // (0,0) has degree 2, the rest at least 3.
  CHECK(*d1[Metric::IntersectionDensity].value == doctest::Approx(3.0 / 40000.0).epsilon(1e-15));
  CHECK(*d1[Metric::Anisotropicity].value == doctest::Approx(2.0 / M_PI).epsilon(1e-12));

  // The lake takes 100×50 of district 2.
  CHECK(city.districts[1].net_area == doctest::Approx(40000.0 - 5000.0).epsilon(1e-14));
  std::size_t d2_places = 0, d2_night = 0;
  for (const auto& p : city.places)
    if (p.location.x() >= 200) {
      ++d2_places;
      d2_night += p.flags.nightlife;
    }
  if (d2_places > 0)
    CHECK(*fv[1][Metric::Nightlife].value == doctest::Approx(double(d2_night) / double(d2_places)).epsilon(1e-15));
  CHECK(*fv[1][Metric::NightlifeDensity].value ==
        doctest::Approx(double(d2_night) / city.districts[1].net_area).epsilon(1e-15));

  SUBCASE("order invariance") {
    CityData shuffled = city;
    std::shuffle(shuffled.places.begin(), shuffled.places.end(), rng);
    std::shuffle(shuffled.companies.begin(), shuffled.companies.end(), rng);
    std::shuffle(shuffled.landuse.begin(), shuffled.landuse.end(), rng);
    std::shuffle(shuffled.blocks.begin(), shuffled.blocks.end(), rng);
    std::shuffle(shuffled.vacuums.begin(), shuffled.vacuums.end(), rng);
    std::shuffle(shuffled.streets.segments.begin(), shuffled.streets.segments.end(), rng);
    CHECK(compute_features(shuffled) == fv);
    CHECK(compute_features(city, {}, {}, 4) == fv);
  }

  SUBCASE("scaling") {
    const double k = 3.0;
    CityData big = city;
    auto scale_poly = [&](Polygon& p) {
      for (auto& q : p.exterior) q *= k;
      for (auto& h : p.holes)
        for (auto& q : h) q *= k;
    };
    for (auto& b : big.blocks) {
      scale_poly(b.polygon);
      b.centroid *= k;
    }
    for (auto& l : big.landuse) scale_poly(l.polygon);
    for (auto& v : big.vacuums) scale_poly(v.polygon);
    for (auto& p : big.places) p.location *= k;
    for (auto& c : big.companies) c.location *= k;
    for (auto& n : big.streets.nodes) n *= k;
    // Re-derive districts from the scaled blocks, then restore their census.
    std::map<BlockId, CensusAggregate> census;
    for (const auto& d : city.districts)
      for (BlockId id : d.blocks) census[id] = {};
    big.districts = assemble_districts(big.blocks, census, big.vacuums);
    for (std::size_t i = 0; i < big.districts.size(); ++i) big.districts[i].census = city.districts[i].census;
    const auto fb = compute_features(big);
    for (std::size_t i = 0; i < fv.size(); ++i)
      for (Metric m : all_metrics()) {
        const auto& a = fv[i][m];
        const auto& b = fb[i][m];
        REQUIRE(a.value.has_value() == b.value.has_value());
        if (!a.value) continue;
        double factor = 1.0;
        const auto name = metric_name(m);
        if (m == Metric::MeanBlockArea) factor = k * k;
        else if (name.find("density") != std::string_view::npos) factor = 1.0 / (k * k);
        else if (name.starts_with("closeness") || m == Metric::Daily) factor = 1.0 / k;
        CHECK(*b.value == doctest::Approx(*a.value * factor).epsilon(1e-12));
      }
  }
}

TEST_CASE("features csv round trip") {
  testutil::TempDir dir;
  std::mt19937_64 rng(46);
  const CityData city = small_city(rng);
  const auto fv = compute_features(city);
  write_features(dir / "f.csv", dir / "flags.csv", fv);
  const auto back = read_features(dir / "f.csv");
  REQUIRE(back.size() == fv.size());
  for (std::size_t i = 0; i < fv.size(); ++i)
    for (Metric m : all_metrics()) CHECK(back[i][m].value == fv[i][m].value);
  const std::string flags = testutil::read_text(dir / "flags.csv");
  CHECK(flags.find("EmptyFeatureSet") != std::string::npos);
}
