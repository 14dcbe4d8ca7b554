#include <doctest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "vitality/activity.hpp"

using namespace vitality;
namespace chr = std::chrono;

namespace {

District rect_district(DistrictId id, double x0, double y0, double x1, double y1) {
  District d;
  d.id = id;
  d.region = {rectangle(x0, y0, x1, y1)};
  d.gross_area = d.net_area = (x1 - x0) * (y1 - y0);
  return d;
}

HourStamp hour_of(int y, unsigned m, unsigned d, int h) {
  const chr::sys_days day{chr::year(y) / chr::month(m) / chr::day(d)};
  return static_cast<HourStamp>(day.time_since_epoch().count()) * 24 + h;
}

}  // namespace

TEST_CASE("iso hours") {
  const HourStamp h = parse_iso_hour("2015-03-02T07");
  CHECK(h == hour_of(2015, 3, 2, 7));
  CHECK(parse_iso_hour("2015-03-02T07:00") == h);
  CHECK(parse_iso_hour("2015-03-02T07:00:00Z") == h);
  CHECK(format_iso_hour(h) == "2015-03-02T07:00:00");
  CHECK(parse_iso_hour(format_iso_hour(h)) == h);
  CHECK_THROWS_AS(parse_iso_hour("2015-03-02T07:30"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_hour("2015-02-30T07"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_hour("2015-03-02T24"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_hour("yesterday"), std::invalid_argument);

  Calendar cal;
  CHECK(cal.is_business_hour(parse_iso_hour("2015-03-02T00")));   // Monday
  CHECK(!cal.is_business_hour(parse_iso_hour("2015-03-01T12")));  // Sunday
  cal.holidays.insert(parse_iso_date("2015-03-02"));
  CHECK(!cal.is_business_hour(parse_iso_hour("2015-03-02T00")));
}

TEST_CASE("build_cell_coverage") {
  const Polygon boundary = rectangle(0, 0, 1000, 1000);
  auto single = build_cell_coverage({{5, Point(300, 300)}}, boundary, {});
  REQUIRE(single.size() == 1);
  CHECK(single[0].total_area == doctest::Approx(1e6).epsilon(1e-12));
  CHECK(single[0].water_area == 0.0);
  CHECK(single[0].usable());

  const Polygon lake = rectangle(0, 0, 500, 1000);
  auto half = build_cell_coverage({{5, Point(600, 300)}}, boundary, std::span(&lake, 1));
  CHECK(half[0].effective_area() == doctest::Approx(5e5).epsilon(1e-12));

  const Polygon sea = rectangle(-10, -10, 1010, 1010);
  auto drowned = build_cell_coverage({{5, Point(600, 300)}}, boundary, std::span(&sea, 1));
  CHECK(!drowned[0].usable());

  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(1.0, 999.0);
  std::vector<RadioStation> stations;
  for (int i = 0; i < 30; ++i) stations.push_back({100 - i, Point(u(rng), u(rng))});
  auto cells = build_cell_coverage(stations, boundary, {});
  double total = 0.0;
  for (const auto& c : cells) total += c.total_area;
  CHECK(std::abs(total - 1e6) <= 1e-6 * 1e6);
  CHECK(std::is_sorted(cells.begin(), cells.end(),
                       [](const auto& a, const auto& b) { return a.station_id < b.station_id; }));

  CHECK_THROWS_WITH_AS(build_cell_coverage({{1, Point(0, 0)}, {2, Point(2000, 0)}}, boundary, {}),
                       doctest::Contains("station 2"), ValidationError);
  CHECK_THROWS_AS(build_cell_coverage({{1, Point(5, 5)}, {2, Point(5, 5)}}, boundary, {}), ValidationError);
}

TEST_CASE("district_activity weighting") {
  const Polygon boundary = rectangle(0, 0, 1000, 1000);
  const auto cells = build_cell_coverage({{1, Point(500, 500)}}, boundary, {});
  const HourStamp t = parse_iso_hour("2015-03-02T10");
  const std::vector<ActivityRecord> recs{{1, t, 100.0}};
  const ActivitySeries series(cells, recs);

  CHECK(district_activity(rect_district(1, 0, 0, 1000, 1000), cells, series, t) == doctest::Approx(100.0));
  CHECK(district_activity(rect_district(1, 0, 0, 500, 1000), cells, series, t) == doctest::Approx(50.0));

  CoverageWarnings w;
  CHECK(district_activity(rect_district(1, 0, 0, 500, 1000), cells, series, t + 1, &w) == 0.0);
  CHECK(w.empty_hours == 1);

  CHECK_THROWS_AS(ActivitySeries(cells, std::vector<ActivityRecord>{{7, t, 1.0}}), ValidationError);

  // Duplicate rows for one station and hour are summed.
  const std::vector<ActivityRecord> dup{{1, t, 60.0}, {1, t, 40.0}};
  CHECK(district_activity(rect_district(1, 0, 0, 1000, 1000), cells, ActivitySeries(cells, dup), t) ==
        doctest::Approx(100.0));
}

TEST_CASE("district_activity matches a double-loop oracle") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(1.0, 1199.0);
  const Polygon boundary = rectangle(0, 0, 1200, 1200);
  std::vector<Polygon> water{make_polygon(oracle::random_star(rng, 10, Point(900, 900), 50.0, 200.0))};
  std::vector<RadioStation> stations;
  for (int i = 0; i < 25; ++i) stations.push_back({i, Point(u(rng), u(rng))});
  const auto cells = build_cell_coverage(stations, boundary, water);

  // Districts cover only part of the city.
  std::vector<District> districts;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) districts.push_back(rect_district(i * 2 + j, i * 300.0, j * 300.0, i * 300.0 + 300.0, j * 300.0 + 300.0));
  const MultiPolygon all = [&] {
    MultiPolygon m;
    for (const auto& d : districts) m.push_back(d.region[0]);
    return m;
  }();

  std::vector<ActivityRecord> recs;
  const HourStamp t = parse_iso_hour("2015-03-03T09");
  std::uniform_real_distribution<double> r(0.0, 500.0);
  for (const auto& s : stations) recs.push_back({s.id, t, r(rng)});
  const ActivitySeries series(cells, recs);

  double sum_s = 0.0;
  for (const auto& d : districts) sum_s += district_activity(d, cells, series, t);
  double expected = 0.0;
  for (std::size_t v = 0; v < cells.size(); ++v) {
    const double water_area = intersect_area(cells[v].polygon, water[0]);
    const double covered = intersect_area(cells[v].polygon, all);
    expected += recs[v].connections * covered / (polygon_area(cells[v].polygon) - water_area);
  }
  CHECK(std::abs(sum_s - expected) <= 1e-9 * expected);
}

TEST_CASE("mass conservation and linearity") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_real_distribution<double> u(1.0, 799.0);
    const Polygon boundary = rectangle(0, 0, 800, 800);
    std::vector<RadioStation> stations;
    for (int i = 0; i < 40; ++i) stations.push_back({i, Point(u(rng), u(rng))});
    const auto cells = build_cell_coverage(stations, boundary, {});
    std::vector<District> districts;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) districts.push_back(rect_district(i * 4 + j, i * 200.0, j * 200.0, i * 200.0 + 200.0, j * 200.0 + 200.0));

    std::vector<ActivityRecord> recs, doubled;
    std::uniform_real_distribution<double> r(0.0, 1000.0);
    const HourStamp t0 = parse_iso_hour("2015-03-02T00");
    for (HourStamp t = t0; t < t0 + 24; ++t)
      for (const auto& s : stations) {
        recs.push_back({s.id, t, r(rng)});
        doubled.push_back({s.id, t, 2.0 * recs.back().connections});
      }
    const ActivitySeries series(cells, recs), series2(cells, doubled);
    std::vector<std::vector<CellWeight>> weights;
    for (const auto& d : districts) weights.push_back(district_weights(d, cells));
    for (HourStamp t = t0; t < t0 + 24; ++t) {
      double total_r = 0.0;
      for (const auto& rec : recs)
        if (rec.hour == t) total_r += rec.connections;
      double total_s = 0.0;
      for (std::size_t i = 0; i < districts.size(); ++i) {
        const double s = district_activity(weights[i], series, t);
        total_s += s;
        CHECK(district_activity(weights[i], series2, t) == doctest::Approx(2.0 * s).epsilon(1e-12));
      }
      CHECK(std::abs(total_s - total_r) <= 1e-9 * total_r);
    }
  }
}

TEST_CASE("activity_density calendar") {
  const Polygon boundary = rectangle(0, 0, 1, 1);
  const auto cells = build_cell_coverage({{1, Point(0.5, 0.5)}}, boundary, {});
  const District d = rect_district(1, 0, 0, 1, 1);
  Calendar cal;

  SUBCASE("constant signal") {
    std::vector<ActivityRecord> recs;
    const HourStamp t0 = parse_iso_hour("2015-03-02T00");  // Monday
    for (HourStamp t = t0; t < t0 + 24 * 7; ++t) recs.push_back({1, t, 42.0});
    const auto r = activity_density(d, cells, ActivitySeries(cells, recs), cal);
    REQUIRE(r.density);
    CHECK(*r.density == doctest::Approx(42.0).epsilon(1e-15));
    CHECK(r.hours_used == 5 * 24);
  }
  SUBCASE("weekend-only records are missing") {
    std::vector<ActivityRecord> recs;
    const HourStamp t0 = parse_iso_hour("2015-03-07T00");  // Saturday
    for (HourStamp t = t0; t < t0 + 48; ++t) recs.push_back({1, t, 10.0});
    const auto r = activity_density(d, cells, ActivitySeries(cells, recs), cal);
    CHECK(!r.density);
    CHECK(r.reason == "NoBusinessDayRecords");
    CHECK(r.hours_used == 0);
  }
  SUBCASE("no records at all") {
    const auto r = activity_density(d, cells, ActivitySeries(cells, {}), cal);
    CHECK(!r.density);
    CHECK(r.reason == "NoRecords");
  }
  SUBCASE("two-week trace against a flat business-day average") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> r(0.0, 100.0);
    std::vector<ActivityRecord> recs;
    const HourStamp t0 = parse_iso_hour("2015-03-02T00");
    cal.holidays.insert(parse_iso_date("2015-03-10"));
    double sum = 0.0;
    int hours = 0;
    for (int day = 0; day < 14; ++day)
      for (int h = 0; h < 24; ++h) {
        const HourStamp t = t0 + day * 24 + h;
        // Thursdays lose their evening records; those hours count as zero.
        const bool dropped = day % 7 == 3 && h >= 18;
        const double v = r(rng);
        if (!dropped) recs.push_back({1, t, v});
        const bool business = day % 7 < 5 && day != 8;
        if (business) {
          sum += dropped ? 0.0 : v;
          ++hours;
        }
      }
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto res = activity_density(d, cells, ActivitySeries(cells, recs), cal);
    REQUIRE(res.density);
    CHECK(res.hours_used == 9 * 24);
    CHECK(hours == 9 * 24);
    CHECK(*res.density == doctest::Approx(sum / hours).epsilon(1e-12));
    CHECK(res.warnings.empty_hours == 12);
  }
}
