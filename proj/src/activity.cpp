#include "vitality/activity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace vitality {

namespace chr = std::chrono;

std::vector<CellCoverage> build_cell_coverage(std::vector<RadioStation> stations, const Polygon& boundary,
                                              std::span<const Polygon> water) {
  if (stations.empty()) throw ValidationError("no radio stations");
  std::sort(stations.begin(), stations.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < stations.size(); ++i)
    if (stations[i].id == stations[i - 1].id)
      throw ValidationError("duplicate station id " + std::to_string(stations[i].id));

  std::vector<Point> sites;
  for (const auto& s : stations) {
    if (!contains(boundary, s.location))
      throw ValidationError("station " + std::to_string(s.id) + " lies outside the city boundary");
    sites.push_back(s.location);
  }

  std::vector<Polygon> cells;
  try {
    cells = voronoi_tessellation(sites, boundary);
  } catch (const DuplicateSiteError& e) {
    throw ValidationError(std::string("stations share a location: ") + e.what());
  }

  std::vector<Box> water_boxes;
  for (const auto& w : water) water_boxes.push_back(bounds(w));

  std::vector<CellCoverage> out;
  out.reserve(stations.size());
  for (std::size_t i = 0; i < stations.size(); ++i) {
    CellCoverage c;
    c.station_id = stations[i].id;
    c.polygon = std::move(cells[i]);
    c.total_area = polygon_area(c.polygon);
    const Box cb = bounds(c.polygon);
    std::vector<Polygon> near;
    for (std::size_t w = 0; w < water.size(); ++w)
      if (cb.intersects(water_boxes[w])) near.push_back(water[w]);
    if (!near.empty()) c.water_area = std::min(c.total_area, overlap_moments(c.polygon, near).area);
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

int digits(std::string_view s, std::size_t pos, std::size_t n, std::string_view text) {
  int v = 0;
  if (pos + n > s.size()) throw std::invalid_argument("malformed timestamp '" + std::string(text) + "'");
  const auto r = std::from_chars(s.data() + pos, s.data() + pos + n, v);
  if (r.ec != std::errc() || r.ptr != s.data() + pos + n)
    throw std::invalid_argument("malformed timestamp '" + std::string(text) + "'");
  return v;
}

chr::sys_days make_date(int y, int m, int d, std::string_view text) {
  const chr::year_month_day ymd{chr::year(y), chr::month(static_cast<unsigned>(m)),
                                chr::day(static_cast<unsigned>(d))};
  if (!ymd.ok()) throw std::invalid_argument("invalid date in '" + std::string(text) + "'");
  return chr::sys_days(ymd);
}

}  // namespace

chr::sys_days parse_iso_date(std::string_view text) {
  if (text.size() < 10 || text[4] != '-' || text[7] != '-')
    throw std::invalid_argument("malformed date '" + std::string(text) + "'");
  return make_date(digits(text, 0, 4, text), digits(text, 5, 2, text), digits(text, 8, 2, text), text);
}

HourStamp parse_iso_hour(std::string_view text) {
  std::string_view s = text;
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() < 13 || s[10] != 'T') throw std::invalid_argument("malformed timestamp '" + std::string(text) + "'");
  const chr::sys_days day = parse_iso_date(s.substr(0, 10));
  const int hour = digits(s, 11, 2, text);
  if (hour > 23) throw std::invalid_argument("hour out of range in '" + std::string(text) + "'");
  std::size_t pos = 13;
  for (int part = 0; part < 2 && pos < s.size(); ++part) {
    if (s[pos] != ':' || digits(s, pos + 1, 2, text) != 0)
      throw std::invalid_argument("timestamp '" + std::string(text) + "' is not aligned to the hour");
    pos += 3;
  }
  if (pos != s.size()) throw std::invalid_argument("malformed timestamp '" + std::string(text) + "'");
  return static_cast<HourStamp>(day.time_since_epoch().count()) * 24 + hour;
}

std::string format_iso_hour(HourStamp h) {
  const auto days = static_cast<int>(h >= 0 ? h / 24 : (h - 23) / 24);
  const int hour = static_cast<int>(h - static_cast<HourStamp>(days) * 24);
  const chr::year_month_day ymd{chr::sys_days(chr::days(days))};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour);
  return buf;
}

bool Calendar::is_business_day(chr::sys_days d) const {
  const chr::weekday wd{d};
  return wd != chr::Saturday && wd != chr::Sunday && !holidays.contains(d);
}

bool Calendar::is_business_hour(HourStamp h) const {
  const auto days = h >= 0 ? h / 24 : (h - 23) / 24;
  return is_business_day(chr::sys_days(chr::days(days)));
}

ActivitySeries::ActivitySeries(std::span<const CellCoverage> cells, std::span<const ActivityRecord> records)
    : cells_(cells.size()) {
  std::map<FeatureId, std::size_t> cell_of;
  for (std::size_t i = 0; i < cells.size(); ++i) cell_of.emplace(cells[i].station_id, i);
  for (const auto& r : records) {
    const auto it = cell_of.find(r.station_id);
    if (it == cell_of.end())
      throw ValidationError("activity record for unknown station id " + std::to_string(r.station_id));
    auto [row, inserted] = counts_.try_emplace(r.hour);
    if (inserted) row->second.assign(cells_, std::numeric_limits<double>::quiet_NaN());
    double& v = row->second[it->second];
    v = std::isnan(v) ? r.connections : v + r.connections;
  }
  hours_.reserve(counts_.size());
  for (const auto& [h, _] : counts_) hours_.push_back(h);
}

const std::vector<double>* ActivitySeries::at(HourStamp h) const {
  const auto it = counts_.find(h);
  return it == counts_.end() ? nullptr : &it->second;
}

std::vector<CellWeight> district_weights(const District& d, std::span<const CellCoverage> cells) {
  std::vector<CellWeight> out;
  const Box db = bounds(d.region);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellCoverage& c = cells[i];
    if (!c.usable() || !db.intersects(bounds(c.polygon))) continue;
    const double a = intersect_area(c.polygon, d.region);
    if (a > 0.0) out.push_back({i, a / c.effective_area()});
  }
  return out;
}

double district_activity(std::span<const CellWeight> weights, const ActivitySeries& series, HourStamp t,
                         CoverageWarnings* warnings) {
  const std::vector<double>* row = series.at(t);
  if (!row) {
    if (warnings) ++warnings->empty_hours;
    return 0.0;
  }
  double s = 0.0;
  for (const auto& w : weights) {
    const double r = (*row)[w.cell];
    if (std::isnan(r)) {
      if (warnings) ++warnings->missing_cell_records;
      continue;
    }
    s += r * w.weight;
  }
  return s;
}

namespace {

std::size_t unusable_overlapping(const District& d, std::span<const CellCoverage> cells) {
  std::size_t n = 0;
  const Box db = bounds(d.region);
  for (const auto& c : cells)
    if (!c.usable() && db.intersects(bounds(c.polygon)) && intersect_area(c.polygon, d.region) > 0.0) ++n;
  return n;
}

}  // namespace

double district_activity(const District& d, std::span<const CellCoverage> cells, const ActivitySeries& series,
                         HourStamp t, CoverageWarnings* warnings) {
  if (warnings) warnings->unusable_cells += unusable_overlapping(d, cells);
  const auto w = district_weights(d, cells);
  return district_activity(w, series, t, warnings);
}

DensityResult activity_density(const District& d, std::span<const CellWeight> weights,
                               const ActivitySeries& series, const Calendar& calendar) {
  DensityResult out;
  const auto& hours = series.hours();
  if (hours.empty()) {
    out.reason = "NoRecords";
    return out;
  }
  // Pooled hours: every hour of every business day from the first to the last
  // record date, with absent hours counted as zero activity.
  const HourStamp first_day = hours.front() >= 0 ? hours.front() / 24 : (hours.front() - 23) / 24;
  const HourStamp last_day = hours.back() >= 0 ? hours.back() / 24 : (hours.back() - 23) / 24;
  double sum = 0.0;
  for (HourStamp day = first_day; day <= last_day; ++day) {
    if (!calendar.is_business_day(chr::sys_days(chr::days(day)))) continue;
    for (HourStamp h = day * 24; h < day * 24 + 24; ++h) {
      sum += district_activity(weights, series, h, &out.warnings);
      ++out.hours_used;
    }
  }
  if (out.hours_used == 0) {
    out.reason = "NoBusinessDayRecords";
    return out;
  }
  out.density = sum / static_cast<double>(out.hours_used) / d.net_area;
  return out;
}

DensityResult activity_density(const District& d, std::span<const CellCoverage> cells,
                               const ActivitySeries& series, const Calendar& calendar) {
  const auto w = district_weights(d, cells);
  DensityResult r = activity_density(d, w, series, calendar);
  r.warnings.unusable_cells += unusable_overlapping(d, cells);
  return r;
}

}  // namespace vitality
