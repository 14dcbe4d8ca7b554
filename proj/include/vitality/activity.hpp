#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vitality/geometry.hpp"
#include "vitality/model.hpp"

namespace vitality {

struct RadioStation {
  FeatureId id = 0;
  Point location = Point::Zero();
};

/// Voronoi cell of one station clipped to the city boundary.
struct CellCoverage {
  FeatureId station_id = 0;
  Polygon polygon;
  double total_area = 0.0;  // A_v
  double water_area = 0.0;  // A_{v∩W}

  double effective_area() const { return total_area - water_area; }
  bool usable() const { return effective_area() > 1e-9 * total_area && total_area > 0.0; }
};

/// Builds cells in ascending station-id order. Throws ValidationError naming
/// the station when one lies outside the boundary or shares a location.
std::vector<CellCoverage> build_cell_coverage(std::vector<RadioStation> stations, const Polygon& boundary,
                                              std::span<const Polygon> water);

/// Whole hours since 1970-01-01T00:00 UTC.
using HourStamp = std::int64_t;

/// Accepts "YYYY-MM-DDTHH", "YYYY-MM-DDTHH:MM", "YYYY-MM-DDTHH:MM:SS" with an
/// optional trailing "Z"; minutes and seconds must be zero.
HourStamp parse_iso_hour(std::string_view text);
std::string format_iso_hour(HourStamp h);
std::chrono::sys_days parse_iso_date(std::string_view text);

struct ActivityRecord {
  FeatureId station_id = 0;
  HourStamp hour = 0;
  double connections = 0.0;  // R_v(t)
};

struct Calendar {
  std::set<std::chrono::sys_days> holidays;

  /// Monday to Friday and not a holiday.
  bool is_business_day(std::chrono::sys_days d) const;
  bool is_business_hour(HourStamp h) const;
};

/// Per-hour connection counts aligned with a cell list. Rows for the same
/// station and hour are summed.
class ActivitySeries {
 public:
  ActivitySeries(std::span<const CellCoverage> cells, std::span<const ActivityRecord> records);

  /// Hours present in the records, ascending.
  const std::vector<HourStamp>& hours() const { return hours_; }
  /// Counts per cell at hour h; NaN where a cell has no record. Null when the
  /// hour has no records at all.
  const std::vector<double>* at(HourStamp h) const;
  std::size_t cell_count() const { return cells_; }

 private:
  std::size_t cells_ = 0;
  std::vector<HourStamp> hours_;
  std::map<HourStamp, std::vector<double>> counts_;
};

struct CellWeight {
  std::size_t cell = 0;  // index into the cell list
  double weight = 0.0;   // A_{v∩i} / (A_v − A_{v∩W})
};

/// Non-zero weights of the usable cells overlapping the district.
std::vector<CellWeight> district_weights(const District& d, std::span<const CellCoverage> cells);

struct CoverageWarnings {
  std::size_t missing_cell_records = 0;
  std::size_t unusable_cells = 0;
  std::size_t empty_hours = 0;
};

/// S_i(t) = Σ_v R_v(t) · A_{v∩i} / (A_v − A_{v∩W}).
double district_activity(std::span<const CellWeight> weights, const ActivitySeries& series, HourStamp t,
                         CoverageWarnings* warnings = nullptr);
double district_activity(const District& d, std::span<const CellCoverage> cells, const ActivitySeries& series,
                         HourStamp t, CoverageWarnings* warnings = nullptr);

struct DensityResult {
  std::optional<double> density;  // connections / m² of net area
  std::size_t hours_used = 0;
  std::string reason;  // set when density is missing
  CoverageWarnings warnings;
};

/// Mean of S_i(t) over every hour of every business day between the first and
/// last record dates, divided by the district net area.
DensityResult activity_density(const District& d, std::span<const CellWeight> weights,
                               const ActivitySeries& series, const Calendar& calendar);
DensityResult activity_density(const District& d, std::span<const CellCoverage> cells,
                               const ActivitySeries& series, const Calendar& calendar);

}  // namespace vitality
