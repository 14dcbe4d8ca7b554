#include "vitality/pipeline.hpp"

#include <algorithm>

#include "vitality/csv.hpp"
#include "vitality/ingest.hpp"
#include "vitality/metrics.hpp"
#include "vitality/synth.hpp"

namespace vitality {

namespace fs = std::filesystem;

namespace {

const fs::path& required(const PipelineConfig& cfg, const fs::path& p, const char* key) {
  if (p.empty())
    throw ValidationError(cfg.source.string(), std::nullopt, std::string("inputs.") + key + " is not configured");
  return p;
}

Polygon default_boundary(const std::vector<District>& districts) {
  Box box;
  for (const auto& d : districts) box.extend(bounds(d.region));
  return rectangle(box.min().x(), box.min().y(), box.max().x(), box.max().y());
}

std::vector<Polygon> water_polygons(const std::vector<VacuumFeature>& vacuums) {
  std::vector<Polygon> out;
  for (const auto& v : vacuums)
    if (v.kind == VacuumKind::Water) out.push_back(v.polygon);
  return out;
}

/// Blocks, census, vacuums, districts and boundary: enough for net areas.
LoadedCity load_region(const PipelineConfig& cfg) {
  const auto& in = cfg.inputs;
  LoadedCity out;
  out.city.blocks = load_blocks(required(cfg, in.blocks, "blocks"));
  out.census = load_census_table(required(cfg, in.census, "census"));
  out.city.vacuums = load_vacuums(required(cfg, in.vacuums, "vacuums"), cfg.vacuum);
  const auto shapes = in.districts.empty() ? std::vector<DistrictShape>{} : load_districts(in.districts);
  out.city.districts = assemble_districts(out.city.blocks, out.census, out.city.vacuums, shapes, cfg.net_area);
  out.boundary = in.boundary.empty() ? default_boundary(out.city.districts) : load_boundary(in.boundary);
  return out;
}

fs::path output(const PipelineConfig& cfg, const char* name) {
  fs::create_directories(cfg.output_dir);
  return cfg.output_dir / name;
}

}  // namespace

LoadedCity load_city(const PipelineConfig& cfg) {
  auto out = load_region(cfg);
  const auto& in = cfg.inputs;
  out.city.landuse = load_landuse(required(cfg, in.landuse, "landuse"));
  auto places = load_places(required(cfg, in.places, "places"), cfg.classification);
  out.city.places = std::move(places.places);
  out.city.companies = std::move(places.companies);
  out.city.streets = load_streets(required(cfg, in.streets, "streets"));
  return out;
}

void cmd_ingest_check(const PipelineConfig& cfg, std::ostream& log) {
  const auto c = load_city(cfg);
  log << "blocks: " << c.city.blocks.size() << '\n'
      << "districts: " << c.city.districts.size() << '\n'
      << "census rows: " << c.census.size() << '\n'
      << "landuse patches: " << c.city.landuse.size() << '\n'
      << "vacuum features: " << c.city.vacuums.size() << '\n'
      << "places: " << c.city.places.size() << ", companies: " << c.city.companies.size() << '\n'
      << "street nodes: " << c.city.streets.nodes.size() << ", segments: " << c.city.streets.segments.size() << '\n';
  if (!cfg.inputs.stations.empty()) log << "stations: " << load_stations(cfg.inputs.stations).size() << '\n';
  if (!cfg.inputs.activity.empty())
    log << "activity records: " << load_activity_records(cfg.inputs.activity).size() << '\n';
  log << "ok\n";
}

void cmd_metrics(const PipelineConfig& cfg, std::ostream& log) {
  const auto c = load_city(cfg);
  const auto rows = compute_features(c.city, cfg.metrics, cfg.vacuum, cfg.jobs);
  std::size_t missing = 0;
  for (const auto& r : rows)
    missing += static_cast<std::size_t>(
        std::count_if(r.metrics.begin(), r.metrics.end(), [](const MetricValue& v) { return !v.value; }));
  write_features(output(cfg, outputs::kFeatures), output(cfg, outputs::kFeatureFlags), rows);
  log << "features: " << rows.size() << " districts, " << missing << " missing values -> "
      << (cfg.output_dir / outputs::kFeatures).string() << '\n';
}

void cmd_activity(const PipelineConfig& cfg, std::ostream& log) {
  const auto c = load_region(cfg);
  const auto stations = load_stations(required(cfg, cfg.inputs.stations, "stations"));
  const auto& record_path = required(cfg, cfg.inputs.activity, "activity");
  const auto records = load_activity_records(record_path);
  if (records.empty()) throw ValidationError(record_path.string(), std::nullopt, "activity record file is empty");
  const auto cells = build_cell_coverage(stations, c.boundary, water_polygons(c.city.vacuums));
  const ActivitySeries series(cells, records);

  CsvTable t;
  t.header = {"district_id", "activity_density", "hours_used", "empty_hours", "missing_cell_records",
              "unusable_cells", "reason"};
  std::size_t missing = 0;
  for (const auto& d : c.city.districts) {
    const auto r = activity_density(d, cells, series, cfg.calendar);
    if (!r.density) ++missing;
    t.rows.push_back({std::to_string(d.id), r.density ? format_number(*r.density) : "", std::to_string(r.hours_used),
                      std::to_string(r.warnings.empty_hours), std::to_string(r.warnings.missing_cell_records),
                      std::to_string(r.warnings.unusable_cells), r.reason});
  }
  write_csv(output(cfg, outputs::kActivity), t);
  log << "activity: " << c.city.districts.size() << " districts, " << cells.size() << " cells, " << missing
      << " without density -> " << (cfg.output_dir / outputs::kActivity).string() << '\n';
}

DataTable regression_table(const fs::path& features, const fs::path& activity) {
  for (const auto& p : {features, activity})
    if (!fs::exists(p)) throw ValidationError(p.string(), std::nullopt, "not found; run the earlier stage first");
  const auto rows = read_features(features);
  const auto act = read_csv(activity);
  const auto id_col = act.column("district_id", activity.string());
  const auto density_col = act.column("activity_density", activity.string());
  std::map<std::int64_t, std::optional<double>> density;
  for (std::size_t i = 0; i < act.rows.size(); ++i) {
    const auto& row = act.rows[i];
    const std::string where = activity.string() + " row " + std::to_string(i + 1);
    const auto id = parse_int(row[id_col], where);
    const auto& cell = row[density_col];
    if (!density.emplace(id, cell.empty() ? std::nullopt : std::optional(parse_double(cell, where))).second)
      throw ValidationError(activity.string(), i, "duplicate district id " + std::to_string(id));
  }
  if (density.size() != rows.size())
    throw ValidationError(activity.string(), std::nullopt, "district ids differ from " + features.string());
  DataTable table;
  for (const auto& r : rows) {
    const auto it = density.find(static_cast<std::int64_t>(r.district));
    if (it == density.end())
      throw ValidationError(activity.string(), std::nullopt,
                            "no activity row for district " + std::to_string(r.district));
    table.ids.push_back(static_cast<std::int64_t>(r.district));
    for (Metric m : all_metrics()) table.columns[std::string(metric_name(m))].push_back(r[m].value);
    table.columns["activity_density"].push_back(it->second);
  }
  return table;
}

void cmd_regress(const PipelineConfig& cfg, std::ostream& log) {
  const auto opts = cfg.suite_options();
  const auto table =
      regression_table(cfg.output_dir / outputs::kFeatures, cfg.output_dir / outputs::kActivity);
  const auto report = run_model_suite(table, opts);
  write_report_json(output(cfg, outputs::kReportJson), report, opts.seed);
  write_report_csv(output(cfg, outputs::kReportCsv), report);
  if (cfg.model.cv_trace) write_cv_trace(output(cfg, outputs::kCvTrace), report);
  for (const auto& m : report.models) {
    if (!m.available) {
      log << "warning: model '" << m.model << "' unavailable: " << m.note << '\n';
      continue;
    }
    log << m.model << ": n=" << m.n << " adj_r2=" << m.adj_r2;
    if (m.cv) log << " cv_mean_r2=" << m.cv->mean_r2;
    log << '\n';
    if (!m.note.empty()) log << "  note: " << m.note << '\n';
  }
  log << "report -> " << (cfg.output_dir / outputs::kReportJson).string() << '\n';
}

void cmd_report(const PipelineConfig& cfg, std::ostream& log) {
  const auto path = cfg.output_dir / outputs::kReportJson;
  if (!fs::exists(path)) throw ValidationError(path.string(), std::nullopt, "not found; run regress first");
  write_table4_csv(output(cfg, outputs::kTable4), read_report_json(path));
  log << "table -> " << (cfg.output_dir / outputs::kTable4).string() << '\n';
}

fs::path cmd_synth(const fs::path& spec, std::optional<std::uint64_t> seed, std::ostream& log) {
  if (!fs::exists(spec)) throw ValidationError(spec.string(), std::nullopt, "spec file not found");
  auto job = load_synth_spec(spec);
  if (seed) job.spec.seed = *seed;
  const auto city = generate_city(job.spec);
  write_synth_city(job.output, city);
  log << "synth: " << city.truth.size() << " districts, " << city.city.blocks.size() << " blocks, "
      << city.stations.size() << " stations -> " << job.output.string() << '\n';
  return job.output;
}

}  // namespace vitality
