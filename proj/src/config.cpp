#include "vitality/config.hpp"

#include <fstream>
#include <set>

#include <toml.hpp>

namespace vitality {

namespace fs = std::filesystem;

namespace {

class Reader {
 public:
  explicit Reader(fs::path path) : path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ValidationError(path_.string(), std::nullopt, msg); }

  const toml::table* table(const toml::table& parent, std::string_view key, std::string_view where) const {
    const auto* node = parent.get(key);
    if (!node) return nullptr;
    if (!node->is_table()) fail(std::string(where) + std::string(key) + " must be a table");
    return node->as_table();
  }

  void allow(const toml::table& t, std::string_view where, std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, v] : t)
      if (std::find(keys.begin(), keys.end(), k.str()) == keys.end())
        fail("unknown key '" + std::string(where) + std::string(k.str()) + "'");
  }

  template <typename T>
  std::optional<T> get(const toml::table& t, std::string_view key, std::string_view where) const {
    const auto* node = t.get(key);
    if (!node) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (node->is_integer()) return node->as_integer()->get();
    } else {
      if (auto v = node->value_exact<T>()) return *v;
    }
    fail("'" + std::string(where) + std::string(key) + "' has the wrong type");
  }

  std::size_t count(const toml::table& t, std::string_view key, std::string_view where, std::size_t fallback) const {
    const auto v = get<std::int64_t>(t, key, where);
    if (!v) return fallback;
    if (*v < 0) fail("'" + std::string(where) + std::string(key) + "' must be non-negative");
    return static_cast<std::size_t>(*v);
  }

  std::vector<std::string> strings(const toml::node& node, const std::string& what) const {
    const auto* arr = node.as_array();
    if (!arr) fail(what + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *arr) {
      const auto s = e.value_exact<std::string>();
      if (!s) fail(what + " must be an array of strings");
      out.push_back(*s);
    }
    return out;
  }

  std::vector<double> numbers(const toml::node& node, const std::string& what, std::size_t n) const {
    const auto* arr = node.as_array();
    if (!arr || arr->size() != n) fail(what + " must be an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& e : *arr) {
      const auto v = e.value<double>();
      if (!v) fail(what + " must be an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  fs::path resolve(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : path_.parent_path() / q;
  }

 private:
  fs::path path_;
};

TransformKind parse_transform(const Reader& r, const std::string& s) {
  if (s == "boxcox") return TransformKind::BoxCox;
  if (s == "log") return TransformKind::Log;
  if (s == "none") return TransformKind::None;
  r.fail("unknown transform '" + s + "' (expected boxcox, log or none)");
}

std::string transform_name(TransformKind k) {
  switch (k) {
    case TransformKind::BoxCox: return "boxcox";
    case TransformKind::Log: return "log";
    case TransformKind::None: return "none";
  }
  return "?";
}

std::string format_date(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd(d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

SuiteOptions PipelineConfig::suite_options() const {
  if (!model.seed) throw ValidationError(source.string(), std::nullopt, "a seed is required ([model] seed or --seed)");
  SuiteOptions o;
  o.groups = model.groups;
  o.interactions = model.interactions;
  o.combine = model.combine;
  o.rfe_keep = model.rfe_keep;
  o.stability.subsamples = model.subsamples;
  o.stability.threshold = model.threshold;
  o.stability.grid = model.grid;
  o.stability.decades = model.decades;
  o.stability.floor = model.penalty_floor;
  o.cv.splits = model.splits;
  o.cv.train_frac = model.train_frac;
  o.seed = *model.seed;
  o.jobs = jobs;
  o.transforms = model.transforms;
  o.standardize_response = model.standardize_response;
  return o;
}

PipelineConfig load_config(const fs::path& path) {
  const Reader r(path);
  if (!fs::exists(path)) r.fail("config file not found");
  toml::table doc;
  try {
    doc = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    r.fail(std::string(e.description()) + " at line " + std::to_string(e.source().begin.line));
  }
  PipelineConfig cfg;
  cfg.source = path;
  r.allow(doc, "", {"inputs", "output", "calendar", "metrics", "model", "jobs"});
  if (auto j = r.get<std::int64_t>(doc, "jobs", "")) {
    if (*j < 0) r.fail("'jobs' must be non-negative");
    cfg.jobs = static_cast<unsigned>(*j);
  }

  if (const auto* t = r.table(doc, "inputs", "")) {
    r.allow(*t, "inputs.",
            {"blocks", "districts", "census", "landuse", "vacuums", "places", "streets", "stations", "boundary",
             "activity"});
    auto& in = cfg.inputs;
    const std::pair<const char*, fs::path*> slots[] = {
        {"blocks", &in.blocks},     {"districts", &in.districts}, {"census", &in.census},
        {"landuse", &in.landuse},   {"vacuums", &in.vacuums},     {"places", &in.places},
        {"streets", &in.streets},   {"stations", &in.stations},   {"boundary", &in.boundary},
        {"activity", &in.activity}};
    for (const auto& [key, slot] : slots)
      if (auto v = r.get<std::string>(*t, key, "inputs.")) {
        *slot = r.resolve(*v);
        if (!fs::exists(*slot)) throw ValidationError(slot->string(), std::nullopt, std::string("input '") + key + "' not found");
      }
  }

  if (const auto* t = r.table(doc, "output", "")) {
    r.allow(*t, "output.", {"dir"});
    if (auto v = r.get<std::string>(*t, "dir", "output.")) cfg.output_dir = *v;
  }
  cfg.output_dir = cfg.output_dir.is_absolute() ? cfg.output_dir : path.parent_path() / cfg.output_dir;

  if (const auto* t = r.table(doc, "calendar", "")) {
    r.allow(*t, "calendar.", {"holidays"});
    if (const auto* h = t->get("holidays"))
      for (const auto& d : r.strings(*h, "calendar.holidays")) {
        try {
          cfg.calendar.holidays.insert(parse_iso_date(d));
        } catch (const std::exception& e) {
          r.fail("calendar.holidays: " + std::string(e.what()));
        }
      }
  }

  if (const auto* t = r.table(doc, "metrics", "")) {
    r.allow(*t, "metrics.",
            {"floor_values", "apartment_midpoints", "age_bands", "reference_year", "age_dispersion", "classification",
             "small_park_max_area", "station_buffer", "buffer_segments", "exclude_water", "exclude_natural_large_parks",
             "exclude_all_large_parks"});
    auto& m = cfg.metrics;
    if (const auto* n = t->get("floor_values")) {
      const auto v = r.numbers(*n, "metrics.floor_values", 4);
      std::copy(v.begin(), v.end(), m.floor_values.begin());
    }
    if (const auto* n = t->get("apartment_midpoints")) {
      const auto v = r.numbers(*n, "metrics.apartment_midpoints", 6);
      std::copy(v.begin(), v.end(), m.apartment_midpoints.begin());
    }
    if (const auto* n = t->get("age_bands")) {
      const auto* arr = n->as_array();
      if (!arr || arr->size() != 9) r.fail("metrics.age_bands must hold 9 [start, end] pairs");
      for (std::size_t b = 0; b < 9; ++b) {
        const auto v = r.numbers(*arr->get(b), "metrics.age_bands entries", 2);
        m.age_bands[b] = {static_cast<int>(v[0]), static_cast<int>(v[1])};
      }
    }
    if (auto v = r.get<std::int64_t>(*t, "reference_year", "metrics.")) m.reference_year = static_cast<int>(*v);
    if (auto v = r.get<std::string>(*t, "age_dispersion", "metrics.")) {
      if (*v == "verbatim") m.age_dispersion = AgeDispersion::Verbatim;
      else if (*v == "weighted_sd") m.age_dispersion = AgeDispersion::WeightedSd;
      else r.fail("metrics.age_dispersion must be 'verbatim' or 'weighted_sd'");
    }
    if (const auto* c = r.table(*t, "classification", "metrics.")) {
      for (const auto& [label, node] : *c) {
        PlaceGroup g;
        try {
          g = parse_place_group(label.str());
        } catch (const ClassificationError& e) {
          r.fail(e.what());
        }
        PlaceFlags f;
        for (const auto& flag : r.strings(node, "metrics.classification entries")) {
          if (flag == "daily_use") f.daily_use = true;
          else if (flag == "nightlife") f.nightlife = true;
          else if (flag == "third_place") f.third_place = true;
          else r.fail("unknown place flag '" + flag + "'");
        }
        cfg.classification[g] = f;
      }
    }
    if (auto v = r.get<double>(*t, "small_park_max_area", "metrics.")) cfg.vacuum.small_park_max_area = *v;
    if (auto v = r.get<double>(*t, "station_buffer", "metrics.")) cfg.vacuum.station_buffer = *v;
    if (auto v = r.get<std::int64_t>(*t, "buffer_segments", "metrics.")) cfg.vacuum.buffer_segments = static_cast<int>(*v);
    if (auto v = r.get<bool>(*t, "exclude_water", "metrics.")) cfg.net_area.exclude_water = *v;
    if (auto v = r.get<bool>(*t, "exclude_natural_large_parks", "metrics.")) cfg.net_area.exclude_natural_large_parks = *v;
    if (auto v = r.get<bool>(*t, "exclude_all_large_parks", "metrics.")) cfg.net_area.exclude_all_large_parks = *v;
  }

  if (const auto* t = r.table(doc, "model", "")) {
    r.allow(*t, "model.",
            {"seed", "splits", "train_frac", "subsamples", "threshold", "grid", "decades", "penalty_floor", "rfe_keep",
             "combine", "groups", "interactions", "transforms", "standardize_response", "cv_trace"});
    auto& m = cfg.model;
    if (auto v = r.get<std::int64_t>(*t, "seed", "model.")) m.seed = static_cast<std::uint64_t>(*v);
    m.splits = r.count(*t, "splits", "model.", m.splits);
    m.subsamples = r.count(*t, "subsamples", "model.", m.subsamples);
    m.grid = r.count(*t, "grid", "model.", m.grid);
    m.rfe_keep = r.count(*t, "rfe_keep", "model.", m.rfe_keep);
    if (auto v = r.get<double>(*t, "train_frac", "model.")) m.train_frac = *v;
    if (!(m.train_frac > 0.0 && m.train_frac < 1.0)) r.fail("model.train_frac must lie in (0, 1)");
    if (auto v = r.get<double>(*t, "threshold", "model.")) m.threshold = *v;
    if (auto v = r.get<double>(*t, "decades", "model.")) m.decades = *v;
    if (auto v = r.get<std::string>(*t, "penalty_floor", "model.")) {
      if (*v == "universal") m.penalty_floor = PenaltyFloor::Universal;
      else if (*v == "none") m.penalty_floor = PenaltyFloor::None;
      else r.fail("model.penalty_floor must be 'universal' or 'none'");
    }
    if (auto v = r.get<std::string>(*t, "combine", "model.")) {
      if (*v == "union") m.combine = CombineRule::Union;
      else if (*v == "intersection") m.combine = CombineRule::Intersection;
      else r.fail("model.combine must be 'union' or 'intersection'");
    }
    if (const auto* g = t->get("groups")) {
      const auto* arr = g->as_array();
      if (!arr) r.fail("model.groups must be an array of tables");
      m.groups.clear();
      for (const auto& e : *arr) {
        const auto* gt = e.as_table();
        if (!gt) r.fail("model.groups must be an array of tables");
        r.allow(*gt, "model.groups.", {"name", "columns"});
        const auto name = r.get<std::string>(*gt, "name", "model.groups.");
        const auto* cols = gt->get("columns");
        if (!name || !cols) r.fail("model.groups entries need 'name' and 'columns'");
        m.groups.push_back({*name, r.strings(*cols, "model.groups.columns")});
      }
    }
    if (const auto* n = t->get("interactions")) {
      const auto* arr = n->as_array();
      if (!arr) r.fail("model.interactions must be an array of [a, b] pairs");
      m.interactions.clear();
      for (const auto& e : *arr) {
        const auto pair = r.strings(e, "model.interactions entries");
        if (pair.size() != 2) r.fail("model.interactions entries must be [a, b] pairs");
        m.interactions.push_back({pair[0], pair[1]});
      }
    }
    if (const auto* tr = r.table(*t, "transforms", "model.")) {
      for (const auto& [col, node] : *tr) {
        const auto v = node.value_exact<std::string>();
        if (!v) r.fail("model.transforms values must be strings");
        m.transforms[std::string(col.str())] = parse_transform(r, *v);
      }
    }
    if (auto v = r.get<bool>(*t, "standardize_response", "model.")) m.standardize_response = *v;
    if (auto v = r.get<bool>(*t, "cv_trace", "model.")) m.cv_trace = *v;
  }
  return cfg;
}

void write_config(const fs::path& path, const PipelineConfig& cfg) {
  toml::table doc;
  toml::table inputs;
  const auto& in = cfg.inputs;
  const std::pair<const char*, const fs::path*> slots[] = {
      {"blocks", &in.blocks},   {"districts", &in.districts}, {"census", &in.census},     {"landuse", &in.landuse},
      {"vacuums", &in.vacuums}, {"places", &in.places},       {"streets", &in.streets},   {"stations", &in.stations},
      {"boundary", &in.boundary}, {"activity", &in.activity}};
  for (const auto& [key, p] : slots)
    if (!p->empty()) inputs.insert(key, p->generic_string());
  doc.insert("inputs", std::move(inputs));
  doc.insert("output", toml::table{{"dir", cfg.output_dir.generic_string()}});
  doc.insert("jobs", static_cast<std::int64_t>(cfg.jobs));

  toml::array holidays;
  for (const auto& d : cfg.calendar.holidays) holidays.push_back(format_date(d));
  doc.insert("calendar", toml::table{{"holidays", std::move(holidays)}});

  const auto& m = cfg.metrics;
  toml::table metrics;
  toml::array floors, apts, bands;
  for (double v : m.floor_values) floors.push_back(v);
  for (double v : m.apartment_midpoints) apts.push_back(v);
  for (const auto& b : m.age_bands) bands.push_back(toml::array{b.start, b.end});
  metrics.insert("floor_values", std::move(floors));
  metrics.insert("apartment_midpoints", std::move(apts));
  metrics.insert("age_bands", std::move(bands));
  metrics.insert("reference_year", m.reference_year);
  metrics.insert("age_dispersion", m.age_dispersion == AgeDispersion::Verbatim ? "verbatim" : "weighted_sd");
  metrics.insert("small_park_max_area", cfg.vacuum.small_park_max_area);
  metrics.insert("station_buffer", cfg.vacuum.station_buffer);
  metrics.insert("buffer_segments", cfg.vacuum.buffer_segments);
  metrics.insert("exclude_water", cfg.net_area.exclude_water);
  metrics.insert("exclude_natural_large_parks", cfg.net_area.exclude_natural_large_parks);
  metrics.insert("exclude_all_large_parks", cfg.net_area.exclude_all_large_parks);
  toml::table classification;
  for (const auto& [g, f] : cfg.classification) {
    toml::array flags;
    if (f.daily_use) flags.push_back("daily_use");
    if (f.nightlife) flags.push_back("nightlife");
    if (f.third_place) flags.push_back("third_place");
    classification.insert(std::string(to_string(g)), std::move(flags));
  }
  metrics.insert("classification", std::move(classification));
  doc.insert("metrics", std::move(metrics));

  const auto& md = cfg.model;
  toml::table model;
  if (md.seed) model.insert("seed", static_cast<std::int64_t>(*md.seed));
  model.insert("splits", static_cast<std::int64_t>(md.splits));
  model.insert("train_frac", md.train_frac);
  model.insert("subsamples", static_cast<std::int64_t>(md.subsamples));
  model.insert("threshold", md.threshold);
  model.insert("grid", static_cast<std::int64_t>(md.grid));
  model.insert("decades", md.decades);
  model.insert("penalty_floor", md.penalty_floor == PenaltyFloor::Universal ? "universal" : "none");
  model.insert("rfe_keep", static_cast<std::int64_t>(md.rfe_keep));
  model.insert("combine", md.combine == CombineRule::Union ? "union" : "intersection");
  model.insert("standardize_response", md.standardize_response);
  model.insert("cv_trace", md.cv_trace);
  toml::array inter;
  for (const auto& i : md.interactions) inter.push_back(toml::array{i.a, i.b});
  model.insert("interactions", std::move(inter));
  toml::table transforms;
  for (const auto& [col, k] : md.transforms) transforms.insert(col, transform_name(k));
  model.insert("transforms", std::move(transforms));
  toml::array groups;
  for (const auto& g : md.groups) {
    toml::array cols;
    for (const auto& c : g.columns) cols.push_back(c);
    groups.push_back(toml::table{{"name", g.name}, {"columns", std::move(cols)}});
  }
  model.insert("groups", std::move(groups));
  doc.insert("model", std::move(model));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc << '\n';
}

}  // namespace vitality
