#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vitality/activity.hpp"
#include "vitality/config.hpp"
#include "vitality/metrics.hpp"
#include "vitality/stats.hpp"
#include "vitality/synth.hpp"

using namespace vitality;
namespace fs = std::filesystem;

namespace {

void check_truth(const SynthCity& c) {
  const auto features = compute_features(c.city);
  REQUIRE(features.size() == c.truth.size());
  for (std::size_t d = 0; d < features.size(); ++d) {
    const auto& t = c.truth[d];
    CHECK(features[d].district == t.district);
    CHECK(c.city.districts[d].net_area == doctest::Approx(t.net_area).epsilon(1e-12));
    for (Metric m : all_metrics()) {
      const auto& got = features[d][m];
      const auto& want = t.metrics[m];
      INFO("district " << t.district << " metric " << metric_name(m) << " flag " << got.flag);
      REQUIRE(got.value.has_value());
      REQUIRE(want.value.has_value());
      const double scale = std::max(1.0, std::abs(*want.value));
      CHECK(std::abs(*got.value - *want.value) <= 1e-9 * scale);
    }
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vitality_synth_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("generated truth matches the metrics module") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthSpec s;
    s.seed = seed;
    s.activity = false;
    check_truth(generate_city(s));
  }
  SynthSpec wide;
  wide.grid_x = 18;
  wide.grid_y = 9;
  wide.district_tile = 3;
  wide.water_cells = 3;
  wide.activity = false;
  check_truth(generate_city(wide));
  SynthSpec single;
  single.grid_x = single.grid_y = 6;
  single.district_tile = 1;
  single.water_cells = 0;
  single.activity = false;
  check_truth(generate_city(single));
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  SynthSpec s;
  s.grid_x = s.grid_y = 8;
  s.beta = jacobs_beta();
  s.days = 7;
  const auto a = scratch("a"), b = scratch("b"), c = scratch("c");
  write_synth_city(a, generate_city(s));
  write_synth_city(b, generate_city(s));
  for (const auto& e : fs::directory_iterator(a)) {
    INFO(e.path().filename());
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  s.seed = 2;
  write_synth_city(c, generate_city(s));
  CHECK(slurp(a / "blocks.geojson") != slurp(c / "blocks.geojson"));
  CHECK(fs::exists(a / "ground_truth.csv"));
  CHECK(fs::exists(a / "planted_beta.csv"));
  const auto cfg = load_config(a / "config.toml");
  CHECK(cfg.inputs.activity == a / "activity.csv");
  CHECK(cfg.model.seed == std::optional<std::uint64_t>(1));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("activity stage does not shift the other layers") {
  SynthSpec s;
  s.grid_x = s.grid_y = 6;
  s.beta = jacobs_beta();
  const auto with = generate_city(s);
  s.activity = false;
  const auto without = generate_city(s);
  REQUIRE(with.truth.size() == without.truth.size());
  for (std::size_t d = 0; d < with.truth.size(); ++d) {
    CHECK(with.truth[d].metrics == without.truth[d].metrics);
    CHECK(with.truth[d].activity_density == without.truth[d].activity_density);
  }
  CHECK(without.records.empty());
}

TEST_CASE("aggregated station trace recovers the planted density") {
  SynthSpec s;
  s.beta = jacobs_beta();
  s.days = 7;
  const auto c = generate_city(s);
  std::vector<Polygon> water;
  for (const auto& v : c.city.vacuums)
    if (v.kind == VacuumKind::Water) water.push_back(v.polygon);
  const auto cells = build_cell_coverage(c.stations, c.boundary, water);
  const ActivitySeries series(cells, c.records);
  double worst = 0.0;
  for (std::size_t d = 0; d < c.truth.size(); ++d) {
    const auto r = activity_density(c.city.districts[d], cells, series, Calendar{});
    REQUIRE(r.density.has_value());
    CHECK(r.hours_used == 5 * 24);
    worst = std::max(worst, std::abs(*r.density / c.truth[d].activity_density - 1.0));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("noiseless single effect is recovered exactly") {
  SynthSpec s;
  s.grid_x = s.grid_y = 20;
  s.beta = {{"employment_density", 0.5}};
  s.noise_sd = 0.0;
  s.activity = false;
  const auto c = generate_city(s);
  DataTable table;
  for (const auto& t : c.truth) {
    table.ids.push_back(t.district);
    table.columns["employment_density"].push_back(*t.metrics[Metric::EmploymentDensity].value);
    table.columns["activity_density"].push_back(t.activity_density);
  }
  DesignSpec spec;
  spec.response = "activity_density";
  spec.columns = {"employment_density"};
  spec.response_transform = TransformKind::Log;
  spec.standardize_response = false;
  const auto dm = build_design(table, spec);
  const auto fit = ols_fit(dm.X, dm.y, dm.names);
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.terms[0].beta == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fit.intercept.beta == doctest::Approx(s.intercept).epsilon(1e-9));
}

TEST_CASE("infeasible specs are rejected") {
  SynthSpec s;
  s.grid_x = 2;
  CHECK_THROWS_AS(s.validate(), SynthSpecError);
  s = {};
  s.district_tile = 5;
  CHECK_THROWS_AS(s.validate(), SynthSpecError);
  s = {};
  s.water_cells = 100;
  CHECK_THROWS_AS(s.validate(), SynthSpecError);
  s = {};
  s.beta = {{"no_such_metric", 1.0}};
  CHECK_THROWS_AS(s.validate(), SynthSpecError);
  s = {};
  s.district_tile = 1;
  CHECK_THROWS_AS(s.validate(), SynthSpecError);  // water needs tiles of at least 2
  s.water_cells = 0;
  CHECK_NOTHROW(s.validate());
  s = {};
  s.start_date = "2015-13-40";
  CHECK_THROWS(s.validate());
}

TEST_CASE("synth spec files") {
  const auto dir = scratch("spec");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "spec.toml") << "[synth]\nseed = 7\ngrid_x = 6\ngrid_y = 6\npreset = \"jacobs\"\n"
                                        "output = \"city\"\n[synth.beta]\nlum = 0.1\n";
  }
  const auto job = load_synth_spec(dir / "spec.toml");
  CHECK(job.spec.seed == 7);
  CHECK(job.spec.grid_x == 6);
  CHECK(job.spec.beta.size() == 5);
  CHECK(job.output == dir / "city");
  { std::ofstream(dir / "bad.toml") << "[synth]\ngrid_x = 2\n"; }
  CHECK_THROWS_AS(load_synth_spec(dir / "bad.toml"), ValidationError);
  fs::remove_all(dir);
}
