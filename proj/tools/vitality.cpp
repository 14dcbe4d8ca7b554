#include <CLI11.hpp>

#include <iostream>

#include "vitality/pipeline.hpp"
#include "vitality/synth.hpp"

using namespace vitality;

namespace {

constexpr int kInternalError = 1;
constexpr int kValidationError = 2;

void report(const ValidationError& e) {
  std::cerr << "validation error: " << e.what() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"District vitality pipeline: urban-diversity metrics, activity density and regression models."};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::size_t> splits;
  auto stage = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "pipeline config (TOML)")->required();
    sub->add_option("--jobs", jobs, "worker threads (0 = hardware concurrency)");
    return sub;
  };
  auto* ingest = stage("ingest-check", "validate every configured input layer");
  auto* metrics = stage("metrics", "compute features.csv");
  auto* activity = stage("activity", "compute activity_density.csv");
  auto* regress = stage("regress", "fit the model suite into model_report.{json,csv}");
  regress->add_option("--seed", seed, "master seed for CV and selection");
  regress->add_option("--splits", splits, "shuffle-split CV repetitions");
  auto* table = stage("report", "write table4.csv from model_report.json");
  auto* synth = app.add_subcommand("synth", "generate a synthetic city dataset");
  synth->add_option("--config", config, "synth spec (TOML with a [synth] table)")->required();
  synth->add_option("--seed", seed, "override the spec seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      cmd_synth(config, seed, std::cout);
      return 0;
    }
    auto cfg = load_config(config);
    if (jobs) cfg.jobs = *jobs;
    if (seed) cfg.model.seed = *seed;
    if (splits) cfg.model.splits = *splits;
    if (ingest->parsed()) cmd_ingest_check(cfg, std::cout);
    else if (metrics->parsed()) cmd_metrics(cfg, std::cout);
    else if (activity->parsed()) cmd_activity(cfg, std::cout);
    else if (regress->parsed()) cmd_regress(cfg, std::cout);
    else if (table->parsed()) cmd_report(cfg, std::cout);
    return 0;
  } catch (const ValidationError& e) {
    report(e);
    return kValidationError;
  } catch (const SynthSpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternalError;
  }
}
