// Command line front end. Each subcommand runs exactly one pipeline stage
// and prints that stage's JSON report on stdout; failures print a JSON error
// record on stderr and exit nonzero, with "missing_stage" set when the
// failure is an unmet stage dependency.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "egoact/pipeline.hpp"

namespace {

const char* const kStages[] = {"synth",      "flow",  "compensate", "preprocess", "stats",
                               "train",      "eval",  "gradcam",    "report"};

struct CliOptions {
  std::string config_path;
  int jobs = 1;
  bool deterministic = false;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

int run(const std::string& stage, const CliOptions& cli) {
  try {
    egoact::PipelineConfig cfg = egoact::load_pipeline_config(cli.config_path);
    if (cli.seed_set) cfg.seed = cli.seed;
    egoact::RunOptions opt;
    opt.jobs = cli.jobs;
    opt.deterministic = cli.deterministic;
    egoact::Pipeline pipeline(std::move(cfg), opt);
    std::cout << pipeline.run_stage(stage).dump(2) << "\n";
    return 0;
  } catch (const egoact::DependencyError& e) {
    std::cerr << nlohmann::json{{"error", e.what()},
                                {"stage", stage},
                                {"missing_stage", e.missing_stage()}}
                     .dump()
              << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"stage", stage}}.dump() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Two-stream egocentric action recognition pipeline.\n"
      "Stages run in the order synth, flow, compensate, stats, preprocess,\n"
      "train, eval, gradcam, report; each stage requires its inputs to exist."};
  app.require_subcommand(1);

  CliOptions cli;
  std::string stage;
  for (const char* name : kStages) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
    sub->add_option("--config,-c", cli.config_path, "pipeline config (json)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--jobs,-j", cli.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--deterministic", cli.deterministic,
                  "strip volatile fields from persisted reports and pin the run directory");
    sub->add_option("--seed", cli.seed, "override the config seed")
        ->each([&](const std::string&) { cli.seed_set = true; });
    sub->callback([&, name] { stage = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return run(stage, cli);
}
