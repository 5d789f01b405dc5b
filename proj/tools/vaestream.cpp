// Command-line experiment runner.
//
//   vaestream run --config exp.json [--seed N] [--reps N] [--out DIR] [--mode M] [--timings]
//
// Output directory precedence: --out, then $VAESTREAM_OUT, then the config file.
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include "vaestream/error.hpp"
#include "vaestream/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kConfigFailure = 1;
constexpr int kRuntimeFailure = 2;

void print_timing(const char* name, const vaestream::experiment::TimingEntry& e) {
  std::cout << name << ": ";
  if (e.mean_seconds) {
    std::cout << *e.mean_seconds << " s mean over " << e.events << " events\n";
  } else {
    std::cout << "no events\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  namespace ex = vaestream::experiment;

  CLI::App app{"Streaming anomaly detection with VAE and drift-detector ensembles"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::string out_dir;
  std::string mode;
  bool timings = false;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--reps", reps, "Number of repetitions")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--mode", mode, "Ablation mode")
      ->check(CLI::IsMember({"baseline", "vaepp", "vaeppes", "onedd", "esdd"}));
  run->add_flag("--timings", timings, "Print the timing report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigFailure;
  }

  ex::ExperimentConfig config;
  try {
    config = ex::load_config(config_path);
    if (seed) config.seed = *seed;
    if (reps) config.repetitions = *reps;
    if (!mode.empty()) config.mode = vaestream::ensemble::parse_ablation_mode(mode);
    if (!out_dir.empty()) {
      config.output_dir = out_dir;
    } else if (const char* env = std::getenv("VAESTREAM_OUT"); env && *env) {
      config.output_dir = env;
    }
    config.validate();
  } catch (const vaestream::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  }

  try {
    const ex::RunArtifacts artifacts = ex::run_experiment(config);
    std::cout << "wrote " << artifacts.trace_files.size() << " traces, " << artifacts.summary_file.string()
              << " and " << artifacts.timings_file.string() << '\n';
    for (const auto& [name, summary] : artifacts.summary.whole_run) {
      std::cout << name << ": ";
      if (summary) {
        std::cout << summary->mean << " +/- " << summary->stderr_ << '\n';
      } else {
        std::cout << "undefined\n";
      }
    }
    if (timings) {
      print_timing("t_stream", artifacts.timings.stream);
      print_timing("t_incr", artifacts.timings.incremental);
      print_timing("t_drift", artifacts.timings.drift);
    }
  } catch (const vaestream::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return 0;
}
