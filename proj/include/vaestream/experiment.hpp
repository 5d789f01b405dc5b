#pragma once

// Experiment runner: JSON configs, seeded repetitions, aggregation and timing reports.

#include "vaestream/ensemble.hpp"
#include "vaestream/eval.hpp"
#include "vaestream/streams.hpp"
#include "vaestream/vae.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vaestream::experiment {

using Json = nlohmann::ordered_json;

/// Traces of different lengths (or other inconsistent inputs) cannot be aggregated.
class AggregationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  streams::StreamConfig stream;
  /// `input_dim` is derived from the stream and not part of the file format.
  vae::VaeConfig model;
  ensemble::EngineConfig engine;
  ensemble::AblationMode mode = ensemble::AblationMode::Esdd;
  eval::EvalConfig evaluation;
  std::size_t repetitions = 20;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Engine configuration after the ablation mode is applied.
  ensemble::EngineConfig effective_engine() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Per-generator model defaults (hidden widths, epochs, loss).
vae::VaeConfig default_model(streams::Generator g);
ExperimentConfig default_config(streams::Generator g);

/// Builds a config from JSON. Missing keys take the generator's defaults;
/// unknown keys and ill-typed values raise ConfigError with the field path.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Full JSON form; parse_config(to_json(c)) == c.
Json to_json(const ExperimentConfig& config);

/// FNV-1a over the canonical JSON, excluding the output directory. Hex encoded.
std::string config_hash(const ExperimentConfig& config);

/// Seed of repetition `r`.
std::uint64_t repetition_seed(std::uint64_t master, std::size_t r);

struct PreparedStream {
  std::vector<nn::Vector> pretrain;      // normalised
  std::vector<streams::Instance> stream;  // normalised, in arrival order
  bool labelled = true;
  std::vector<std::uint64_t> drift_times;  // known drift positions (synthetic streams)
};

/// Generates (or loads) the stream and pretraining set for one repetition seed.
PreparedStream prepare_stream(const ExperimentConfig& config, std::uint64_t seed);

struct RepetitionResult {
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  eval::MetricsTrace trace;
  ensemble::EngineStats stats;
  std::vector<std::size_t> member_train_windows;
  std::vector<std::uint64_t> alarm_indices;   // stream indices of ensemble alarms
  std::vector<std::uint64_t> training_indices;  // stream indices of member updates (one per member)
  std::vector<std::uint64_t> drift_times;
  eval::DriftDelayReport drift;
};

/// Runs repetition `r` in memory.
RepetitionResult run_repetition(const ExperimentConfig& config, std::size_t r);

struct MetricSummary {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t defined_reps = 0;  // repetitions where the metric was defined
};

struct StepSeries {
  std::vector<std::optional<double>> mean;
  std::vector<std::optional<double>> stderr_;
};

struct Summary {
  std::size_t repetitions = 0;
  bool single_repetition = false;  // stderr is 0 by convention
  std::vector<std::uint64_t> t;
  /// Keyed by metric name: recall, specificity, gmean, pauc.
  std::vector<std::pair<std::string, std::optional<MetricSummary>>> whole_run;
  std::vector<std::pair<std::string, StepSeries>> per_step;
  std::vector<std::optional<double>> run_values(const std::string& metric) const;
  std::vector<std::vector<std::optional<double>>> rep_values;  // [metric][rep]
};

/// Mean and standard error (sample std / sqrt(reps)) across repetitions.
Summary aggregate_reps(const std::vector<eval::MetricsTrace>& traces, bool average_over_steps = true);

struct TimingEntry {
  std::uint64_t events = 0;
  std::optional<double> mean_seconds;  // absent when no events occurred
};

struct TimingReport {
  TimingEntry stream;       // per processed instance, excluding training and resets
  TimingEntry incremental;  // per member update
  TimingEntry drift;        // per alarm-triggered reset
  std::uint64_t expected_incremental = 0;  // sum_i floor(T / W_train(i)) over repetitions
};

TimingReport measure_timings(const std::vector<RepetitionResult>& runs);

struct RunArtifacts {
  std::vector<std::filesystem::path> trace_files;
  std::filesystem::path summary_file;
  std::filesystem::path timings_file;
  Summary summary;
  TimingReport timings;
};

Json summary_json(const ExperimentConfig& config, const Summary& summary,
                  const std::vector<RepetitionResult>& runs);
Json timings_json(const ExperimentConfig& config, const TimingReport& report);

/// Runs every repetition, writing trace_repNN.csv, summary.json and timings.json
/// into config.output_dir. Throws std::runtime_error with the path on I/O failure.
RunArtifacts run_experiment(const ExperimentConfig& config);

}  // namespace vaestream::experiment
