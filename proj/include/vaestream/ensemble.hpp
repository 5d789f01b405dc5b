#pragma once

// Ensemble of incrementally trained VAEs with an ensemble of drift detectors.

#include "vaestream/drift.hpp"
#include "vaestream/vae.hpp"
#include "vaestream/windows.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vaestream::ensemble {

using nn::Rng;
using nn::Vector;

enum class ThresholdMode { Adaptive, Percentile };
enum class DriftMode { Disabled, Single, Ensemble };
enum class ReferenceSource { Stream, Pretrain };

/// Feature subsets of the full method, used for ablations.
enum class AblationMode { Baseline, VaePlusPlus, VaePlusPlusEs, OneDd, Esdd };

std::string to_string(AblationMode mode);
AblationMode parse_ablation_mode(const std::string& name);

struct EngineConfig {
  std::size_t members = 10;
  std::size_t train_window = 3000;       // W_train, also capacity of the shared window
  std::size_t train_window_spread = 2000;  // gamma; W_train(i) in (W_train - gamma, W_train]
  std::size_t drift_window_min = 180;
  std::size_t drift_window_max = 220;
  std::size_t predict_votes = 1;  // P_thre
  std::size_t drift_votes = 10;   // D_thre
  drift::TestConstants test{};
  std::size_t expiry_time = 100;
  ThresholdMode threshold = ThresholdMode::Adaptive;
  double percentile = 95.0;  // used when threshold == Percentile
  bool incremental = true;
  DriftMode drift = DriftMode::Ensemble;
  ReferenceSource reference = ReferenceSource::Stream;
  std::size_t min_retrain = 64;

  void validate() const;
  bool operator==(const EngineConfig&) const = default;
};

/// Returns `base` restricted to the feature subset named by `mode`.
EngineConfig apply_mode(EngineConfig base, AblationMode mode);

/// mean + population standard deviation.
double adaptive_threshold(std::span<const double> losses);

/// b-th percentile with linear interpolation between order statistics.
double fixed_percentile_threshold(std::span<const double> losses, double b);

/// 1 iff `score` is strictly above `threshold`.
int member_predict(double score, double threshold);

/// 1 iff at least `votes` members predict anomaly.
int predict_vote(std::span<const int> member_predictions, std::size_t votes);

/// True iff at least `votes` members are in alarm.
bool drift_vote(std::span<const drift::Flag> member_flags, std::size_t votes);

struct Member {
  std::size_t id = 0;
  vae::Vae model;
  std::size_t train_window = 0;
  std::size_t drift_window = 0;
  double threshold = 0.0;
  std::optional<drift::DriftDetector> detector;
  Rng rng;
  std::uint64_t model_version = 0;
};

struct StepOutput {
  std::uint64_t t = 0;
  int prediction = 0;
  /// P_thre-th largest (score_i - theta_i); prediction == 1 iff this is > 0.
  double score = 0.0;
  bool drift_alarm = false;
  std::vector<int> member_predictions;
  std::vector<double> member_scores;
  std::vector<double> member_thresholds;
  std::vector<drift::Flag> member_flags;
  std::size_t trained_members = 0;
};

struct EngineStats {
  std::uint64_t steps = 0;
  std::uint64_t incremental_trainings = 0;
  std::uint64_t resets = 0;
  std::uint64_t fallback_retrains = 0;
  std::vector<std::uint64_t> alarm_steps;
  std::vector<std::uint64_t> training_steps;  // one entry per member update
  double stream_seconds = 0.0;
  double incremental_seconds = 0.0;
  double drift_seconds = 0.0;
};

class Engine {
 public:
  /// Creates and pretrains every member on `pretrain`. Throws ConfigError if
  /// the configuration is invalid or `pretrain` is smaller than the largest
  /// drift window.
  Engine(EngineConfig config, vae::VaeConfig model_config, std::span<const Vector> pretrain,
         std::uint64_t seed);

  /// Processes one instance. Step counter t starts at 1.
  StepOutput step(const Vector& x);

  const EngineConfig& config() const { return config_; }
  const vae::VaeConfig& model_config() const { return model_config_; }
  const std::vector<Member>& members() const { return members_; }
  std::uint64_t t() const { return t_; }
  std::optional<std::uint64_t> warn_trigger() const { return warn_trigger_; }
  std::optional<std::uint64_t> alarm_trigger() const { return alarm_trigger_; }
  const SlidingWindow<Vector>& train_window() const { return mov_train_; }
  const SlidingWindow<Vector>& warn_buffer() const { return warn_buffer_; }
  const EngineStats& stats() const { return stats_; }

  /// Trains member `i` if t is a multiple of its window and the shared
  /// window holds enough items. Returns true when training ran.
  bool maybe_incremental_train(std::size_t i, std::uint64_t t);

  /// Buffers `x` while a warning is pending and expires stale warnings.
  void warn_buffer_update(const Vector& x, std::uint64_t t);

  /// Replaces every model with a fresh one trained on the warn buffer and
  /// clears all windows, flags and triggers.
  void reset_on_alarm(std::uint64_t t);

  /// Test hook: sets the ensemble triggers directly.
  void set_triggers(std::optional<std::uint64_t> warn, std::optional<std::uint64_t> alarm);

 private:
  double threshold_for(std::span<const double> losses) const;
  void fit_threshold(Member& m, std::span<const Vector> data);

  EngineConfig config_;
  vae::VaeConfig model_config_;
  std::vector<Member> members_;
  SlidingWindow<Vector> mov_train_;
  SlidingWindow<Vector> warn_buffer_;
  std::optional<std::uint64_t> warn_trigger_;
  std::optional<std::uint64_t> alarm_trigger_;
  std::uint64_t t_ = 0;
  EngineStats stats_;
};

}  // namespace vaestream::ensemble
