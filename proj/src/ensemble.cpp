#include "vaestream/ensemble.hpp"

#include "vaestream/error.hpp"
#include "vaestream/seed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace vaestream::ensemble {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> losses_of(const vae::Vae& model, std::span<const Vector> data) {
  if (data.empty()) return {};
  nn::Matrix xs(data.front().size(), static_cast<Eigen::Index>(data.size()));
  for (std::size_t j = 0; j < data.size(); ++j) xs.col(static_cast<Eigen::Index>(j)) = data[j];
  const auto scores = model.score_batch(xs);
  return {scores.data(), scores.data() + scores.size()};
}

}  // namespace

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::Baseline:
      return "baseline";
    case AblationMode::VaePlusPlus:
      return "vaepp";
    case AblationMode::VaePlusPlusEs:
      return "vaeppes";
    case AblationMode::OneDd:
      return "onedd";
    case AblationMode::Esdd:
      return "esdd";
  }
  return "esdd";
}

AblationMode parse_ablation_mode(const std::string& name) {
  if (name == "baseline") return AblationMode::Baseline;
  if (name == "vaepp") return AblationMode::VaePlusPlus;
  if (name == "vaeppes") return AblationMode::VaePlusPlusEs;
  if (name == "onedd") return AblationMode::OneDd;
  if (name == "esdd") return AblationMode::Esdd;
  throw ConfigError("unknown mode '" + name + "' (expected baseline|vaepp|vaeppes|onedd|esdd)");
}

void EngineConfig::validate() const {
  if (members == 0) throw ConfigError("engine.members must be >= 1");
  if (train_window == 0) throw ConfigError("engine.train_window must be >= 1");
  if (train_window_spread >= train_window) {
    throw ConfigError("engine.train_window_spread must be < engine.train_window");
  }
  if (drift_window_min == 0 || drift_window_min > drift_window_max) {
    throw ConfigError("engine drift window range must satisfy 1 <= min <= max");
  }
  if (predict_votes == 0 || predict_votes > members) {
    throw ConfigError("engine.predict_votes must be in [1, members]");
  }
  const std::size_t detectors = drift == DriftMode::Single ? 1 : members;
  if (drift != DriftMode::Disabled && (drift_votes == 0 || drift_votes > detectors)) {
    throw ConfigError("engine.drift_votes must be in [1, number of detectors]");
  }
  test.validate();
  if (threshold == ThresholdMode::Percentile && !(percentile > 0.0 && percentile < 100.0)) {
    throw ConfigError("engine.percentile must be in (0, 100)");
  }
  if (min_retrain == 0) throw ConfigError("engine.min_retrain must be >= 1");
}

EngineConfig apply_mode(EngineConfig base, AblationMode mode) {
  switch (mode) {
    case AblationMode::Baseline:
      base.members = 1;
      base.incremental = false;
      base.drift = DriftMode::Disabled;
      base.predict_votes = 1;
      break;
    case AblationMode::VaePlusPlus:
      base.members = 1;
      base.incremental = true;
      base.drift = DriftMode::Disabled;
      base.predict_votes = 1;
      break;
    case AblationMode::VaePlusPlusEs:
      base.incremental = true;
      base.drift = DriftMode::Disabled;
      break;
    case AblationMode::OneDd:
      base.incremental = true;
      base.drift = DriftMode::Single;
      base.drift_votes = 1;
      break;
    case AblationMode::Esdd:
      base.incremental = true;
      base.drift = DriftMode::Ensemble;
      break;
  }
  return base;
}

double adaptive_threshold(std::span<const double> losses) {
  if (losses.empty()) throw ContractError("adaptive threshold of an empty loss set");
  const double n = static_cast<double>(losses.size());
  const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  double ss = 0.0;
  for (double l : losses) ss += (l - mean) * (l - mean);
  return mean + std::sqrt(ss / n);
}

double fixed_percentile_threshold(std::span<const double> losses, double b) {
  if (losses.empty()) throw ContractError("percentile of an empty loss set");
  if (!(b > 0.0 && b < 100.0)) throw ContractError("percentile must be in (0, 100)");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = b / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

int member_predict(double score, double threshold) { return score > threshold ? 1 : 0; }

int predict_vote(std::span<const int> member_predictions, std::size_t votes) {
  const auto positives = std::count(member_predictions.begin(), member_predictions.end(), 1);
  return static_cast<std::size_t>(positives) >= votes ? 1 : 0;
}

bool drift_vote(std::span<const drift::Flag> member_flags, std::size_t votes) {
  const auto alarms = std::count(member_flags.begin(), member_flags.end(), drift::Flag::Alarm);
  return static_cast<std::size_t>(alarms) >= votes;
}

Engine::Engine(EngineConfig config, vae::VaeConfig model_config, std::span<const Vector> pretrain,
               std::uint64_t seed)
    : config_(std::move(config)), model_config_(std::move(model_config)) {
  config_.validate();
  model_config_.validate();
  if (pretrain.size() < config_.drift_window_max) {
    throw ConfigError("pretraining set has " + std::to_string(pretrain.size()) +
                      " instances; at least " + std::to_string(config_.drift_window_max) + " required");
  }
  for (const auto& x : pretrain) {
    if (static_cast<std::size_t>(x.size()) != model_config_.input_dim) {
      throw ConfigError("pretraining instance dimension does not match model.input_dim");
    }
  }

  mov_train_ = SlidingWindow<Vector>(config_.train_window);
  members_.reserve(config_.members);
  std::size_t widest_drift_window = 0;
  for (std::size_t i = 0; i < config_.members; ++i) {
    Rng rng(mix_seed(seed, i));
    std::uniform_int_distribution<std::size_t> train_dist(
        config_.train_window - config_.train_window_spread + 1, config_.train_window);
    std::uniform_int_distribution<std::size_t> drift_dist(config_.drift_window_min,
                                                          config_.drift_window_max);
    const std::size_t train_window = train_dist(rng);
    const std::size_t drift_window = drift_dist(rng);
    vae::Vae model(model_config_, rng);
    Member m{i, std::move(model), train_window, drift_window, 0.0, std::nullopt, std::move(rng), 0};
    m.model.train_epochs(pretrain, m.rng);
    fit_threshold(m, pretrain);

    const bool has_detector = config_.drift == DriftMode::Ensemble ||
                              (config_.drift == DriftMode::Single && i == 0);
    if (has_detector) {
      m.detector.emplace(drift_window, config_.test);
      widest_drift_window = std::max(widest_drift_window, drift_window);
      if (config_.reference == ReferenceSource::Pretrain) {
        m.detector->seed_reference(pretrain.last(drift_window), m.model, m.model_version);
      }
    }
    members_.push_back(std::move(m));
  }
  warn_buffer_ = SlidingWindow<Vector>(widest_drift_window > 0 ? widest_drift_window : config_.drift_window_max);
}

double Engine::threshold_for(std::span<const double> losses) const {
  return config_.threshold == ThresholdMode::Adaptive
             ? adaptive_threshold(losses)
             : fixed_percentile_threshold(losses, config_.percentile);
}

void Engine::fit_threshold(Member& m, std::span<const Vector> data) {
  const auto losses = losses_of(m.model, data);
  m.threshold = threshold_for(losses);
}

StepOutput Engine::step(const Vector& x) {
  const auto start = Clock::now();
  const double train_before = stats_.incremental_seconds;
  const double drift_before = stats_.drift_seconds;

  ++t_;
  ++stats_.steps;
  mov_train_.push(x);

  StepOutput out;
  out.t = t_;
  out.member_predictions.reserve(members_.size());
  out.member_scores.reserve(members_.size());
  out.member_thresholds.reserve(members_.size());
  out.member_flags.reserve(members_.size());
  std::vector<double> margins;
  margins.reserve(members_.size());

  for (std::size_t i = 0; i < members_.size(); ++i) {
    Member& m = members_[i];
    const double score = m.model.score(x);
    const int pred = member_predict(score, m.threshold);
    out.member_scores.push_back(score);
    out.member_thresholds.push_back(m.threshold);
    out.member_predictions.push_back(pred);
    margins.push_back(score - m.threshold);

    drift::Flag flag = drift::Flag::None;
    if (m.detector) {
      flag = m.detector->step(x, score, m.model, m.model_version);
      if (flag != drift::Flag::None && !warn_trigger_) warn_trigger_ = t_;
      if (flag == drift::Flag::Alarm && !alarm_trigger_) alarm_trigger_ = t_;
    }
    out.member_flags.push_back(flag);

    if (maybe_incremental_train(i, t_)) ++out.trained_members;
  }

  warn_buffer_update(x, t_);

  out.prediction = predict_vote(out.member_predictions, config_.predict_votes);
  std::nth_element(margins.begin(), margins.begin() + static_cast<std::ptrdiff_t>(config_.predict_votes - 1),
                   margins.end(), std::greater<>());
  out.score = margins[config_.predict_votes - 1];

  if (config_.drift != DriftMode::Disabled) {
    std::vector<drift::Flag> votes;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (members_[i].detector) votes.push_back(out.member_flags[i]);
    }
    out.drift_alarm = drift_vote(votes, config_.drift_votes);
    if (out.drift_alarm) reset_on_alarm(t_);
  }

  stats_.stream_seconds += seconds_since(start) - (stats_.incremental_seconds - train_before) -
                           (stats_.drift_seconds - drift_before);
  return out;
}

bool Engine::maybe_incremental_train(std::size_t i, std::uint64_t t) {
  if (!config_.incremental) return false;
  Member& m = members_.at(i);
  if (t == 0 || t % m.train_window != 0 || mov_train_.size() < m.train_window) return false;

  const auto start = Clock::now();
  const auto data = mov_train_.last(m.train_window);
  m.model.train_epochs(data, m.rng);
  fit_threshold(m, data);
  ++m.model_version;
  ++stats_.incremental_trainings;
  stats_.training_steps.push_back(t);
  stats_.incremental_seconds += seconds_since(start);
  return true;
}

void Engine::warn_buffer_update(const Vector& x, std::uint64_t t) {
  if (!warn_trigger_) return;
  if (!alarm_trigger_) warn_buffer_.push(x);
  if (t - *warn_trigger_ > config_.expiry_time) {
    // No ensemble alarm within the expiry horizon: treat as a false warning.
    warn_buffer_.clear();
    warn_trigger_.reset();
    alarm_trigger_.reset();
  }
}

void Engine::reset_on_alarm(std::uint64_t t) {
  const auto start = Clock::now();
  std::vector<Vector> data;
  if (warn_buffer_.size() >= config_.min_retrain) {
    data = warn_buffer_.snapshot();
  } else {
    data = mov_train_.last(config_.min_retrain);
    ++stats_.fallback_retrains;
  }

  for (auto& m : members_) {
    m.model = vae::Vae(model_config_, m.rng);
    m.model.train_epochs(data, m.rng);
    if (!data.empty()) fit_threshold(m, data);
    ++m.model_version;
    if (m.detector) m.detector->reset();
  }
  mov_train_.clear();
  warn_buffer_.clear();
  warn_trigger_.reset();
  alarm_trigger_.reset();
  ++stats_.resets;
  stats_.alarm_steps.push_back(t);
  stats_.drift_seconds += seconds_since(start);
}

void Engine::set_triggers(std::optional<std::uint64_t> warn, std::optional<std::uint64_t> alarm) {
  warn_trigger_ = warn;
  alarm_trigger_ = alarm;
}

}  // namespace vaestream::ensemble
