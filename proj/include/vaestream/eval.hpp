#pragma once

// Prequential evaluation: fading-factor recall/specificity/G-mean and
// sliding-window PAUC/PROC, plus drift-delay accounting.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vaestream::eval {

inline constexpr double kDefaultFadingFactor = 0.99;
inline constexpr std::size_t kDefaultPaucWindow = 1000;
inline constexpr std::uint64_t kDefaultDriftHorizon = 2000;

/// Faded ratio S/B with S <- hit + alpha*S, B <- 1 + alpha*B per observation.
class FadingRate {
 public:
  explicit FadingRate(double alpha = kDefaultFadingFactor) : alpha_(alpha) {}

  void update(bool hit) {
    s_ = (hit ? 1.0 : 0.0) + alpha_ * s_;
    b_ = 1.0 + alpha_ * b_;
  }
  /// Undefined until the first observation.
  std::optional<double> value() const {
    if (b_ <= 0.0) return std::nullopt;
    return s_ / b_;
  }
  double numerator() const { return s_; }
  double denominator() const { return b_; }

 private:
  double alpha_;
  double s_ = 0.0;
  double b_ = 0.0;
};

/// Recall is updated on positives only, specificity on negatives only.
struct FadingState {
  FadingRate recall;
  FadingRate specificity;

  explicit FadingState(double alpha = kDefaultFadingFactor) : recall(alpha), specificity(alpha) {}
};

void prequential_update(FadingState& state, int y, int y_hat);

double gmean(double recall, double specificity);

/// Strict-indicator PAUC: fraction of (positive, negative) pairs with
/// s(pos) > s(neg); ties count 0. Computed from pooled mid-ranks.
/// Undefined without at least one positive and one negative.
std::optional<double> pauc(std::span<const double> scores, std::span<const int> labels);

/// ROC points (FPR, TPR) from sweeping the threshold over distinct scores,
/// from (0,0) to (1,1).
std::vector<std::pair<double, double>> proc_curve(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under a curve of (x, y) points sorted by x.
double trapezoid_area(const std::vector<std::pair<double, double>>& curve);

/// Trailing window of (score, label) with sorted per-class caches so PAUC is O(d) per step.
class ScoreWindow {
 public:
  explicit ScoreWindow(std::size_t capacity = kDefaultPaucWindow);

  void push(double score, int label);
  std::size_t size() const { return scores_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t positives() const { return pos_sorted_.size(); }
  std::size_t negatives() const { return neg_sorted_.size(); }

  std::optional<double> pauc() const;
  std::vector<std::pair<double, double>> proc() const;
  std::vector<double> scores() const;
  std::vector<int> labels() const;

 private:
  std::size_t capacity_;
  std::vector<double> scores_;  // ring buffer
  std::vector<int> labels_;
  std::size_t head_ = 0;
  std::vector<double> pos_sorted_;
  std::vector<double> neg_sorted_;
};

struct DriftDelayReport {
  std::vector<std::optional<std::uint64_t>> delays;  // per true drift; empty if missed
  std::size_t false_alarms = 0;
  std::size_t missed = 0;
};

/// Matches each alarm to the most recent true drift at or before it when the
/// gap is within `horizon`; other alarms are false. Drifts with no matched
/// alarm are missed. Delay is measured to the first matched alarm.
DriftDelayReport drift_delay(std::span<const std::uint64_t> alarms, std::span<const std::uint64_t> drifts,
                             std::uint64_t horizon = kDefaultDriftHorizon);

struct EvalConfig {
  double fading_factor = kDefaultFadingFactor;
  std::size_t pauc_window = kDefaultPaucWindow;
  std::uint64_t drift_horizon = kDefaultDriftHorizon;
  /// Whole-run G-mean (and other metrics): mean over all defined steps, or the final value.
  bool average_over_steps = true;

  bool operator==(const EvalConfig&) const = default;
};

struct TraceRecord {
  std::uint64_t t = 0;
  std::optional<int> y;
  int y_hat = 0;
  double score = 0.0;
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> gmean;
  std::optional<double> pauc;
  bool alarm = false;
};

using MetricsTrace = std::vector<TraceRecord>;

/// Consumes engine outputs in stream order and records one trace row per step.
class Evaluator {
 public:
  explicit Evaluator(EvalConfig config = {});

  /// `y` is absent for unlabelled streams; label-dependent metrics stay undefined.
  const TraceRecord& step(std::uint64_t t, std::optional<int> y, int y_hat, double score, bool alarm);

  const MetricsTrace& trace() const { return trace_; }
  MetricsTrace release() { return std::move(trace_); }

 private:
  EvalConfig config_;
  FadingState fading_;
  ScoreWindow window_;
  MetricsTrace trace_;
};

inline constexpr const char* kTraceHeader = "t,y,yhat,score,recall,specificity,gmean,pauc,alarm";

/// Shortest round-trip decimal representation.
std::string format_number(double v);

void write_trace_csv(std::ostream& out, const MetricsTrace& trace);

struct RunAverages {
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> gmean;
  std::optional<double> pauc;
};

/// Whole-run summaries of one trace (mean over defined steps, or final defined value).
RunAverages run_averages(const MetricsTrace& trace, bool average_over_steps = true);

}  // namespace vaestream::eval
