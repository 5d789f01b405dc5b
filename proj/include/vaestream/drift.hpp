#pragma once

// Unsupervised drift detection over reconstruction losses: a tie-aware
// Mann-Whitney U test between a frozen reference window and a moving window.

#include "vaestream/vae.hpp"
#include "vaestream/windows.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vaestream::drift {

using nn::Matrix;
using nn::Vector;

enum class Flag { None, Warn, Alarm };

const char* to_string(Flag flag);

struct TestConstants {
  double p_warn = 0.01;
  double p_alarm = 0.001;

  /// Requires 0 < p_alarm < p_warn < 1.
  void validate() const;
  bool operator==(const TestConstants&) const = default;
};

/// Null-hypothesis mean and (tie-corrected) standard deviation of U.
struct NullMoments {
  double mean = 0.0;
  double std_dev = 0.0;
};

struct UStatistics {
  double u_ref = 0.0;
  double u_mov = 0.0;
};

struct TestResult {
  UStatistics u;
  double z = 0.0;
  double p = 1.0;
  Flag flag = Flag::None;
};

/// 1-based ranks; tied values share the mean of the positions they occupy.
std::vector<double> ranks_with_ties(std::span<const double> values);

/// Sum over groups of tied values of (t^3 - t), t the group size.
double tie_term(std::span<const double> pooled);

/// U_ref = n_ref*n_mov + n_ref(n_ref+1)/2 - RankSum(ref), and symmetrically
/// for U_mov, with ranks taken over the pooled sample.
UStatistics mann_whitney_u(std::span<const double> ref, std::span<const double> mov);

NullMoments null_moments(std::size_t n_ref, std::size_t n_mov, double tie_term);

/// (u_min - mean) / std_dev; zero when std_dev is zero.
double z_value(double u_min, const NullMoments& moments);

/// Two-sided normal approximation 2 * Phi(-|z|), kept inside (0, 1].
double p_value(double z);

/// Alarm if p < p_alarm, otherwise warn if p < p_warn, otherwise none.
Flag evaluate_flags(double p, const TestConstants& constants);

/// Full pipeline on two loss samples using the pure functions above.
TestResult run_test(std::span<const double> ref, std::span<const double> mov,
                    const TestConstants& constants);

/// Per-member detector state. Losses are cached per model version; a new
/// version triggers a rescore of every buffered instance so both windows are
/// always compared under the same model.
class DriftDetector {
 public:
  DriftDetector() = default;
  DriftDetector(std::size_t window_size, TestConstants constants);

  std::size_t window_size() const { return window_size_; }
  const TestConstants& constants() const { return constants_; }

  /// Appends `x` (whose loss under `model` is `loss`) and, once both windows
  /// are full, runs the test. Returns the resulting flag.
  Flag step(const Vector& x, double loss, const vae::Vae& model, std::uint64_t model_version);

  /// Fills the reference window from `xs` (first window_size items).
  void seed_reference(std::span<const Vector> xs, const vae::Vae& model, std::uint64_t model_version);

  /// Empties both windows and clears the flag; the reference refills from new data.
  void reset();

  Flag flag() const { return flag_; }
  std::optional<TestResult> last_result() const { return last_; }
  bool reference_full() const { return ref_x_.frozen(); }
  std::size_t moving_size() const { return mov_x_.size(); }
  std::size_t reference_size() const { return ref_x_.size(); }

  std::vector<double> reference_losses() const { return ref_loss_; }
  std::vector<double> moving_losses() const { return mov_loss_.snapshot(); }

 private:
  void rescore(const vae::Vae& model, std::uint64_t model_version);
  TestResult test_sorted() const;

  std::size_t window_size_ = 0;
  TestConstants constants_;
  FrozenWindow<Vector> ref_x_;
  SlidingWindow<Vector> mov_x_;
  std::vector<double> ref_loss_;
  SlidingWindow<double> mov_loss_;
  std::vector<double> ref_sorted_;
  std::vector<double> mov_sorted_;
  std::optional<std::uint64_t> scored_version_;
  Flag flag_ = Flag::None;
  std::optional<TestResult> last_;
};

}  // namespace vaestream::drift
