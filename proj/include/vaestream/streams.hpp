#pragma once

// Synthetic drifting streams, a CSV loader and min-max normalisation.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vaestream::streams {

using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// One stream element. `label` (0 normal, 1 anomalous) is for evaluation only.
struct Instance {
  Vector features;
  int label = 0;
  std::uint64_t index = 0;  // 0-based position in the stream
};

enum class Generator { Sea, Circle, Sine, Vib, Covertype, Csv };
enum class DriftKind { Abrupt, Incremental, Recurrent };

std::string to_string(Generator g);
Generator parse_generator(const std::string& name);
std::string to_string(DriftKind k);
DriftKind parse_drift_kind(const std::string& name);

struct DriftEvent {
  std::uint64_t time = 0;
  DriftKind kind = DriftKind::Abrupt;
  std::uint64_t duration = 1000;  // ramp length for incremental drift

  bool operator==(const DriftEvent&) const = default;
};

/// Multiplies every feature of instances with index in [from, to) by `factor`.
struct FeatureScaling {
  std::uint64_t from = 0;
  std::uint64_t to = 0;
  double factor = 1.0;

  bool operator==(const FeatureScaling&) const = default;
};

struct StreamConfig {
  Generator generator = Generator::Sea;
  std::uint64_t length = 20000;
  double anomaly_rate = 0.01;
  /// Unset means the generator's standard schedule; an empty list is a stationary stream.
  std::optional<std::vector<DriftEvent>> drifts;
  std::size_t pretrain_size = 2000;
  std::string csv_path;
  std::vector<FeatureScaling> scaling;

  std::vector<DriftEvent> schedule() const;
  std::size_t dimension() const;  // not defined for CSV streams
  /// Throws ConfigError for out-of-range values.
  void validate() const;

  bool operator==(const StreamConfig&) const = default;
};

/// Standard schedule per generator (Sea: recurrent at 10000 and 15000, Circle
/// and Sine: abrupt at 10000, Vib: incremental over 10000..11000, Covertype:
/// abrupt at 10000).
std::vector<DriftEvent> default_schedule(Generator g);

/// Drift level in [0, 1] at stream index t: 0 is the original concept, 1 the
/// drifted one. Abrupt and recurrent events toggle it; incremental events
/// ramp linearly towards the opposite level over `duration` steps.
double concept_level(const std::vector<DriftEvent>& schedule, std::uint64_t t);

/// Class-region rules, `flipped` selecting the post-drift concept.
int sea_class(double x1, double x2, bool flipped);
int circle_class(double x1, double x2, bool flipped);
int sine_class(double x1, double x2, bool flipped);
/// Boundary points that the generators resample.
bool sea_on_boundary(double x1, double x2);
bool circle_on_boundary(double x1, double x2);
bool sine_on_boundary(double x1, double x2);

inline constexpr double kCircleCenterX = 0.4;
inline constexpr double kCircleCenterY = 0.5;
inline constexpr double kCircleRadius = 0.2;
inline constexpr std::size_t kCovertypeDim = 10;
inline constexpr std::size_t kCovertypeTypes = 7;

/// Normal-class mean of the Vib stream at drift level `level`.
double vib_normal_mean(double level);

/// Cluster centre of cover type `type` (0-based) in the Covertype surrogate.
Vector covertype_center(std::size_t type);
/// Normal cover types for the original (false) or drifted (true) concept.
std::vector<std::size_t> covertype_normal_types(bool flipped);

/// Sequential synthetic generator.
class SyntheticStream {
 public:
  SyntheticStream(StreamConfig config, std::uint64_t seed);

  bool done() const { return next_index_ >= config_.length; }
  Instance next();
  /// Draws one instance of class `label` under drift level `level`.
  Instance draw(int label, double level);

 private:
  Vector draw_region(int label, bool flipped);

  StreamConfig config_;
  std::vector<DriftEvent> schedule_;
  Rng rng_;
  std::uint64_t next_index_ = 0;
};

/// Whole stream materialised in order.
std::vector<Instance> generate(const StreamConfig& config, std::uint64_t seed);

struct NormStats {
  Vector min;
  Vector max;
  std::vector<std::size_t> degenerate;  // features with min == max

  bool operator==(const NormStats&) const = default;
};

NormStats compute_norm_stats(const std::vector<Instance>& data);

/// Per-feature min-max scaling clamped to [0, 1]; degenerate features map to 0.5.
Vector normalize(const Vector& x, const NormStats& stats);

struct PretrainSample {
  std::vector<Instance> instances;
  NormStats stats;
};

/// `n` normal-class instances from the pre-drift concept plus their min/max.
PretrainSample pretrain_sample(const StreamConfig& config, std::size_t n, std::uint64_t seed);

struct CsvData {
  std::vector<std::string> feature_names;
  std::vector<Instance> instances;
  bool labelled = false;
};

/// Reads a header-first, comma-separated file. An optional final column named
/// "label" holds 0/1 labels. Throws ParseError with row/column on bad cells
/// and on ragged rows.
CsvData load_csv(const std::string& path);

/// Applies the configured segment scaling in place.
void apply_scaling(std::vector<Instance>& data, const std::vector<FeatureScaling>& scaling);

}  // namespace vaestream::streams
