#include "vaestream/streams.hpp"

#include "vaestream/error.hpp"
#include "vaestream/seed.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace vaestream::streams {

namespace {

constexpr double kSeaBoundary = 7.0;
constexpr double kSeaMax = 10.0;
constexpr double kVibShift = 3.0;
constexpr double kVibAnomalyMean = 5.0;
constexpr double kCovertypeSpread = 0.08;
constexpr std::uint64_t kCovertypeLayoutSeed = 0x436f76657254797eULL;

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string to_string(Generator g) {
  switch (g) {
    case Generator::Sea:
      return "sea";
    case Generator::Circle:
      return "circle";
    case Generator::Sine:
      return "sine";
    case Generator::Vib:
      return "vib";
    case Generator::Covertype:
      return "covertype";
    case Generator::Csv:
      return "csv";
  }
  return "sea";
}

Generator parse_generator(const std::string& name) {
  if (name == "sea") return Generator::Sea;
  if (name == "circle") return Generator::Circle;
  if (name == "sine") return Generator::Sine;
  if (name == "vib") return Generator::Vib;
  if (name == "covertype") return Generator::Covertype;
  if (name == "csv") return Generator::Csv;
  throw ConfigError("unknown generator '" + name + "' (expected sea|circle|sine|vib|covertype|csv)");
}

std::string to_string(DriftKind k) {
  switch (k) {
    case DriftKind::Abrupt:
      return "abrupt";
    case DriftKind::Incremental:
      return "incremental";
    case DriftKind::Recurrent:
      return "recurrent";
  }
  return "abrupt";
}

DriftKind parse_drift_kind(const std::string& name) {
  if (name == "abrupt") return DriftKind::Abrupt;
  if (name == "incremental") return DriftKind::Incremental;
  if (name == "recurrent") return DriftKind::Recurrent;
  throw ConfigError("unknown drift kind '" + name + "' (expected abrupt|incremental|recurrent)");
}

std::vector<DriftEvent> default_schedule(Generator g) {
  switch (g) {
    case Generator::Sea:
      return {{10000, DriftKind::Recurrent, 1000}, {15000, DriftKind::Recurrent, 1000}};
    case Generator::Circle:
    case Generator::Sine:
    case Generator::Covertype:
      return {{10000, DriftKind::Abrupt, 1000}};
    case Generator::Vib:
      return {{10000, DriftKind::Incremental, 1000}};
    case Generator::Csv:
      return {};
  }
  return {};
}

std::vector<DriftEvent> StreamConfig::schedule() const {
  return drifts ? *drifts : default_schedule(generator);
}

std::size_t StreamConfig::dimension() const {
  switch (generator) {
    case Generator::Sea:
    case Generator::Circle:
    case Generator::Sine:
      return 2;
    case Generator::Vib:
      return 10;
    case Generator::Covertype:
      return kCovertypeDim;
    case Generator::Csv:
      return 0;
  }
  return 0;
}

void StreamConfig::validate() const {
  if (generator != Generator::Csv && length == 0) throw ConfigError("stream.length must be >= 1");
  if (!(anomaly_rate > 0.0 && anomaly_rate < 0.5)) throw ConfigError("stream.anomaly_rate must be in (0, 0.5)");
  if (pretrain_size == 0) throw ConfigError("stream.pretrain_size must be >= 1");
  if (generator == Generator::Csv && csv_path.empty()) throw ConfigError("stream.csv_path is required for csv streams");
  const auto events = schedule();
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (generator != Generator::Csv && events[i].time >= length) {
      throw ConfigError("stream.drifts[" + std::to_string(i) + "].time must be < stream.length");
    }
    if (i > 0 && events[i].time <= events[i - 1].time) {
      throw ConfigError("stream.drifts times must be strictly increasing");
    }
    if (events[i].kind == DriftKind::Incremental && events[i].duration == 0) {
      throw ConfigError("stream.drifts[" + std::to_string(i) + "].duration must be >= 1");
    }
  }
  for (const auto& s : scaling) {
    if (s.to <= s.from) throw ConfigError("stream.scaling segments need from < to");
    if (!std::isfinite(s.factor)) throw ConfigError("stream.scaling factor must be finite");
  }
}

double concept_level(const std::vector<DriftEvent>& schedule, std::uint64_t t) {
  double level = 0.0;
  for (const auto& e : schedule) {
    if (t < e.time) break;
    if (e.kind == DriftKind::Incremental) {
      const double progress =
          std::min(1.0, static_cast<double>(t - e.time) / static_cast<double>(e.duration));
      const double target = 1.0 - level;
      level += (target - level) * progress;
      if (progress < 1.0) break;  // still ramping; later events have not started
    } else {
      level = 1.0 - level;
    }
  }
  return level;
}

int sea_class(double x1, double x2, bool flipped) {
  const bool above = x1 + x2 > kSeaBoundary;
  return (above != flipped) ? 0 : 1;
}

int circle_class(double x1, double x2, bool flipped) {
  const bool inside = std::hypot(x1 - kCircleCenterX, x2 - kCircleCenterY) < kCircleRadius;
  return (inside != flipped) ? 0 : 1;
}

int sine_class(double x1, double x2, bool flipped) {
  const bool above = x2 > std::sin(x1);
  return (above != flipped) ? 0 : 1;
}

bool sea_on_boundary(double x1, double x2) { return x1 + x2 == kSeaBoundary; }

bool circle_on_boundary(double x1, double x2) {
  return std::hypot(x1 - kCircleCenterX, x2 - kCircleCenterY) == kCircleRadius;
}

bool sine_on_boundary(double x1, double x2) { return x2 == std::sin(x1); }

double vib_normal_mean(double level) { return kVibShift * level; }

Vector covertype_center(std::size_t type) {
  if (type >= kCovertypeTypes) throw ContractError("cover type out of range");
  Rng layout(kCovertypeLayoutSeed);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  Vector center(static_cast<Eigen::Index>(kCovertypeDim));
  for (std::size_t t = 0; t <= type; ++t) {
    for (Eigen::Index i = 0; i < center.size(); ++i) center(i) = unit(layout);
  }
  return center;
}

std::vector<std::size_t> covertype_normal_types(bool flipped) {
  if (flipped) return {0, 1, 2, 3};
  return {0, 1};
}

SyntheticStream::SyntheticStream(StreamConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {
  if (config_.generator == Generator::Csv) throw ConfigError("csv streams are loaded, not generated");
  config_.validate();
  schedule_ = config_.schedule();
}

Vector SyntheticStream::draw_region(int label, bool flipped) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector x(2);
  switch (config_.generator) {
    case Generator::Sea:
      for (;;) {
        x << kSeaMax * unit(rng_), kSeaMax * unit(rng_);
        if (!sea_on_boundary(x(0), x(1)) && sea_class(x(0), x(1), flipped) == label) return x;
      }
    case Generator::Circle:
      for (;;) {
        x << unit(rng_), unit(rng_);
        if (!circle_on_boundary(x(0), x(1)) && circle_class(x(0), x(1), flipped) == label) return x;
      }
    case Generator::Sine:
      for (;;) {
        x << std::numbers::pi * unit(rng_), -1.0 + 2.0 * unit(rng_);
        if (!sine_on_boundary(x(0), x(1)) && sine_class(x(0), x(1), flipped) == label) return x;
      }
    default:
      throw ContractError("draw_region called for a non-region generator");
  }
}

Instance SyntheticStream::draw(int label, double level) {
  Instance inst;
  inst.label = label;
  switch (config_.generator) {
    case Generator::Sea:
    case Generator::Circle:
    case Generator::Sine: {
      bool flipped = level >= 1.0;
      if (level > 0.0 && level < 1.0) flipped = std::bernoulli_distribution(level)(rng_);
      inst.features = draw_region(label, flipped);
      break;
    }
    case Generator::Vib: {
      std::normal_distribution<double> normal(label == 1 ? kVibAnomalyMean : vib_normal_mean(level), 1.0);
      inst.features.resize(10);
      for (Eigen::Index i = 0; i < 10; ++i) inst.features(i) = normal(rng_);
      break;
    }
    case Generator::Covertype: {
      bool flipped = level >= 1.0;
      if (level > 0.0 && level < 1.0) flipped = std::bernoulli_distribution(level)(rng_);
      const auto normal_types = covertype_normal_types(flipped);
      std::vector<std::size_t> types;
      for (std::size_t t = 0; t < kCovertypeTypes; ++t) {
        const bool is_normal = std::find(normal_types.begin(), normal_types.end(), t) != normal_types.end();
        if (is_normal == (label == 0)) types.push_back(t);
      }
      const std::size_t type = types[std::uniform_int_distribution<std::size_t>(0, types.size() - 1)(rng_)];
      std::normal_distribution<double> noise(0.0, kCovertypeSpread);
      inst.features = covertype_center(type);
      for (Eigen::Index i = 0; i < inst.features.size(); ++i) inst.features(i) += noise(rng_);
      break;
    }
    case Generator::Csv:
      throw ContractError("csv streams are loaded, not generated");
  }
  return inst;
}

Instance SyntheticStream::next() {
  if (done()) throw ContractError("stream exhausted");
  const std::uint64_t t = next_index_++;
  const int label = std::bernoulli_distribution(config_.anomaly_rate)(rng_) ? 1 : 0;
  Instance inst = draw(label, concept_level(schedule_, t));
  inst.index = t;
  return inst;
}

std::vector<Instance> generate(const StreamConfig& config, std::uint64_t seed) {
  SyntheticStream stream(config, seed);
  std::vector<Instance> out;
  out.reserve(config.length);
  while (!stream.done()) out.push_back(stream.next());
  apply_scaling(out, config.scaling);
  return out;
}

NormStats compute_norm_stats(const std::vector<Instance>& data) {
  if (data.empty()) throw ContractError("normalisation statistics of an empty set");
  NormStats s{data.front().features, data.front().features, {}};
  for (const auto& inst : data) {
    s.min = s.min.cwiseMin(inst.features);
    s.max = s.max.cwiseMax(inst.features);
  }
  for (Eigen::Index i = 0; i < s.min.size(); ++i) {
    if (s.min(i) == s.max(i)) s.degenerate.push_back(static_cast<std::size_t>(i));
  }
  return s;
}

Vector normalize(const Vector& x, const NormStats& stats) {
  if (x.size() != stats.min.size()) throw ConfigError("instance dimension does not match normaliser");
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double range = stats.max(i) - stats.min(i);
    out(i) = range > 0.0 ? std::clamp((x(i) - stats.min(i)) / range, 0.0, 1.0) : 0.5;
  }
  return out;
}

PretrainSample pretrain_sample(const StreamConfig& config, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("pretraining sample size must be >= 1");
  SyntheticStream stream(config, seed);
  PretrainSample out;
  out.instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst = stream.draw(0, 0.0);
    inst.index = i;
    out.instances.push_back(std::move(inst));
  }
  out.stats = compute_norm_stats(out.instances);
  return out;
}

CsvData load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  CsvData data;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file (header row required)");
  auto header = split_commas(line);
  if (header.empty()) throw ParseError(path + ": empty header");
  data.labelled = header.back() == "label";
  const std::size_t width = header.size();
  const std::size_t features = data.labelled ? width - 1 : width;
  if (features == 0) throw ParseError(path + ": no feature columns");
  data.feature_names.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(features));

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != width) {
      throw ParseError(path + ":" + std::to_string(row) + ": expected " + std::to_string(width) +
                       " columns, found " + std::to_string(cells.size()));
    }
    Instance inst;
    inst.features.resize(static_cast<Eigen::Index>(features));
    for (std::size_t c = 0; c < width; ++c) {
      double value = 0.0;
      const auto& cell = cells[c];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        throw ParseError(path + ":" + std::to_string(row) + ":" + std::to_string(c + 1) +
                         ": non-numeric value '" + cell + "' in column '" + header[c] + "'");
      }
      if (c < features) {
        inst.features(static_cast<Eigen::Index>(c)) = value;
      } else {
        if (value != 0.0 && value != 1.0) {
          throw ParseError(path + ":" + std::to_string(row) + ":" + std::to_string(c + 1) +
                           ": label must be 0 or 1");
        }
        inst.label = static_cast<int>(value);
      }
    }
    inst.index = data.instances.size();
    data.instances.push_back(std::move(inst));
  }
  return data;
}

void apply_scaling(std::vector<Instance>& data, const std::vector<FeatureScaling>& scaling) {
  for (auto& inst : data) {
    for (const auto& s : scaling) {
      if (inst.index >= s.from && inst.index < s.to) inst.features *= s.factor;
    }
  }
}

}  // namespace vaestream::streams
