#include "vaestream/experiment.hpp"

#include "vaestream/error.hpp"
#include "vaestream/seed.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace vaestream::experiment {

namespace fs = std::filesystem;
using streams::Generator;

namespace {

const char* kMetricNames[] = {"recall", "specificity", "gmean", "pauc"};

std::optional<double> metric_of(const eval::TraceRecord& r, std::size_t m) {
  switch (m) {
    case 0:
      return r.recall;
    case 1:
      return r.specificity;
    case 2:
      return r.gmean;
    default:
      return r.pauc;
  }
}

std::optional<double> metric_of(const eval::RunAverages& a, std::size_t m) {
  switch (m) {
    case 0:
      return a.recall;
    case 1:
      return a.specificity;
    case 2:
      return a.gmean;
    default:
      return a.pauc;
  }
}

/// Reads one JSON object, tracking which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError(field(key) + ": must be non-negative");
      }
    }
    try {
      out = j_.at(key).template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key) + ": wrong type (" + e.what() + ")");
    }
  }

  /// Reads a string key and converts it with `parse`, which may throw ConfigError.
  template <typename T, typename Parse>
  void read_enum(const std::string& key, T& out, Parse parse) {
    if (!j_.contains(key)) {
      seen_.insert(key);
      return;
    }
    std::string name;
    read(key, name);
    try {
      out = parse(name);
    } catch (const ConfigError& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  const Json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string loss_name(nn::LossKind k) { return k == nn::LossKind::SquaredError ? "se" : "bce"; }

nn::LossKind parse_loss(const std::string& s) {
  if (s == "bce") return nn::LossKind::BinaryCrossEntropy;
  if (s == "se") return nn::LossKind::SquaredError;
  throw ConfigError("unknown loss '" + s + "' (expected bce|se)");
}

std::string threshold_name(ensemble::ThresholdMode m) {
  return m == ensemble::ThresholdMode::Percentile ? "percentile" : "adaptive";
}

ensemble::ThresholdMode parse_threshold(const std::string& s) {
  if (s == "adaptive") return ensemble::ThresholdMode::Adaptive;
  if (s == "percentile") return ensemble::ThresholdMode::Percentile;
  throw ConfigError("unknown threshold mode '" + s + "' (expected adaptive|percentile)");
}

std::string reference_name(ensemble::ReferenceSource r) {
  return r == ensemble::ReferenceSource::Pretrain ? "pretrain" : "stream";
}

ensemble::ReferenceSource parse_reference(const std::string& s) {
  if (s == "stream") return ensemble::ReferenceSource::Stream;
  if (s == "pretrain") return ensemble::ReferenceSource::Pretrain;
  throw ConfigError("unknown reference source '" + s + "' (expected stream|pretrain)");
}

bool parse_average(const std::string& s) {
  if (s == "steps") return true;
  if (s == "final") return false;
  throw ConfigError("unknown averaging '" + s + "' (expected steps|final)");
}

void parse_stream(const Json& j, streams::StreamConfig& s) {
  ObjectReader r(j, "stream");
  r.read_enum("generator", s.generator, streams::parse_generator);
  r.read("length", s.length);
  r.read("anomaly_rate", s.anomaly_rate);
  r.read("pretrain_size", s.pretrain_size);
  r.read("csv_path", s.csv_path);
  if (const Json* drifts = r.child("drifts")) {
    if (!drifts->is_array()) throw ConfigError("stream.drifts: expected an array");
    std::vector<streams::DriftEvent> events;
    for (std::size_t i = 0; i < drifts->size(); ++i) {
      streams::DriftEvent e;
      ObjectReader er((*drifts)[i], "stream.drifts[" + std::to_string(i) + "]");
      er.read("time", e.time);
      er.read_enum("kind", e.kind, streams::parse_drift_kind);
      er.read("duration", e.duration);
      er.finish();
      events.push_back(e);
    }
    s.drifts = std::move(events);
  }
  if (const Json* scaling = r.child("scaling")) {
    if (!scaling->is_array()) throw ConfigError("stream.scaling: expected an array");
    s.scaling.clear();
    for (std::size_t i = 0; i < scaling->size(); ++i) {
      streams::FeatureScaling f;
      ObjectReader fr((*scaling)[i], "stream.scaling[" + std::to_string(i) + "]");
      fr.read("from", f.from);
      fr.read("to", f.to);
      fr.read("factor", f.factor);
      fr.finish();
      s.scaling.push_back(f);
    }
  }
  r.finish();
}

void parse_model(const Json& j, vae::VaeConfig& m) {
  ObjectReader r(j, "model");
  r.read("hidden", m.hidden);
  r.read("latent_dim", m.latent_dim);
  r.read("beta", m.beta);
  r.read_enum("loss", m.loss, parse_loss);
  r.read("epochs", m.epochs);
  r.read("batch_size", m.batch_size);
  r.read("learning_rate", m.adam.learning_rate);
  r.read("adam_beta1", m.adam.beta1);
  r.read("adam_beta2", m.adam.beta2);
  r.read("adam_epsilon", m.adam.epsilon);
  r.read("leaky_slope", m.leaky_slope);
  r.read("input_noise", m.input_noise);
  r.finish();
}

void parse_engine(const Json& j, ensemble::EngineConfig& e) {
  ObjectReader r(j, "engine");
  r.read("members", e.members);
  r.read("train_window", e.train_window);
  r.read("train_window_spread", e.train_window_spread);
  r.read("drift_window_min", e.drift_window_min);
  r.read("drift_window_max", e.drift_window_max);
  r.read("predict_votes", e.predict_votes);
  r.read("drift_votes", e.drift_votes);
  r.read("p_warn", e.test.p_warn);
  r.read("p_alarm", e.test.p_alarm);
  r.read("expiry_time", e.expiry_time);
  r.read_enum("threshold", e.threshold, parse_threshold);
  r.read("percentile", e.percentile);
  r.read_enum("reference", e.reference, parse_reference);
  r.read("min_retrain", e.min_retrain);
  r.finish();
}

void parse_evaluation(const Json& j, eval::EvalConfig& c) {
  ObjectReader r(j, "evaluation");
  r.read("fading_factor", c.fading_factor);
  r.read("pauc_window", c.pauc_window);
  r.read("drift_horizon", c.drift_horizon);
  r.read_enum("average", c.average_over_steps, parse_average);
  r.finish();
}

template <typename T>
Json series_json(const std::vector<std::optional<T>>& v) {
  Json arr = Json::array();
  for (const auto& x : v) arr.push_back(x ? Json(*x) : Json(nullptr));
  return arr;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << content;
  out.close();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::string trace_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trace_rep%02zu.csv", r);
  return buf;
}

}  // namespace

vae::VaeConfig default_model(Generator g) {
  vae::VaeConfig m;
  switch (g) {
    case Generator::Sea:
      m.hidden = {64, 8};
      m.epochs = 10;
      break;
    case Generator::Sine:
      m.hidden = {8};
      m.epochs = 10;
      break;
    case Generator::Circle:
      m.hidden = {8};
      m.epochs = 50;
      break;
    case Generator::Vib:
      m.hidden = {8};
      m.epochs = 1;
      break;
    case Generator::Covertype:
      m.hidden = {64};
      m.epochs = 50;
      m.loss = nn::LossKind::SquaredError;
      break;
    case Generator::Csv:
      m.hidden = {64, 8};
      m.epochs = 10;
      break;
  }
  if (g != Generator::Csv) m.input_dim = [g] {
      streams::StreamConfig s;
      s.generator = g;
      return s.dimension();
    }();
  return m;
}

ExperimentConfig default_config(Generator g) {
  ExperimentConfig c;
  c.stream.generator = g;
  c.model = default_model(g);
  return c;
}

void ExperimentConfig::validate() const {
  stream.validate();
  auto tagged = [](const std::string& section, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      throw ConfigError(msg.rfind(section, 0) == 0 ? msg : section + ": " + msg);
    }
  };
  tagged("model", [&] { model.validate(); });
  tagged("engine", [&] { effective_engine().validate(); });
  if (!(evaluation.fading_factor > 0.0 && evaluation.fading_factor < 1.0)) {
    throw ConfigError("evaluation.fading_factor: must be in (0, 1)");
  }
  if (evaluation.pauc_window == 0) throw ConfigError("evaluation.pauc_window: must be >= 1");
  if (repetitions == 0) throw ConfigError("repetitions: must be >= 1");
  if (stream.pretrain_size < engine.drift_window_max) {
    throw ConfigError("stream.pretrain_size: must be >= engine.drift_window_max");
  }
}

ensemble::EngineConfig ExperimentConfig::effective_engine() const { return ensemble::apply_mode(engine, mode); }

ExperimentConfig parse_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  Generator g = Generator::Sea;
  if (j.contains("stream") && j.at("stream").is_object() && j.at("stream").contains("generator")) {
    const auto& name = j.at("stream").at("generator");
    if (!name.is_string()) throw ConfigError("stream.generator: expected a string");
    try {
      g = streams::parse_generator(name.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("stream.generator: ") + e.what());
    }
  }
  ExperimentConfig c = default_config(g);

  ObjectReader r(j, "");
  if (const Json* s = r.child("stream")) parse_stream(*s, c.stream);
  if (const Json* m = r.child("model")) parse_model(*m, c.model);
  if (const Json* e = r.child("engine")) parse_engine(*e, c.engine);
  if (const Json* e = r.child("evaluation")) parse_evaluation(*e, c.evaluation);
  r.read_enum("mode", c.mode, ensemble::parse_ablation_mode);
  r.read("repetitions", c.repetitions);
  r.read("seed", c.seed);
  r.read("output_dir", c.output_dir);
  r.finish();
  if (c.stream.generator != Generator::Csv) c.model.input_dim = c.stream.dimension();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  ExperimentConfig c = parse_config(j);
  if (c.stream.generator == Generator::Csv && !c.stream.csv_path.empty() &&
      fs::path(c.stream.csv_path).is_relative()) {
    c.stream.csv_path = (path.parent_path() / c.stream.csv_path).string();
  }
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json stream = {
      {"generator", streams::to_string(c.stream.generator)},
      {"length", c.stream.length},
      {"anomaly_rate", c.stream.anomaly_rate},
      {"pretrain_size", c.stream.pretrain_size},
      {"csv_path", c.stream.csv_path},
  };
  if (c.stream.drifts) {
    Json drifts = Json::array();
    for (const auto& e : *c.stream.drifts) {
      drifts.push_back({{"time", e.time}, {"kind", streams::to_string(e.kind)}, {"duration", e.duration}});
    }
    stream["drifts"] = drifts;
  }
  Json scaling = Json::array();
  for (const auto& f : c.stream.scaling) scaling.push_back({{"from", f.from}, {"to", f.to}, {"factor", f.factor}});
  stream["scaling"] = scaling;

  const auto& m = c.model;
  Json model = {
      {"hidden", m.hidden},
      {"latent_dim", m.latent_dim},
      {"beta", m.beta},
      {"loss", loss_name(m.loss)},
      {"epochs", m.epochs},
      {"batch_size", m.batch_size},
      {"learning_rate", m.adam.learning_rate},
      {"adam_beta1", m.adam.beta1},
      {"adam_beta2", m.adam.beta2},
      {"adam_epsilon", m.adam.epsilon},
      {"leaky_slope", m.leaky_slope},
      {"input_noise", m.input_noise},
  };

  const auto& e = c.engine;
  Json engine = {
      {"members", e.members},
      {"train_window", e.train_window},
      {"train_window_spread", e.train_window_spread},
      {"drift_window_min", e.drift_window_min},
      {"drift_window_max", e.drift_window_max},
      {"predict_votes", e.predict_votes},
      {"drift_votes", e.drift_votes},
      {"p_warn", e.test.p_warn},
      {"p_alarm", e.test.p_alarm},
      {"expiry_time", e.expiry_time},
      {"threshold", threshold_name(e.threshold)},
      {"percentile", e.percentile},
      {"reference", reference_name(e.reference)},
      {"min_retrain", e.min_retrain},
  };

  Json evaluation = {
      {"fading_factor", c.evaluation.fading_factor},
      {"pauc_window", c.evaluation.pauc_window},
      {"drift_horizon", c.evaluation.drift_horizon},
      {"average", c.evaluation.average_over_steps ? "steps" : "final"},
  };

  return Json{{"stream", stream},   {"model", model},           {"engine", engine},
              {"mode", ensemble::to_string(c.mode)}, {"evaluation", evaluation},
              {"repetitions", c.repetitions},       {"seed", c.seed}, {"output_dir", c.output_dir}};
}

std::string config_hash(const ExperimentConfig& config) {
  Json j = to_json(config);
  j.erase("output_dir");
  const std::string canonical = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t repetition_seed(std::uint64_t master, std::size_t r) { return mix_seed(master, r); }

PreparedStream prepare_stream(const ExperimentConfig& config, std::uint64_t seed) {
  PreparedStream out;
  const auto& sc = config.stream;
  std::vector<streams::Instance> pretrain;
  std::vector<streams::Instance> stream;

  if (sc.generator == Generator::Csv) {
    streams::CsvData data = streams::load_csv(sc.csv_path);
    out.labelled = data.labelled;
    if (data.instances.size() <= sc.pretrain_size) {
      throw ConfigError("stream.pretrain_size: " + sc.csv_path + " has only " +
                        std::to_string(data.instances.size()) + " rows");
    }
    const auto split = data.instances.begin() + static_cast<std::ptrdiff_t>(sc.pretrain_size);
    for (auto it = data.instances.begin(); it != split; ++it) {
      if (!data.labelled || it->label == 0) pretrain.push_back(*it);
    }
    stream.assign(split, data.instances.end());
    std::uint64_t index = 0;
    for (auto& inst : stream) inst.index = index++;
    streams::apply_scaling(stream, sc.scaling);
    if (pretrain.size() < config.engine.drift_window_max) {
      throw ConfigError("stream.pretrain_size: too few normal rows in the pretraining prefix of " + sc.csv_path);
    }
  } else {
    stream = streams::generate(sc, mix_seed(seed, 0));
    pretrain = streams::pretrain_sample(sc, sc.pretrain_size, mix_seed(seed, 1)).instances;
    for (const auto& e : sc.schedule()) out.drift_times.push_back(e.time);
  }

  const streams::NormStats stats = streams::compute_norm_stats(pretrain);
  out.pretrain.reserve(pretrain.size());
  for (const auto& inst : pretrain) out.pretrain.push_back(streams::normalize(inst.features, stats));
  for (auto& inst : stream) inst.features = streams::normalize(inst.features, stats);
  out.stream = std::move(stream);
  return out;
}

RepetitionResult run_repetition(const ExperimentConfig& config, std::size_t r) {
  config.validate();
  RepetitionResult result;
  result.repetition = r;
  result.seed = repetition_seed(config.seed, r);

  PreparedStream data = prepare_stream(config, result.seed);
  vae::VaeConfig model = config.model;
  model.input_dim = static_cast<std::size_t>(data.pretrain.front().size());

  ensemble::Engine engine(config.effective_engine(), model, data.pretrain, mix_seed(result.seed, 2));
  for (const auto& m : engine.members()) result.member_train_windows.push_back(m.train_window);

  eval::Evaluator evaluator(config.evaluation);
  result.trace.reserve(data.stream.size());
  for (const auto& inst : data.stream) {
    const ensemble::StepOutput out = engine.step(inst.features);
    if (out.drift_alarm) result.alarm_indices.push_back(inst.index);
    const std::optional<int> y = data.labelled ? std::optional<int>(inst.label) : std::nullopt;
    evaluator.step(inst.index, y, out.prediction, out.score, out.drift_alarm);
  }
  result.trace = evaluator.release();
  result.stats = engine.stats();
  for (std::uint64_t t : result.stats.training_steps) result.training_indices.push_back(data.stream[t - 1].index);
  result.drift_times = data.drift_times;
  result.drift = eval::drift_delay(result.alarm_indices, result.drift_times, config.evaluation.drift_horizon);
  return result;
}

std::vector<std::optional<double>> Summary::run_values(const std::string& metric) const {
  for (std::size_t m = 0; m < whole_run.size(); ++m) {
    if (whole_run[m].first == metric) return rep_values.at(m);
  }
  throw ContractError("unknown metric '" + metric + "'");
}

Summary aggregate_reps(const std::vector<eval::MetricsTrace>& traces, bool average_over_steps) {
  if (traces.empty()) throw AggregationError("no traces to aggregate");
  const std::size_t steps = traces.front().size();
  for (std::size_t r = 1; r < traces.size(); ++r) {
    if (traces[r].size() != steps) {
      throw AggregationError("trace " + std::to_string(r) + " has " + std::to_string(traces[r].size()) +
                             " steps, expected " + std::to_string(steps));
    }
  }

  auto summarise = [](const std::vector<double>& values) -> std::optional<MetricSummary> {
    if (values.empty()) return std::nullopt;
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double se = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    return MetricSummary{mean, se, values.size()};
  };

  Summary s;
  s.repetitions = traces.size();
  s.single_repetition = traces.size() == 1;
  s.t.reserve(steps);
  for (const auto& rec : traces.front()) s.t.push_back(rec.t);

  std::vector<eval::RunAverages> averages;
  for (const auto& trace : traces) averages.push_back(eval::run_averages(trace, average_over_steps));

  for (std::size_t m = 0; m < 4; ++m) {
    std::vector<double> values;
    std::vector<std::optional<double>> per_rep;
    for (const auto& a : averages) {
      per_rep.push_back(metric_of(a, m));
      if (per_rep.back()) values.push_back(*per_rep.back());
    }
    s.whole_run.emplace_back(kMetricNames[m], summarise(values));
    s.rep_values.push_back(std::move(per_rep));

    StepSeries series;
    series.mean.reserve(steps);
    series.stderr_.reserve(steps);
    std::vector<double> at_step;
    for (std::size_t i = 0; i < steps; ++i) {
      at_step.clear();
      for (const auto& trace : traces) {
        if (auto v = metric_of(trace[i], m)) at_step.push_back(*v);
      }
      const auto summary = summarise(at_step);
      series.mean.push_back(summary ? std::optional<double>(summary->mean) : std::nullopt);
      series.stderr_.push_back(summary ? std::optional<double>(summary->stderr_) : std::nullopt);
    }
    s.per_step.emplace_back(kMetricNames[m], std::move(series));
  }
  return s;
}

TimingReport measure_timings(const std::vector<RepetitionResult>& runs) {
  TimingReport report;
  double stream_seconds = 0.0;
  double incremental_seconds = 0.0;
  double drift_seconds = 0.0;
  for (const auto& run : runs) {
    const auto& st = run.stats;
    report.stream.events += st.steps;
    report.incremental.events += st.incremental_trainings;
    report.drift.events += st.resets;
    stream_seconds += st.stream_seconds;
    incremental_seconds += st.incremental_seconds;
    drift_seconds += st.drift_seconds;
    for (std::size_t w : run.member_train_windows) report.expected_incremental += st.steps / w;
  }
  auto finish = [](TimingEntry& e, double total) {
    if (e.events > 0) e.mean_seconds = total / static_cast<double>(e.events);
  };
  finish(report.stream, stream_seconds);
  finish(report.incremental, incremental_seconds);
  finish(report.drift, drift_seconds);
  return report;
}

Json summary_json(const ExperimentConfig& config, const Summary& summary,
                  const std::vector<RepetitionResult>& runs) {
  Json metrics = Json::object();
  for (std::size_t m = 0; m < summary.whole_run.size(); ++m) {
    const auto& [name, ms] = summary.whole_run[m];
    Json entry = Json::object();
    entry["mean"] = ms ? Json(ms->mean) : Json(nullptr);
    entry["stderr"] = ms ? Json(ms->stderr_) : Json(nullptr);
    entry["defined_reps"] = ms ? ms->defined_reps : 0;
    entry["per_rep"] = series_json(summary.rep_values[m]);
    metrics[name] = entry;
  }

  Json per_step = Json::object();
  per_step["t"] = summary.t;
  for (const auto& [name, series] : summary.per_step) {
    per_step[name + "_mean"] = series_json(series.mean);
    per_step[name + "_stderr"] = series_json(series.stderr_);
  }

  Json reps = Json::array();
  for (const auto& run : runs) {
    Json delays = Json::array();
    for (const auto& d : run.drift.delays) delays.push_back(d ? Json(*d) : Json(nullptr));
    reps.push_back({{"repetition", run.repetition},
                    {"seed", run.seed},
                    {"alarms", run.alarm_indices},
                    {"drift_times", run.drift_times},
                    {"drift_delays", delays},
                    {"false_alarms", run.drift.false_alarms},
                    {"missed_drifts", run.drift.missed},
                    {"incremental_trainings", run.stats.incremental_trainings},
                    {"fallback_retrains", run.stats.fallback_retrains}});
  }

  return Json{{"config_hash", config_hash(config)},
              {"mode", ensemble::to_string(config.mode)},
              {"repetitions", summary.repetitions},
              {"single_repetition", summary.single_repetition},
              {"metrics", metrics},
              {"runs", reps},
              {"per_step", per_step}};
}

Json timings_json(const ExperimentConfig& config, const TimingReport& report) {
  auto entry = [](const TimingEntry& e) {
    return Json{{"events", e.events}, {"mean_seconds", e.mean_seconds ? Json(*e.mean_seconds) : Json("no events")}};
  };
  return Json{{"config_hash", config_hash(config)},
              {"t_stream", entry(report.stream)},
              {"t_incr", entry(report.incremental)},
              {"t_drift", entry(report.drift)},
              {"expected_incremental_upper_bound", report.expected_incremental}};
}

RunArtifacts run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": cannot create output directory (" + ec.message() + ")");

  RunArtifacts artifacts;
  std::vector<RepetitionResult> runs;
  std::vector<eval::MetricsTrace> traces;
  for (std::size_t r = 0; r < config.repetitions; ++r) {
    RepetitionResult run = run_repetition(config, r);
    std::ostringstream csv;
    eval::write_trace_csv(csv, run.trace);
    const fs::path path = dir / trace_name(r);
    write_file(path, csv.str());
    artifacts.trace_files.push_back(path);
    traces.push_back(std::move(run.trace));
    run.trace.clear();
    runs.push_back(std::move(run));
  }

  artifacts.summary = aggregate_reps(traces, config.evaluation.average_over_steps);
  artifacts.timings = measure_timings(runs);
  artifacts.summary_file = dir / "summary.json";
  artifacts.timings_file = dir / "timings.json";
  write_file(artifacts.summary_file, summary_json(config, artifacts.summary, runs).dump(1) + "\n");
  write_file(artifacts.timings_file, timings_json(config, artifacts.timings).dump(2) + "\n");
  return artifacts;
}

}  // namespace vaestream::experiment
