#include "vaestream/eval.hpp"

#include "vaestream/drift.hpp"
#include "vaestream/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>

namespace vaestream::eval {

namespace {

void check_label(int y) {
  if (y != 0 && y != 1) throw ContractError("labels must be 0 or 1");
}

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  for (int y : labels) check_label(y);
}

}  // namespace

void prequential_update(FadingState& state, int y, int y_hat) {
  check_label(y);
  check_label(y_hat);
  if (y == 1) {
    state.recall.update(y_hat == 1);
  } else {
    state.specificity.update(y_hat == 0);
  }
}

double gmean(double recall, double specificity) { return std::sqrt(recall * specificity); }

std::optional<double> pauc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto ranks = drift::ranks_with_ties(scores);
  double n_pos = 0.0;
  double rank_pos = 0.0;
  std::map<double, std::array<double, 2>> groups;  // score -> {negatives, positives}
  for (std::size_t i = 0; i < scores.size(); ++i) {
    groups[scores[i]][static_cast<std::size_t>(labels[i])] += 1.0;
    if (labels[i] == 1) {
      n_pos += 1.0;
      rank_pos += ranks[i];
    }
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  // Mid-ranks credit each tied (pos, neg) pair with 1/2; remove it for the strict indicator.
  double tied_pairs = 0.0;
  for (const auto& [score, counts] : groups) tied_pairs += counts[0] * counts[1];
  const double strictly_greater = rank_pos - n_pos * (n_pos + 1.0) / 2.0 - 0.5 * tied_pairs;
  return strictly_greater / (n_pos * n_neg);
}

std::vector<std::pair<double, double>> proc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double n_pos = 0.0;
  for (int y : labels) n_pos += y;
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return {};

  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  double tp = 0.0;
  double fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1.0;
      ++i;
    }
    curve.emplace_back(fp / n_neg, tp / n_pos);
  }
  return curve;
}

double trapezoid_area(const std::vector<std::pair<double, double>>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].first - curve[i - 1].first) * (curve[i].second + curve[i - 1].second) / 2.0;
  }
  return area;
}

ScoreWindow::ScoreWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractError("score window capacity must be >= 1");
  scores_.reserve(capacity);
  labels_.reserve(capacity);
}

void ScoreWindow::push(double score, int label) {
  check_label(label);
  if (!std::isfinite(score)) throw ContractError("score window requires finite scores");
  auto insert = [](std::vector<double>& v, double s) { v.insert(std::upper_bound(v.begin(), v.end(), s), s); };
  auto erase = [](std::vector<double>& v, double s) { v.erase(std::lower_bound(v.begin(), v.end(), s)); };
  if (scores_.size() < capacity_) {
    scores_.push_back(score);
    labels_.push_back(label);
  } else {
    erase(labels_[head_] == 1 ? pos_sorted_ : neg_sorted_, scores_[head_]);
    scores_[head_] = score;
    labels_[head_] = label;
    head_ = (head_ + 1) % capacity_;
  }
  insert(label == 1 ? pos_sorted_ : neg_sorted_, score);
}

std::optional<double> ScoreWindow::pauc() const {
  if (pos_sorted_.empty() || neg_sorted_.empty()) return std::nullopt;
  // For each positive, count negatives strictly below it.
  double greater = 0.0;
  std::size_t below = 0;
  for (double s : pos_sorted_) {
    while (below < neg_sorted_.size() && neg_sorted_[below] < s) ++below;
    greater += static_cast<double>(below);
  }
  return greater / (static_cast<double>(pos_sorted_.size()) * static_cast<double>(neg_sorted_.size()));
}

std::vector<double> ScoreWindow::scores() const {
  std::vector<double> out;
  out.reserve(scores_.size());
  for (std::size_t i = 0; i < scores_.size(); ++i) out.push_back(scores_[(head_ + i) % scores_.size()]);
  return out;
}

std::vector<int> ScoreWindow::labels() const {
  std::vector<int> out;
  out.reserve(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) out.push_back(labels_[(head_ + i) % labels_.size()]);
  return out;
}

std::vector<std::pair<double, double>> ScoreWindow::proc() const {
  const auto s = scores();
  const auto l = labels();
  return proc_curve(s, l);
}

DriftDelayReport drift_delay(std::span<const std::uint64_t> alarms, std::span<const std::uint64_t> drifts,
                             std::uint64_t horizon) {
  DriftDelayReport report;
  report.delays.assign(drifts.size(), std::nullopt);
  for (std::uint64_t alarm : alarms) {
    std::optional<std::size_t> match;
    for (std::size_t k = 0; k < drifts.size(); ++k) {
      if (drifts[k] <= alarm) match = k;
    }
    if (match && alarm - drifts[*match] <= horizon) {
      auto& d = report.delays[*match];
      const std::uint64_t delay = alarm - drifts[*match];
      if (!d || delay < *d) d = delay;
    } else {
      ++report.false_alarms;
    }
  }
  report.missed = static_cast<std::size_t>(
      std::count_if(report.delays.begin(), report.delays.end(), [](const auto& d) { return !d.has_value(); }));
  return report;
}

Evaluator::Evaluator(EvalConfig config)
    : config_(config), fading_(config.fading_factor), window_(config.pauc_window) {}

const TraceRecord& Evaluator::step(std::uint64_t t, std::optional<int> y, int y_hat, double score, bool alarm) {
  TraceRecord r;
  r.t = t;
  r.y = y;
  r.y_hat = y_hat;
  r.score = score;
  r.alarm = alarm;
  if (y) {
    prequential_update(fading_, *y, y_hat);
    window_.push(score, *y);
    r.recall = fading_.recall.value();
    r.specificity = fading_.specificity.value();
    if (r.recall && r.specificity) r.gmean = gmean(*r.recall, *r.specificity);
    r.pauc = window_.pauc();
  }
  trace_.push_back(r);
  return trace_.back();
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

void write_trace_csv(std::ostream& out, const MetricsTrace& trace) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.t << ',' << (r.y ? std::to_string(*r.y) : std::string()) << ',' << r.y_hat << ','
        << format_number(r.score) << ',' << opt(r.recall) << ',' << opt(r.specificity) << ','
        << opt(r.gmean) << ',' << opt(r.pauc) << ',' << (r.alarm ? 1 : 0) << '\n';
  }
}

RunAverages run_averages(const MetricsTrace& trace, bool average_over_steps) {
  auto summarise = [&](auto member) -> std::optional<double> {
    double sum = 0.0;
    std::size_t n = 0;
    std::optional<double> last;
    for (const auto& r : trace) {
      const auto& v = r.*member;
      if (!v) continue;
      sum += *v;
      ++n;
      last = *v;
    }
    if (n == 0) return std::nullopt;
    return average_over_steps ? std::optional<double>(sum / static_cast<double>(n)) : last;
  };
  return RunAverages{summarise(&TraceRecord::recall), summarise(&TraceRecord::specificity),
                     summarise(&TraceRecord::gmean), summarise(&TraceRecord::pauc)};
}

}  // namespace vaestream::eval
