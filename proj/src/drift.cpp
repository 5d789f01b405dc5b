#include "vaestream/drift.hpp"

#include "vaestream/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vaestream::drift {

namespace {

Matrix to_columns(std::span<const Vector> xs) {
  if (xs.empty()) return Matrix();
  Matrix m(xs.front().size(), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = xs[j];
  return m;
}

void sorted_insert(std::vector<double>& v, double x) {
  v.insert(std::upper_bound(v.begin(), v.end(), x), x);
}

void sorted_erase(std::vector<double>& v, double x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) throw ContractError("loss cache out of sync");
  v.erase(it);
}

}  // namespace

const char* to_string(Flag flag) {
  switch (flag) {
    case Flag::None:
      return "none";
    case Flag::Warn:
      return "warn";
    case Flag::Alarm:
      return "alarm";
  }
  return "none";
}

void TestConstants::validate() const {
  if (!(p_alarm > 0.0 && p_alarm < p_warn && p_warn < 1.0)) {
    throw ConfigError("drift thresholds must satisfy 0 < p_alarm < p_warn < 1");
  }
}

std::vector<double> ranks_with_ties(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // Positions i+1 .. j (1-based) share their mean rank.
    const double shared = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
    i = j;
  }
  return ranks;
}

double tie_term(std::span<const double> pooled) {
  std::vector<double> sorted(pooled.begin(), pooled.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    sum += t * t * t - t;
    i = j;
  }
  return sum;
}

UStatistics mann_whitney_u(std::span<const double> ref, std::span<const double> mov) {
  if (ref.empty() || mov.empty()) throw ContractError("Mann-Whitney U needs two non-empty samples");
  std::vector<double> pooled(ref.begin(), ref.end());
  pooled.insert(pooled.end(), mov.begin(), mov.end());
  const auto ranks = ranks_with_ties(pooled);
  const double rank_ref = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(ref.size()), 0.0);
  const double rank_mov = std::accumulate(ranks.begin() + static_cast<std::ptrdiff_t>(ref.size()), ranks.end(), 0.0);
  const double n_ref = static_cast<double>(ref.size());
  const double n_mov = static_cast<double>(mov.size());
  return UStatistics{n_ref * n_mov + n_ref * (n_ref + 1.0) / 2.0 - rank_ref,
                     n_ref * n_mov + n_mov * (n_mov + 1.0) / 2.0 - rank_mov};
}

NullMoments null_moments(std::size_t n_ref, std::size_t n_mov, double ties) {
  const double n1 = static_cast<double>(n_ref);
  const double n2 = static_cast<double>(n_mov);
  const double n = n1 + n2;
  double variance = n1 * n2 / 12.0 * (n + 1.0);
  if (n > 1.0) variance = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  return NullMoments{n1 * n2 / 2.0, std::sqrt(std::max(variance, 0.0))};
}

double z_value(double u_min, const NullMoments& moments) {
  if (!(moments.std_dev > 0.0)) return 0.0;
  return (u_min - moments.mean) / moments.std_dev;
}

double p_value(double z) {
  const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

Flag evaluate_flags(double p, const TestConstants& constants) {
  if (p < constants.p_alarm) return Flag::Alarm;
  if (p < constants.p_warn) return Flag::Warn;
  return Flag::None;
}

TestResult run_test(std::span<const double> ref, std::span<const double> mov, const TestConstants& constants) {
  TestResult r;
  r.u = mann_whitney_u(ref, mov);
  std::vector<double> pooled(ref.begin(), ref.end());
  pooled.insert(pooled.end(), mov.begin(), mov.end());
  const auto moments = null_moments(ref.size(), mov.size(), tie_term(pooled));
  r.z = z_value(std::min(r.u.u_ref, r.u.u_mov), moments);
  r.p = p_value(r.z);
  r.flag = evaluate_flags(r.p, constants);
  return r;
}

DriftDetector::DriftDetector(std::size_t window_size, TestConstants constants)
    : window_size_(window_size),
      constants_(constants),
      ref_x_(window_size),
      mov_x_(window_size),
      mov_loss_(window_size) {
  constants_.validate();
  ref_loss_.reserve(window_size);
  ref_sorted_.reserve(window_size);
  mov_sorted_.reserve(window_size);
}

void DriftDetector::rescore(const vae::Vae& model, std::uint64_t model_version) {
  ref_loss_.clear();
  if (!ref_x_.empty()) {
    const auto scores = model.score_batch(to_columns(ref_x_.items()));
    ref_loss_.assign(scores.data(), scores.data() + scores.size());
  }
  ref_sorted_ = ref_loss_;
  std::sort(ref_sorted_.begin(), ref_sorted_.end());

  const auto mov_items = mov_x_.snapshot();
  mov_loss_.clear();
  if (!mov_items.empty()) {
    const auto scores = model.score_batch(to_columns(mov_items));
    for (Eigen::Index j = 0; j < scores.size(); ++j) mov_loss_.push(scores(j));
  }
  mov_sorted_ = mov_loss_.snapshot();
  std::sort(mov_sorted_.begin(), mov_sorted_.end());
  scored_version_ = model_version;
}

Flag DriftDetector::step(const Vector& x, double loss, const vae::Vae& model, std::uint64_t model_version) {
  if (window_size_ == 0) throw ContractError("detector used before construction");
  if (scored_version_ != model_version) rescore(model, model_version);

  if (!ref_x_.frozen()) {
    ref_x_.push(x);
    ref_loss_.push_back(loss);
    sorted_insert(ref_sorted_, loss);
  }
  if (mov_loss_.full()) sorted_erase(mov_sorted_, mov_loss_.oldest());
  mov_x_.push(x);
  mov_loss_.push(loss);
  sorted_insert(mov_sorted_, loss);

  if (ref_x_.frozen() && mov_x_.full()) {
    last_ = test_sorted();
    flag_ = last_->flag;
  } else {
    flag_ = Flag::None;
  }
  return flag_;
}

void DriftDetector::seed_reference(std::span<const Vector> xs, const vae::Vae& model,
                                   std::uint64_t model_version) {
  ref_x_.reset();
  const std::size_t count = std::min(xs.size(), window_size_);
  for (std::size_t i = 0; i < count; ++i) ref_x_.push(xs[i]);
  rescore(model, model_version);
}

void DriftDetector::reset() {
  ref_x_.reset();
  mov_x_.clear();
  ref_loss_.clear();
  mov_loss_.clear();
  ref_sorted_.clear();
  mov_sorted_.clear();
  scored_version_.reset();
  flag_ = Flag::None;
  last_.reset();
}

// Merge of the two sorted loss caches; yields the same U and tie term as the
// rank-based route in O(n).
TestResult DriftDetector::test_sorted() const {
  const auto& r = ref_sorted_;
  const auto& m = mov_sorted_;
  const double n_mov = static_cast<double>(m.size());
  double u_ref = 0.0;
  double ties = 0.0;
  double mov_below = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < r.size() || j < m.size()) {
    double v;
    if (j >= m.size() || (i < r.size() && r[i] <= m[j])) {
      v = r[i];
    } else {
      v = m[j];
    }
    double c_ref = 0.0;
    double c_mov = 0.0;
    while (i < r.size() && r[i] == v) {
      ++i;
      c_ref += 1.0;
    }
    while (j < m.size() && m[j] == v) {
      ++j;
      c_mov += 1.0;
    }
    u_ref += c_ref * (n_mov - mov_below - c_mov) + 0.5 * c_ref * c_mov;
    const double t = c_ref + c_mov;
    ties += t * t * t - t;
    mov_below += c_mov;
  }
  TestResult res;
  res.u = UStatistics{u_ref, static_cast<double>(r.size()) * n_mov - u_ref};
  const auto moments = null_moments(r.size(), m.size(), ties);
  res.z = z_value(std::min(res.u.u_ref, res.u.u_mov), moments);
  res.p = p_value(res.z);
  res.flag = evaluate_flags(res.p, constants_);
  return res;
}

}  // namespace vaestream::drift
