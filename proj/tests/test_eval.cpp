#include <doctest.h>

#include "vaestream/error.hpp"
#include "vaestream/eval.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace vaestream;
using namespace vaestream::eval;

namespace {

// O(|P||N|) double sum with a configurable tie weight.
double brute_pauc(const std::vector<double>& s, const std::vector<int>& y, double tie_weight) {
  double hits = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      hits += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? tie_weight : 0.0);
    }
  }
  return hits / pairs;
}

struct Window {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Both classes present; scores drawn from a small grid so ties are common.
Window random_window(std::mt19937_64& rng, std::size_t max_size) {
  Window w;
  const std::size_t n = 2 + rng() % (max_size - 1);
  const int grid = 1 + static_cast<int>(rng() % 20);
  for (std::size_t i = 0; i < n; ++i) {
    w.labels.push_back(static_cast<int>(rng() % 3 == 0));
    w.scores.push_back(static_cast<double>(rng() % static_cast<unsigned>(grid)) / 7.0);
  }
  w.labels[0] = 1;
  w.labels[1] = 0;
  return w;
}

}  // namespace

TEST_CASE("prequential accumulators on a 10-step fixture") {
  // alpha = 0.9, values from exact rational arithmetic.
  const std::vector<int> y = {1, 0, 0, 1, 0, 1, 1, 0, 0, 0};
  const std::vector<int> y_hat = {1, 0, 1, 0, 0, 1, 1, 0, 1, 0};
  const std::vector<std::optional<double>> recall = {1.0, 1.0, 1.0, 9.0 / 19, 9.0 / 19,
                                                     181.0 / 271, 2629.0 / 3439, 2629.0 / 3439,
                                                     2629.0 / 3439, 2629.0 / 3439};
  const std::vector<std::optional<double>> specificity = {std::nullopt, 1.0, 9.0 / 19, 9.0 / 19,
                                                          181.0 / 271, 181.0 / 271, 181.0 / 271,
                                                          2629.0 / 3439, 23661.0 / 40951, 181.0 / 271};
  FadingState state(0.9);
  for (std::size_t t = 0; t < y.size(); ++t) {
    prequential_update(state, y[t], y_hat[t]);
    CHECK(state.recall.value().value() == doctest::Approx(*recall[t]).epsilon(1e-12));
    if (specificity[t]) {
      CHECK(state.specificity.value().value() == doctest::Approx(*specificity[t]).epsilon(1e-12));
    } else {
      CHECK_FALSE(state.specificity.value().has_value());
    }
  }
  CHECK_THROWS_AS(prequential_update(state, 2, 0), ContractError);
}

TEST_CASE("single miss gives zero recall") {
  FadingState state;
  prequential_update(state, 1, 0);
  CHECK(state.recall.value() == 0.0);
  CHECK_FALSE(state.specificity.value().has_value());
}

TEST_CASE("gmean values") {
  CHECK(gmean(1.0, 1.0) == 1.0);
  CHECK(gmean(0.25, 0.64) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(gmean(0.0, 0.7) == 0.0);
}

TEST_CASE("perfect classifier converges geometrically") {
  Evaluator ev;
  std::mt19937_64 rng(5);
  double previous_gap = 1.0;
  for (std::uint64_t t = 1; t <= 2000; ++t) {
    const int y = static_cast<int>(rng() % 10 == 0);
    const TraceRecord& r = ev.step(t, y, y, y ? 0.9 : 0.1, false);
    if (r.recall) {
      CHECK(*r.recall == 1.0);
      CHECK(*r.recall <= 1.0);
    }
    if (r.gmean) {
      const double gap = 1.0 - *r.gmean;
      CHECK(gap <= previous_gap);
      previous_gap = gap;
    }
  }
  CHECK(ev.trace().back().pauc == 1.0);
}

TEST_CASE("fading specificity approaches one at rate alpha") {
  // After a single miss followed by k hits: 1 - S/B = alpha^k / B_k.
  FadingState state(0.99);
  prequential_update(state, 0, 1);
  for (int k = 1; k <= 500; ++k) {
    prequential_update(state, 0, 0);
    const double b = (1.0 - std::pow(0.99, k + 1)) / (1.0 - 0.99);
    CHECK(1.0 - *state.specificity.value() == doctest::Approx(std::pow(0.99, k) / b).epsilon(1e-9));
  }
}

TEST_CASE("gmean squared equals recall times specificity at every step") {
  Evaluator ev;
  std::mt19937_64 rng(11);
  for (std::uint64_t t = 1; t <= 5000; ++t) {
    const int y = static_cast<int>(rng() % 7 == 0);
    const int y_hat = static_cast<int>(rng() % 4 == 0);
    const TraceRecord& r = ev.step(t, y, y_hat, 0.0, false);
    if (r.recall && r.specificity) {
      REQUIRE(r.gmean.has_value());
      CHECK(std::abs(*r.gmean * *r.gmean - *r.recall * *r.specificity) < 1e-15);
      CHECK(*r.recall >= 0.0);
      CHECK(*r.specificity <= 1.0);
    } else {
      CHECK_FALSE(r.gmean.has_value());
    }
  }
}

TEST_CASE("pauc examples") {
  CHECK(pauc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(pauc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 0}) == 0.0);
  CHECK_FALSE(pauc(std::vector<double>{0.5, 0.6}, std::vector<int>{0, 0}).has_value());
  CHECK_FALSE(pauc(std::vector<double>{}, std::vector<int>{}).has_value());
}

TEST_CASE("rank-sum pauc equals the brute-force double sum") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const Window w = random_window(rng, 200);
    REQUIRE(pauc(w.scores, w.labels).value() == brute_pauc(w.scores, w.labels, 0.0));
  }
}

TEST_CASE("score window matches the free function as it slides") {
  std::mt19937_64 rng(8);
  ScoreWindow window(50);
  std::vector<double> all_scores;
  std::vector<int> all_labels;
  for (int i = 0; i < 400; ++i) {
    const double s = static_cast<double>(rng() % 30) / 3.0;
    const int y = static_cast<int>(rng() % 5 == 0);
    window.push(s, y);
    all_scores.push_back(s);
    all_labels.push_back(y);
    const std::size_t keep = std::min<std::size_t>(all_scores.size(), 50);
    const std::vector<double> tail_s(all_scores.end() - static_cast<std::ptrdiff_t>(keep), all_scores.end());
    const std::vector<int> tail_y(all_labels.end() - static_cast<std::ptrdiff_t>(keep), all_labels.end());
    REQUIRE(window.scores() == tail_s);
    REQUIRE(window.labels() == tail_y);
    const auto expected = pauc(tail_s, tail_y);
    REQUIRE(window.pauc().has_value() == expected.has_value());
    if (expected) REQUIRE(*window.pauc() == *expected);
  }
}

TEST_CASE("proc curve area equals the half-tie pauc") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const Window w = random_window(rng, 200);
    const auto curve = proc_curve(w.scores, w.labels);
    REQUIRE(curve.front() == std::pair<double, double>{0.0, 0.0});
    REQUIRE(curve.back() == std::pair<double, double>{1.0, 1.0});
    for (std::size_t i = 1; i < curve.size(); ++i) {
      REQUIRE(curve[i].first >= curve[i - 1].first);
      REQUIRE(curve[i].second >= curve[i - 1].second);
    }
    CHECK(std::abs(trapezoid_area(curve) - brute_pauc(w.scores, w.labels, 0.5)) < 1e-9);
  }
}

TEST_CASE("proc points are achievable confusion-matrix points") {
  std::mt19937_64 rng(10);
  const Window w = random_window(rng, 100);
  const auto curve = proc_curve(w.scores, w.labels);
  std::vector<double> thresholds(w.scores);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  REQUIRE(curve.size() == thresholds.size() + 1);
  double pos = 0.0, neg = 0.0;
  for (int y : w.labels) (y ? pos : neg) += 1.0;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < w.scores.size(); ++i) {
      if (w.scores[i] >= thresholds[k]) (w.labels[i] ? tp : fp) += 1.0;
    }
    CHECK(curve[k + 1].first == doctest::Approx(fp / neg));
    CHECK(curve[k + 1].second == doctest::Approx(tp / pos));
  }
}

TEST_CASE("proc special cases") {
  const auto perfect = proc_curve(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0});
  CHECK(std::find(perfect.begin(), perfect.end(), std::pair<double, double>{0.0, 1.0}) != perfect.end());
  const auto flat = proc_curve(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{1, 0, 0});
  CHECK(flat == std::vector<std::pair<double, double>>{{0.0, 0.0}, {1.0, 1.0}});
  CHECK(proc_curve(std::vector<double>{0.3}, std::vector<int>{1}).empty());
}

TEST_CASE("drift delay accounting") {
  const std::vector<std::uint64_t> drifts = {10000, 15000};
  const auto on_time = drift_delay(std::vector<std::uint64_t>{10012, 15040}, drifts);
  CHECK(on_time.delays[0] == 12u);
  CHECK(on_time.delays[1] == 40u);
  CHECK(on_time.false_alarms == 0);
  CHECK(on_time.missed == 0);

  const auto early = drift_delay(std::vector<std::uint64_t>{9000, 10012}, drifts);
  CHECK(early.false_alarms == 1);
  CHECK(early.missed == 1);
  CHECK_FALSE(early.delays[1].has_value());

  const auto late = drift_delay(std::vector<std::uint64_t>{12500}, drifts);
  CHECK(late.false_alarms == 1);
  CHECK(late.missed == 2);

  // Only the first matched alarm sets the delay; later ones are still matches.
  const auto repeated = drift_delay(std::vector<std::uint64_t>{10005, 10300}, drifts);
  CHECK(repeated.delays[0] == 5u);
  CHECK(repeated.false_alarms == 0);
}

TEST_CASE("trace csv") {
  Evaluator ev;
  ev.step(1, 0, 0, 0.25, false);
  ev.step(2, std::nullopt, 1, 0.5, true);
  std::ostringstream out;
  write_trace_csv(out, ev.trace());
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == kTraceHeader);
  std::getline(lines, line);
  CHECK(line == "1,0,0,0.25,,1,,,0");
  std::getline(lines, line);
  CHECK(line == "2,,1,0.5,,,,,1");  // no label: no label-dependent metrics
  CHECK(ev.trace().size() == 2);
}

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("run averages") {
  MetricsTrace trace(4);
  trace[1].gmean = 0.5;
  trace[2].gmean = 0.7;
  trace[3].pauc = 0.9;
  const RunAverages mean = run_averages(trace, true);
  CHECK(*mean.gmean == doctest::Approx(0.6));
  CHECK(*mean.pauc == 0.9);
  CHECK_FALSE(mean.recall.has_value());
  CHECK(*run_averages(trace, false).gmean == 0.7);
}
