#include <doctest.h>

#include "vaestream/windows.hpp"

#include <random>
#include <string>
#include <vector>

using vaestream::ContractError;
using vaestream::FrozenWindow;
using vaestream::SlidingWindow;

TEST_CASE("sliding window eviction") {
  SlidingWindow<std::string> w(3);
  for (const char* s : {"a", "b", "c", "d"}) w.push(s);
  CHECK(w.snapshot() == std::vector<std::string>{"b", "c", "d"});
  CHECK(w.oldest() == "b");
  CHECK(w.newest() == "d");
  CHECK(w.full());

  SlidingWindow<int> partial(5);
  partial.push(1);
  partial.push(2);
  CHECK(partial.snapshot() == std::vector<int>{1, 2});
  CHECK_FALSE(partial.full());
}

TEST_CASE("total pushed counter") {
  SlidingWindow<int> w(2);
  for (int i = 0; i < 5; ++i) w.push(i);
  CHECK(w.total_pushed() == 5);
  CHECK(w.size() == 2);
  w.clear();
  CHECK(w.total_pushed() == 5);
  CHECK(w.size() == 0);
  CHECK_FALSE(w.full());
}

TEST_CASE("snapshot is a copy") {
  SlidingWindow<int> empty(4);
  CHECK(empty.snapshot().empty());

  SlidingWindow<int> w(3);
  w.push(1);
  w.push(2);
  const auto snap = w.snapshot();
  w.push(3);
  w.push(4);
  CHECK(snap == std::vector<int>{1, 2});
  CHECK(w.last(2) == std::vector<int>{3, 4});
  CHECK(w.last(10) == std::vector<int>{2, 3, 4});
}

TEST_CASE("sliding window matches a list-slice oracle") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t capacity = 1 + rng() % 12;
    const std::size_t pushes = rng() % 40;
    SlidingWindow<int> w(capacity);
    std::vector<int> all;
    for (std::size_t i = 0; i < pushes; ++i) {
      const int v = static_cast<int>(rng() % 1000);
      w.push(v);
      all.push_back(v);
      // Interleave occasional clears.
      if (rng() % 25 == 0) {
        w.clear();
        all.clear();
      }
      const std::size_t keep = std::min(all.size(), capacity);
      const std::vector<int> expected(all.end() - static_cast<std::ptrdiff_t>(keep), all.end());
      REQUIRE(w.snapshot() == expected);
      REQUIRE(w.size() == keep);
      for (std::size_t k = 0; k < keep; ++k) REQUIRE(w[k] == expected[k]);
    }
  }
}

TEST_CASE("frozen window") {
  FrozenWindow<int> w(3);
  w.push(1);
  w.push(2);
  CHECK_FALSE(w.frozen());
  w.push(3);
  CHECK(w.frozen());
  CHECK_THROWS_AS(w.push(4), ContractError);
  CHECK(w.items() == std::vector<int>{1, 2, 3});
  w.reset();
  CHECK(w.empty());
  CHECK_FALSE(w.frozen());
  w.push(9);
  CHECK(w.items() == std::vector<int>{9});
}

TEST_CASE("zero capacity is rejected") {
  CHECK_THROWS_AS(SlidingWindow<int>(0), ContractError);
  CHECK_THROWS_AS(FrozenWindow<int>(0), ContractError);
}
