#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "avq/rng.hpp"

TEST_CASE("identical seeds give identical streams") {
  avq::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  avq::Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);
}

TEST_CASE("uniform stays in [0,1) with sensible moments") {
  avq::Rng rng(7);
  double sum = 0.0, sumsq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.05));
}

TEST_CASE("bounded uniform respects its interval") {
  avq::Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-3.0, 5.0);
    CHECK(v >= -3.0);
    CHECK(v < 5.0);
  }
}

TEST_CASE("below covers every residue") {
  avq::Rng rng(9);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t v = rng.below(5);
    REQUIRE(v < 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
  CHECK(rng.below(0) == 0);
}

TEST_CASE("gaussian moments") {
  avq::Rng rng(10);
  double sum = 0.0, sumsq = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(stddev == doctest::Approx(1.0).epsilon(0.02));
  CHECK(rng.gaussian(10.0, 0.0) == 10.0);
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;

  avq::Rng a(5);
  a.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == w);        // still a permutation
  CHECK(v != w);             // and almost surely not the identity

  avq::Rng b(5);
  b.shuffle(w);
  CHECK(v == w);             // same seed, same order
}

TEST_CASE("fork derives independent streams") {
  const avq::Rng base(123);
  avq::Rng f0 = base.fork(0);
  avq::Rng f1 = base.fork(1);
  avq::Rng f0_again = base.fork(0);
  const std::uint64_t a = f0.next_u64();
  CHECK(a != f1.next_u64());
  CHECK(a == f0_again.next_u64());

  // forking does not advance the parent
  avq::Rng parent1(123), parent2(123);
  (void)parent1.fork(7);
  CHECK(parent1.next_u64() == parent2.next_u64());
}
