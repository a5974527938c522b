#include <algorithm>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "pollnet/rng.hpp"

using pollnet::Rng;

TEST_CASE("derived streams are reproducible and distinct") {
  auto a = Rng::derive(7, "walks", 3);
  auto b = Rng::derive(7, "walks", 3);
  auto c = Rng::derive(7, "walks", 4);
  auto d = Rng::derive(7, "roles", 3);
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  CHECK(x != d.next());
}

TEST_CASE("uniform stays in [0, 1) and has the right mean") {
  Rng rng(1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000.0 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("below covers the range without bias") {
  Rng rng(2);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) ++counts[rng.below(6)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  CHECK_THROWS(rng.below(0));
}

TEST_CASE("exponential matches its rate") {
  Rng rng(3);
  double sum = 0.0;
  for (int i = 0; i < 200000; ++i) sum += rng.exponential(4.0);
  CHECK(sum / 200000.0 == doctest::Approx(0.25).epsilon(0.01));
}

TEST_CASE("normal has zero mean and unit variance") {
  Rng rng(4);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("shuffle is a permutation and depends on the seed") {
  std::vector<int> a(50);
  std::iota(a.begin(), a.end(), 0);
  std::vector<int> b(a);
  Rng r1(5), r2(6);
  r1.shuffle(std::span<int>(a));
  r2.shuffle(std::span<int>(b));
  CHECK(a != b);
  std::sort(a.begin(), a.end());
  std::vector<int> expected(50);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(a == expected);
}
