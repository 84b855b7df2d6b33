#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "skeltk/rng.hpp"

using skeltk::Rng;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal < 4);
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("uniform(lo,hi) respects bounds") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-3.0, 5.0);
    CHECK(u >= -3.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("normal has roughly standard moments") {
  Rng rng(3);
  const int n = 50000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("uniform_int covers [0,n)") {
  Rng rng(5);
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) {
    int v = rng.uniform_int(6);
    CHECK(v >= 0);
    CHECK(v < 6);
    seen.insert(v);
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("shuffle is a permutation and deterministic per seed") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> v2 = v1;
  Rng a(9), b(9);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::set<int> s(v1.begin(), v1.end());
  CHECK(s.size() == 10);
}

TEST_CASE("fork does not advance the parent") {
  Rng a(100), b(100);
  (void)a.fork(0);
  (void)a.fork(1);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("fork streams are reproducible and distinct") {
  Rng root(100);
  Rng c1 = root.fork(3);
  Rng c2 = root.fork(3);
  Rng other = root.fork(4);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) {
    auto x = c1.next_u64();
    CHECK(x == c2.next_u64());
    if (x != other.next_u64()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("fork chains are independent of sibling order") {
  Rng root(77);
  auto a = root.fork(1).fork(2);
  (void)root.fork(9);
  auto b = root.fork(1).fork(2);
  for (int i = 0; i < 8; ++i) CHECK(a.next_u64() == b.next_u64());
}
