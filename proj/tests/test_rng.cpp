#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "gazeforge/rng.hpp"

using namespace gazeforge;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);
}

TEST_CASE("forked streams are stable and independent of parent position") {
  Rng parent(7);
  Rng f1 = parent.fork(3);
  parent.next_u64();  // advancing the parent must not change later forks
  Rng f2 = Rng(7).fork(3);
  for (int i = 0; i < 16; ++i) CHECK(f1.next_u64() == f2.next_u64());

  Rng g = Rng(7).fork(4);
  CHECK(Rng(7).fork(3).next_u64() != g.next_u64());
}

TEST_CASE("uniform stays in [0,1) and fills the interval") {
  Rng r(9);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("below covers the whole range without bias spikes") {
  Rng r(4);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 50000; ++i) ++counts[r.below(10)];
  for (int c : counts) {
    CHECK(c > 4500);
    CHECK(c < 5500);
  }
}

TEST_CASE("range is inclusive on both ends") {
  Rng r(5);
  std::set<long> seen;
  for (int i = 0; i < 200; ++i) seen.insert(r.range(-2, 2));
  CHECK(seen == std::set<long>({-2, -1, 0, 1, 2}));
}

TEST_CASE("normal has roughly the requested moments") {
  Rng r(11);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal(3.0, 2.0);
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean - 3.0) < 0.05);
  CHECK(std::abs(var - 4.0) < 0.15);
}

TEST_CASE("shuffle is a permutation and deterministic per seed") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  Rng r(123);
  r.shuffle(v);

  std::vector<int> w(100);
  std::iota(w.begin(), w.end(), 0);
  Rng r2(123);
  r2.shuffle(w);
  CHECK(v == w);

  std::sort(w.begin(), w.end());
  std::vector<int> id(100);
  std::iota(id.begin(), id.end(), 0);
  CHECK(w == id);
  CHECK(v != id);  // astronomically unlikely to be identity
}
