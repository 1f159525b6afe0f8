#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "tabraster/parallel.hpp"
#include "tabraster/rng.hpp"

using namespace tabraster;

TEST(Rng, SamePathSameStream) {
  RngStream a(7, 3, 1, Stage::elastic), b(7, 3, 1, Stage::elastic);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, AnyPathComponentChangesStream) {
  const auto first = [](RngStream s) { return s.next_u64(); };
  const auto base = first(RngStream(7, 3, 1, Stage::elastic));
  EXPECT_NE(base, first(RngStream(8, 3, 1, Stage::elastic)));
  EXPECT_NE(base, first(RngStream(7, 4, 1, Stage::elastic)));
  EXPECT_NE(base, first(RngStream(7, 3, 2, Stage::elastic)));
  EXPECT_NE(base, first(RngStream(7, 3, 1, Stage::morphology)));
  // Swapping components is a different path.
  EXPECT_NE(first(RngStream(7, 1, 3, Stage::elastic)), base);
}

TEST(Rng, Uniform01Range) {
  RngStream r(1, {1, 2});
  double lo = 1, hi = 0, sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_LT(lo, 0.001);
  EXPECT_GT(hi, 0.999);
}

TEST(Rng, UniformIntCoversClosedRange) {
  RngStream r(2, {5});
  std::vector<int> hist(5);
  for (int i = 0; i < 50000; ++i) {
    const auto v = r.uniform_int(1, 5);
    ASSERT_GE(v, 1);
    ASSERT_LE(v, 5);
    ++hist[v - 1];
  }
  for (int h : hist) EXPECT_NEAR(h / 50000.0, 0.2, 0.01);
  EXPECT_EQ(r.uniform_int(4, 4), 4);
}

TEST(Rng, NormalMoments) {
  RngStream r(3, {9});
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutationAndDeterministic) {
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  RngStream(4, {1}).shuffle(a.begin(), a.end());
  RngStream(4, {1}).shuffle(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 50u);
  std::vector<int> sorted(50);
  std::iota(sorted.begin(), sorted.end(), 0);
  EXPECT_NE(a, sorted);
}

TEST(Parallel, ResultsIndependentOfWorkers) {
  const auto run = [](unsigned w) {
    std::vector<std::uint64_t> out(200);
    parallel_for(out.size(), w, [&](std::size_t i) { out[i] = RngStream(11, i, 0, Stage::trial).next_u64(); });
    return out;
  };
  EXPECT_EQ(run(1), run(4));
}

TEST(Parallel, PropagatesException) {
  EXPECT_THROW(parallel_for(20, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
