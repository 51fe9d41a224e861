#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "cts/error.hpp"
#include "cts/rng.hpp"

using namespace cts;

TEST(Rng, SplitMix64MatchesReferenceStream) {
  // First output of the reference SplitMix64 generator seeded with 0.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng a(7), b(7);
  const auto child1 = a.split(3).next_u64();
  const auto child2 = a.split(3).next_u64();
  EXPECT_EQ(child1, child2);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(a.split(1).next_u64(), a.split(2).next_u64());
}

TEST(Rng, DeriveSeedDependsOnKeyOrder) {
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
  EXPECT_EQ(derive_seed(9, {4, 5}), derive_seed(9, {4, 5}));
}

TEST(Rng, UniformIndexInRangeAndRoughlyUniform) {
  Rng rng(1);
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const auto v = rng.uniform_index(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  double chi2 = 0;
  for (const int c : counts) chi2 += (c - draws / 7.0) * (c - draws / 7.0) / (draws / 7.0);
  EXPECT_LT(chi2, 22.5);  // p ~ 0.001 at 6 dof
  EXPECT_THROW(rng.uniform_index(0), ArgumentError);
}

TEST(Rng, Uniform01AndNormalMoments) {
  Rng rng(5);
  double s = 0, s2 = 0, u = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
    const double v = rng.uniform01();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    u += v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  EXPECT_NEAR(u / n, 0.5, 0.005);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(11);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Rng, SampleWithoutReplacementDistinct) {
  Rng rng(3);
  for (std::size_t k = 0; k <= 20; ++k) {
    const auto s = rng.sample_without_replacement(20, k);
    ASSERT_EQ(s.size(), k);
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), k);
    for (const auto x : s) EXPECT_LT(x, 20u);
  }
  EXPECT_THROW(rng.sample_without_replacement(3, 4), ArgumentError);
}
