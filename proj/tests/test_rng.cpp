#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "albench/rng.hpp"

using namespace albench;

TEST(Rng, SplitMixReferenceValues)
{
    std::uint64_t sm = 0;
    EXPECT_EQ(splitmix64(sm), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(splitmix64(sm), 0x6E789E6AA1B965F4ULL);
}

TEST(Rng, SameSeedSameStream)
{
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        differs |= x != c();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, UniformInUnitInterval)
{
    Rng r(1);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 100000.0, 0.5, 0.01);
}

TEST(Rng, BelowStaysInRangeAndCoversIt)
{
    Rng r(5);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalMoments)
{
    Rng r(9);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, DeriveSeedSeparatesTagsAndIds)
{
    EXPECT_NE(derive_seed(1, "split"), derive_seed(1, "init"));
    EXPECT_NE(derive_seed(1, "train", 1), derive_seed(1, "train", 2));
    EXPECT_NE(derive_seed(1, "train", 1), derive_seed(2, "train", 1));
    EXPECT_EQ(derive_seed(7, "query", 3), derive_seed(7, "query", 3));
    EXPECT_NE(derive_seed(7, "a", 1, 2), derive_seed(7, "a", 2, 1));
}

TEST(Rng, ShufflePrefixIsAPermutation)
{
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i)
        v[static_cast<std::size_t>(i)] = i;
    Rng r(3);
    shuffle(v, r);
    std::set<int> s(v.begin(), v.end());
    EXPECT_EQ(s.size(), 50u);
    EXPECT_EQ(*s.begin(), 0);
    EXPECT_EQ(*s.rbegin(), 49);
}

TEST(Rng, RoundHalfUp)
{
    EXPECT_EQ(round_half_up(0.5), 1u);
    EXPECT_EQ(round_half_up(1.49), 1u);
    EXPECT_EQ(round_half_up(2.5), 3u);
    EXPECT_EQ(round_half_up(0.0), 0u);
}
