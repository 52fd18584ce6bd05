#include <set>

#include <gtest/gtest.h>

#include "locpoly/multi_index.hpp"
#include "oracles.hpp"

using namespace locpoly;

TEST(MultiIndex, OrderIsSumOfExponents) {
  MultiIndex a{2, 0, 3};
  EXPECT_EQ(a.order(), 5);
  EXPECT_EQ(a.dimension(), 3);
  EXPECT_DOUBLE_EQ(a.factorial(), 2.0 * 6.0);
}

TEST(MultiIndex, RejectsNegativeExponent) { EXPECT_THROW(MultiIndex({1, -1}), Error); }

TEST(MultiIndex, FactorialIsPerCoordinate) {
  // (1,1)! = 1, whereas |(1,1)|! = 2.
  EXPECT_DOUBLE_EQ(MultiIndex({1, 1}).factorial(), 1.0);
  EXPECT_DOUBLE_EQ(MultiIndex({3}).factorial(), 6.0);
  EXPECT_DOUBLE_EQ(MultiIndex::zero(4).factorial(), 1.0);
}

TEST(EnumerateBasis, ConstantBasis) {
  auto b = enumerate_basis(1, 0);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0], MultiIndex({0}));
}

TEST(EnumerateBasis, TwoDimensionalQuadratic) {
  auto b = enumerate_basis(2, 2);
  const std::vector<MultiIndex> expected{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  ASSERT_EQ(b.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(b[i], expected[i]) << i;
}

TEST(EnumerateBasis, ThreeDimensionalQuartic) { EXPECT_EQ(enumerate_basis(3, 4).size(), 35u); }

TEST(EnumerateBasis, MatchesBruteForceAndPascal) {
  for (int d = 1; d <= 5; ++d)
    for (int p = 0; p <= 5; ++p) {
      const auto basis = enumerate_basis(d, p);
      EXPECT_EQ(basis.size(), oracle::pascal(p + d, d)) << "d=" << d << " p=" << p;
      EXPECT_EQ(binomial(p + d, d), oracle::pascal(p + d, d));
      const auto brute = oracle::brute_force_basis(d, p);
      ASSERT_EQ(brute.size(), basis.size());
      std::set<std::vector<int>> seen;
      for (std::size_t i = 0; i < brute.size(); ++i) {
        EXPECT_EQ(basis[i].exponents(), brute[i]);
        EXPECT_TRUE(seen.insert(basis[i].exponents()).second) << "duplicate " << basis[i].to_string();
        EXPECT_EQ(basis.index_of(basis[i]), i);
      }
    }
}

TEST(EnumerateBasis, IndexOfMissingReturnsSize) {
  auto b = enumerate_basis(2, 2);
  EXPECT_EQ(b.index_of(MultiIndex({3, 0})), b.size());
  EXPECT_EQ(b.index_of(MultiIndex({0, 0, 0})), b.size());
}

TEST(EnumerateBasis, RejectsBadArguments) {
  EXPECT_THROW(enumerate_basis(0, 2), Error);
  EXPECT_THROW(enumerate_basis(2, -1), Error);
}
