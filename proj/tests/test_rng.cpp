#include <gtest/gtest.h>

#include <cmath>

#include "cotlsa/rng.hpp"

using namespace cotlsa;

TEST(Rng, SplitMixMatchesPublishedVector) {
  // First output of the reference splitmix64 generator seeded with 1234567.
  EXPECT_EQ(splitmix64(1234567), 6457827717110365317ULL);
}

TEST(Rng, FrozenStreamValues) {
  RngStream r(42);
  EXPECT_EQ(r.next_u64(), 1546998764402558742ULL);
  EXPECT_EQ(r.next_u64(), 6990951692964543102ULL);
  EXPECT_EQ(r.next_u64(), 12544586762248559009ULL);

  RngStream g(42);
  EXPECT_DOUBLE_EQ(g.normal(), -0.303263064678738);
  EXPECT_DOUBLE_EQ(g.normal(), 0.28846173882942383);
  EXPECT_DOUBLE_EQ(g.normal(), 1.3438117634372806);
}

TEST(Rng, DeriveSeedMatchesSplit) {
  EXPECT_EQ(derive_seed(42, 3), 52614755539873809ULL);
  EXPECT_EQ(RngStream(42).split(3).seed(), derive_seed(42, 3));
}

TEST(Rng, SameSeedSameSequence) {
  RngStream a(7), b(7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  RngStream a(9), b(9);
  (void)a.split(5);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(RngStream(9).split(0).seed(), RngStream(9).split(1).seed());
}

TEST(Rng, UniformInUnitInterval) {
  RngStream r(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMomentsOverMillionDraws) {
  RngStream r(2024);
  const int n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_LT(std::abs(var - 1.0), 0.01);
}

TEST(Rng, ChiSquareMoments) {
  // Mean dof, variance 2·dof; checked at 4 standard errors.
  for (double dof : {0.5, 1.0, 3.0, 17.0}) {
    RngStream r(static_cast<std::uint64_t>(dof * 100));
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = r.chi_square(dof);
      ASSERT_GE(x, 0.0);
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    EXPECT_NEAR(mean, dof, 4.0 * std::sqrt(2.0 * dof / n)) << "dof " << dof;
    EXPECT_NEAR(var, 2.0 * dof, 0.05 * 2.0 * dof) << "dof " << dof;
  }
}
