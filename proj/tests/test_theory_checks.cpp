#include <gtest/gtest.h>

#include <cmath>

#include "cotlsa/errors.hpp"
#include "cotlsa/theory_checks.hpp"

using namespace cotlsa;

TEST(TheoryChecks, OneStepOptimumExamples) {
  EXPECT_DOUBLE_EQ(one_step_optimum_eta(20, 10), 20.0 / 31.0);
  EXPECT_DOUBLE_EQ(no_cot_lower_bound(20, 10), 55.0 / 31.0);
  EXPECT_DOUBLE_EQ(one_step_optimum_eta(2, 3), 1.0 / 3.0);
  EXPECT_NEAR(no_cot_lower_bound(2, 3), 1.0, 1e-15);
}

TEST(TheoryChecks, LowerBoundAlgebraOnGrid) {
  for (std::size_t d = 1; d <= 30; ++d)
    for (std::size_t n = 1; n <= 60; ++n) {
      const double eta = one_step_optimum_eta(n, d);
      const double dd = static_cast<double>(d), nn = static_cast<double>(n);
      const double expanded = 0.5 * (dd - 2.0 * eta * dd + eta * eta / nn * (nn + dd + 1.0) * dd);
      EXPECT_NEAR(no_cot_lower_bound(n, d), expanded, 1e-12 * expanded);
      EXPECT_NEAR(no_cot_lower_bound(n, d), 0.5 * dd * (dd + 1.0) / (nn + dd + 1.0), 1e-12 * expanded);
    }
}

TEST(TheoryChecks, WishartMomentsPassAndControlFails) {
  const MomentReport good = wishart_moment_check(3, 5, 40000, RngStream(1));
  EXPECT_TRUE(good.pass) << good.max_abs_z_first << " " << good.max_abs_z_second;
  EXPECT_DOUBLE_EQ(good.first_target, 5.0);
  EXPECT_DOUBLE_EQ(good.second_target, 5.0 * 9.0);
  const MomentReport wrong = wishart_moment_check(3, 5, 40000, RngStream(1), 5.0 * 8.0);
  EXPECT_FALSE(wrong.pass);
  EXPECT_GT(wrong.max_abs_z_second, 4.0);
  const Verdict v = moment_verdict(good, 3, 5, 40000);
  EXPECT_TRUE(v.pass);
  EXPECT_EQ(v.to_json().at("pass"), true);
}

TEST(TheoryChecks, NoStepConcentrationEqualsSecondMoment) {
  // k = 0, Λ = I: E[S²] = (1 + (d+1)/n)I, so the relative error is (d+1)/n.
  const std::size_t d = 4, n = 50;
  const ConcentrationReport r =
      concentration_check(d, n, 0, 0.5, Matrix::identity(d), 40000, RngStream(2));
  EXPECT_NEAR(r.rel_error, 5.0 / 50.0, 4.0 * r.mc_stderr + 0.01);
  EXPECT_FALSE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.bound, 0.0);
}

TEST(TheoryChecks, TraceVariantHasNoSingleStepBias) {
  const std::size_t d = 3;
  const Matrix lambda = Matrix::diagonal(std::vector<double>{1.0, 2.0, 3.0});
  const ConcentrationReport r = concentration_check(d, 40, 1, 0.3, lambda, 20000, RngStream(3), 10.0,
                                                    ConcentrationVariant::trace);
  EXPECT_LT(r.rel_error, 4.0 * r.mc_stderr);
}

TEST(TheoryChecks, UnitStepIsDegenerate) {
  const ConcentrationReport r = concentration_check(2, 100, 3, 1.0, Matrix::identity(2), 2000, RngStream(4));
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(std::isfinite(r.rel_error));
}

TEST(TheoryChecks, ConcentrationPassesAtLargeN) {
  const std::size_t d = 4;
  const Matrix lambda = Matrix::diagonal(std::vector<double>{1.0, 0.5, 0.25, 2.0});
  const ConcentrationReport r = concentration_check(d, 4096, 3, 0.5, lambda, 5000, RngStream(5));
  EXPECT_TRUE(r.pass) << r.rel_error << " vs " << r.bound;
  const Matrix gamma = Matrix::identity(d);
  EXPECT_THROW(concentration_check(d, 10, 1, 0.5, lambda, 10, RngStream(6), 10.0, ConcentrationVariant::right),
               DimensionMismatch);
  const ConcentrationReport two = concentration_check(d, 4096, 3, 0.5, lambda, 5000, RngStream(5), 10.0,
                                                      ConcentrationVariant::two_sided, &gamma);
  EXPECT_NEAR(two.rel_error, r.rel_error, 1e-12);
}

TEST(TheoryChecks, StructureFitRecoversCoefficients) {
  const Matrix lambda = Matrix::diagonal(std::vector<double>{1.0, 2.0, 4.0});
  Matrix delta = scale(lambda, 2.0);
  delta += scale(Matrix::identity(3), 3.0 * trace(lambda));
  const StructureFit f = error_structure_fit(delta, lambda);
  ASSERT_EQ(f.coefficients.size(), 2u);
  EXPECT_NEAR(f.coefficients[0], 2.0, 1e-12);
  EXPECT_NEAR(f.coefficients[1], 3.0, 1e-12);
  EXPECT_LT(f.relative_residual, 1e-12);

  const Matrix l4 = Matrix::diagonal(std::vector<double>{1.0, 2.0, 4.0, 8.0});
  const Matrix gamma = Matrix::diagonal(std::vector<double>{3.0, 1.0, 2.0, 5.0});
  Matrix d5 = scale(matmul(l4, gamma), 1.5);
  d5 += scale(gamma, -0.5 * trace(l4));
  const StructureFit g = error_structure_fit(d5, l4, &gamma);
  ASSERT_EQ(g.coefficients.size(), 4u);
  EXPECT_NEAR(g.coefficients[0], 1.5, 1e-10);
  EXPECT_NEAR(g.coefficients[1], -0.5, 1e-10);
  EXPECT_LT(g.relative_residual, 1e-10);
}

TEST(TheoryChecks, DependentBasisIsRejected) {
  EXPECT_THROW(error_structure_fit(Matrix::identity(3), Matrix::identity(3)), RankDeficientBasis);
}
