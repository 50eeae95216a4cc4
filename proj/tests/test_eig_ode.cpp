#include <gtest/gtest.h>

#include <cmath>

#include "cotlsa/eig_ode.hpp"
#include "cotlsa/errors.hpp"

using namespace cotlsa;

TEST(EigOde, FixedPointAtConstruction) {
  for (double eta : {0.2, 0.4, 0.8})
    for (std::size_t k : {0u, 5u, 20u}) {
      const EigRhs r = eig_ode_rhs(-eta, 1.0, eta, k);
      EXPECT_NEAR(r.d_lambda_v, 0.0, 1e-12) << eta << " " << k;
      EXPECT_NEAR(r.d_lambda_w, 0.0, 1e-12) << eta << " " << k;
    }
}

TEST(EigOde, RightHandSideByHand) {
  // η = 1/2, k = 1, λV = −1, λW = 1/2:
  // dλV = −[2·¼ + 4·¼ + ¼/(½·1.5)]·(−1) + (½/1.5)·½ − 1 = 11/6 + 1/6 − 1 = 1
  // dλW = (2 − 2)·1·½ + (½/(½·1.5))·½ + (½/1.5)·(−1) = 1/3 − 1/3 = 0
  const EigRhs r = eig_ode_rhs(-1.0, 0.5, 0.5, 1);
  EXPECT_NEAR(r.d_lambda_v, 1.0, 1e-14);
  EXPECT_NEAR(r.d_lambda_w, 0.0, 1e-14);
}

TEST(EigOde, ConvergesFromAssumptionBox) {
  const double eta = 0.4, sigma = 0.3;
  const std::size_t k = 5;
  std::vector<double> v0, w0;
  for (int j = 0; j < 5; ++j) {
    v0.push_back(-2.0 * sigma + sigma * j / 4.0);
    w0.push_back(sigma + (0.5 - sigma) * j / 4.0);
  }
  const EigTrajectory t = integrate_eig_ode(v0, w0, eta, k, 1e-3, 200.0);
  ASSERT_EQ(t.final_v.size(), 5u);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(t.final_v[j], -eta, 1e-3);
    EXPECT_NEAR(t.final_w[j], 1.0, 1e-3);
    EXPECT_GT(t.hit_time[j], 0.0);
  }
  EXPECT_EQ(t.lambda_v.size(), 5u);
  EXPECT_EQ(t.lambda_v[0].size(), t.times.size());
  EXPECT_DOUBLE_EQ(t.lambda_v[0].front(), v0[0]);
}

TEST(EigOde, BlowUpIsReported) {
  EXPECT_THROW(integrate_eig_ode({-50.0}, {50.0}, 0.4, 20, 1.0, 100.0), Diverged);
}
