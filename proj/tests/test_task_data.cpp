#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cotlsa/diagnostics.hpp"
#include "cotlsa/errors.hpp"
#include "cotlsa/task_data.hpp"

using namespace cotlsa;

namespace {

double rel(std::span<const double> a, std::span<const double> b) {
  return norm2(vsub(a, b)) / std::max(norm2(b), 1e-300);
}

}  // namespace

TEST(TaskData, LabelsFromInjectedValues) {
  const TaskInstance t = make_task(Matrix(1, 1, {3.0}), Vector{2.0});
  ASSERT_EQ(t.y.size(), 1u);
  EXPECT_DOUBLE_EQ(t.y[0], 6.0);
  EXPECT_DOUBLE_EQ(t.s(0, 0), 9.0);
}

TEST(TaskData, ShapesAndExactLabels) {
  RngStream rng(1);
  const TaskInstance t = sample_task(rng, 10, 20);
  EXPECT_EQ(t.x.rows(), 10u);
  EXPECT_EQ(t.x.cols(), 20u);
  EXPECT_EQ(t.w_star.size(), 10u);
  EXPECT_EQ(t.y.size(), 20u);
  const Vector y = matvec_transposed(t.x, t.w_star);
  for (std::size_t j = 0; j < 20; ++j) EXPECT_EQ(t.y[j], y[j]);
  const Matrix s = scale(matmul(t.x, transpose(t.x)), 1.0 / 20.0);
  EXPECT_LT(frobenius_norm(sub(s, t.s)), 1e-14);
  EXPECT_EQ(t.s, transpose(t.s));
}

TEST(TaskData, DrawOrderIsColumnsThenWeights) {
  RngStream a(2);
  const TaskInstance t = sample_task(a, 2, 3);
  RngStream b(2);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(t.x(i, j), b.normal());
  EXPECT_DOUBLE_EQ(t.w_star[0], b.normal());
}

TEST(TaskData, MeanTraceOfS) {
  const std::size_t d = 5, n = 10, tasks = 10000;
  RngStream rng(3);
  double sum = 0.0;
  for (std::size_t i = 0; i < tasks; ++i) {
    RngStream local = rng.split(i);
    sum += trace(sample_task(local, d, n).s) / static_cast<double>(d);
  }
  const double tol = 3.0 * std::sqrt(2.0 / static_cast<double>(n * tasks * d));
  EXPECT_NEAR(sum / static_cast<double>(tasks), 1.0, tol);
}

TEST(TaskData, CovarianceTasks) {
  const std::size_t d = 3, n = 10, tasks = 5000;
  const Matrix cov = scale(Matrix::identity(d), 2.5);
  RngStream rng(4);
  Matrix mean(d, d);
  for (std::size_t i = 0; i < tasks; ++i) {
    RngStream local = rng.split(i);
    const TaskInstance t = sample_task_cov(local, d, n, cov);
    const Vector y = matvec_transposed(t.x, t.w_star);
    for (std::size_t j = 0; j < n; ++j) ASSERT_EQ(t.y[j], y[j]);
    mean += t.s;
  }
  mean *= 1.0 / static_cast<double>(tasks);
  for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(mean(i, i), 2.5, 0.05 * 2.5);

  RngStream bad(5);
  EXPECT_THROW(sample_task_cov(bad, 2, 4, Matrix(2, 2, {1.0, 0.3, 0.0, 1.0})), NotSPD);
}

TEST(TaskData, IdentityCovarianceMatchesPlainSampling) {
  RngStream a(6), b(6);
  const TaskInstance p = sample_task(a, 3, 4);
  const TaskInstance c = sample_task_cov(b, 3, 4, Matrix::identity(3));
  EXPECT_LT(frobenius_norm(sub(p.x, c.x)), 1e-15);
  EXPECT_EQ(p.w_star, c.w_star);
}

TEST(TaskData, AntitheticPartner) {
  RngStream rng(7);
  const TaskInstance t = sample_task(rng, 3, 5);
  const TaskInstance a = antithetic_partner(t);
  EXPECT_EQ(a.x, t.x);
  EXPECT_EQ(a.s, t.s);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.w_star[i], -t.w_star[i]);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(a.y[j], -t.y[j]);
}

TEST(TaskData, FirstIterateIsOneScaledStep) {
  RngStream rng(8);
  const TaskInstance t = sample_task(rng, 4, 6);
  const GdIterates gd = gd_iterates(t, 0.3, 0);
  ASSERT_EQ(gd.iters.size(), 2u);
  for (double v : gd.iters[0]) EXPECT_EQ(v, 0.0);
  const Vector expect = matvec(scale(t.s, 0.3), t.w_star);
  EXPECT_LT(rel(gd.iters[1], expect), 1e-14);
}

TEST(TaskData, RecursionMatchesClosedForm) {
  RngStream rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform() * 10);
    const std::size_t n = d + static_cast<std::size_t>(rng.uniform() * 20);
    const std::size_t k = static_cast<std::size_t>(rng.uniform() * 41);
    const double eta = 0.1 + 0.3 * rng.uniform();
    RngStream local = rng.split(static_cast<std::uint64_t>(trial));
    const TaskInstance t = sample_task(local, d, n);
    const GdIterates gd = gd_iterates(t, eta, k);
    for (std::size_t i = 1; i <= k + 1; ++i) {
      const Vector closed = gd_closed_form(t, eta, i);
      if (norm2(closed) > 1e-12) worst = std::max(worst, rel(gd.iters[i], closed));
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(TaskData, IteratesContractAtSpectralRate) {
  RngStream rng(10);
  const std::size_t d = 5, n = 400;
  const TaskInstance t = sample_task(rng, d, n);
  const double eta = 0.4;
  const SymmetricEigen e = symmetric_eigen(t.s);
  double rho = 0.0;
  for (double l : e.values) rho = std::max(rho, std::abs(1.0 - eta * l));
  ASSERT_LT(rho, 1.0);
  const GdIterates gd = gd_iterates(t, eta, 200);
  for (std::size_t k : {10u, 20u, 40u}) {
    const double err = rel(gd.iters[k], t.w_star);
    EXPECT_LE(err, std::pow(rho, static_cast<double>(k)) * (1.0 + 1e-9)) << "k " << k;
  }
  EXPECT_LT(rel(gd.iters[200], t.w_star), 1e-13);
}

TEST(TaskData, PromptLayoutAtStepZero) {
  RngStream rng(11);
  const TaskInstance t = sample_task(rng, 3, 4);
  const GdIterates gd = gd_iterates(t, 0.4, 2);
  const PromptSequence z = build_prompt(t, gd, 0);
  EXPECT_EQ(z.d_e(), 8u);
  EXPECT_EQ(z.tokens.rows(), 8u);
  EXPECT_EQ(z.width(), 5u);
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z.tokens(i, j), t.x(i, j));
    EXPECT_EQ(z.tokens(3, j), t.y[j]);
    for (std::size_t i = 4; i < 8; ++i) EXPECT_EQ(z.tokens(i, j), 0.0);
  }
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(z.tokens(i, 4), 0.0);
  EXPECT_EQ(z.tokens(7, 4), 1.0);
}

TEST(TaskData, HandBuiltPromptAtDimensionOne) {
  // x = 2, w* = 3, η = 0.25: y = 6, S = 4, w1 = ηSw* = 3.
  const TaskInstance t = make_task(Matrix(1, 1, {2.0}), Vector{3.0});
  const GdIterates gd = gd_iterates(t, 0.25, 1);
  const PromptSequence z = build_prompt(t, gd, 1);
  const Matrix expect(4, 3, {2.0, 0.0, 0.0,   //
                             6.0, 0.0, 0.0,   //
                             0.0, 0.0, 3.0,   //
                             0.0, 1.0, 1.0});
  EXPECT_EQ(z.tokens, expect);
}

TEST(TaskData, WeightColumnsEndInOne) {
  RngStream rng(12);
  const TaskInstance t = sample_task(rng, 4, 5);
  const GdIterates gd = gd_iterates(t, 0.4, 6);
  const PromptSequence z = build_prompt(t, gd, 6);
  for (std::size_t c = 5; c < z.width(); ++c) EXPECT_EQ(z.tokens(9, c), 1.0);
  for (std::size_t m = 0; m <= 6; ++m) {
    const Vector slice = weight_slice(z.tokens.col(5 + m), 4);
    EXPECT_EQ(slice, gd.iters[m]);
  }
  EXPECT_THROW(build_prompt(t, gd, 7), StepOutOfRange);
}

TEST(TaskData, TargetTokens) {
  RngStream rng(13);
  const TaskInstance t = sample_task(rng, 3, 4);
  const GdIterates gd = gd_iterates(t, 0.4, 3);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(weight_slice(target_token(gd, i, t.w_star), 3), gd.iters[i + 1]);
  const Vector last = target_token(gd, 3, t.w_star);
  EXPECT_EQ(weight_slice(last, 3), t.w_star);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(last[i], 0.0);
  EXPECT_EQ(last[7], 1.0);
  EXPECT_THROW(target_token(gd, 4, t.w_star), StepOutOfRange);
}

TEST(TaskData, WishartSamplerMoments) {
  // E[S] = I and E[S²] = (1 + (d+1)/n)I for S = XXᵀ/n.
  const std::size_t d = 4, n = 9, samples = 40000;
  RngStream rng(14);
  Matrix m1(d, d), m2(d, d);
  for (std::size_t i = 0; i < samples; ++i) {
    RngStream local = rng.split(i);
    const Matrix s = sample_wishart_s(local, d, n);
    m1 += s;
    m2 += matmul(s, s);
  }
  m1 *= 1.0 / samples;
  m2 *= 1.0 / samples;
  const double second = 1.0 + (d + 1.0) / n;
  for (std::size_t i = 0; i < d; ++i) {
    EXPECT_NEAR(m1(i, i), 1.0, 0.02);
    EXPECT_NEAR(m2(i, i), second, 0.03 * second);
  }
}

TEST(TaskData, OodCovarianceWindow) {
  RngStream rng(15);
  const double eta = 0.4, delta = 0.5;
  for (int t = 0; t < 10; ++t) {
    const Matrix cov = sample_ood_covariance(rng, 6, eta, delta);
    EXPECT_LT(frobenius_norm(sub(cov, transpose(cov))), 1e-12);
    const SymmetricEigen e = symmetric_eigen(cov);
    EXPECT_GE(e.values.front(), delta / eta - 1e-9);
    EXPECT_LE(e.values.back(), (2.0 - delta) / eta + 1e-9);
  }
  EXPECT_THROW(sample_ood_covariance(rng, 3, eta, 1.5), Error);
  WarningCapture cap;
  (void)sample_ood_covariance(rng, 3, eta, 0.05);
  EXPECT_TRUE(cap.contains("delta"));
}

TEST(TaskData, EtaWarningOnly) {
  WarningCapture cap;
  check_eta(0.4);
  EXPECT_TRUE(cap.messages().empty());
  check_eta(0.95);
  EXPECT_EQ(cap.messages().size(), 1u);
}

TEST(TaskData, DumpRoundTrip) {
  RngStream rng(16);
  std::vector<TaskInstance> tasks;
  std::vector<std::uint64_t> seeds{16, 17};
  tasks.push_back(sample_task(rng, 3, 4));
  tasks.push_back(sample_task(rng, 3, 4));
  std::stringstream buf;
  write_task_dump(buf, tasks, seeds);
  std::vector<std::uint64_t> back_seeds;
  const auto back = read_task_dump(buf, &back_seeds);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back_seeds, seeds);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].x, tasks[i].x);
    EXPECT_EQ(back[i].w_star, tasks[i].w_star);
    EXPECT_EQ(back[i].y, tasks[i].y);
  }
}
