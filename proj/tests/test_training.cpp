#include <gtest/gtest.h>

#include <cmath>

#include "cotlsa/diagnostics.hpp"
#include "cotlsa/errors.hpp"
#include "cotlsa/training.hpp"

using namespace cotlsa;

namespace {

TrainConfig theory_config() {
  TrainConfig c;
  c.d = 3;
  c.n = 8;
  c.k = 3;
  c.mode = TrainMode::theory;
  c.optimizer = OptimizerKind::gradient_flow;
  c.h = 0.01;
  c.batch = 64;
  c.antithetic = true;
  c.iterations = 20;
  c.log_every = 5;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Training, AssumptionInitStaysInBox) {
  RngStream rng(1);
  const Assumption1Init a = init_assumption1(rng, 6, 0.3, InitBasis::standard);
  EXPECT_EQ(a.rp.w24, -1.0);
  EXPECT_TRUE(a.basis == Matrix::identity(6));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_GE(a.rp.v31(i, i), -0.6);
    EXPECT_LE(a.rp.v31(i, i), -0.3);
    EXPECT_GE(a.rp.w13(i, i), 0.3);
    EXPECT_LE(a.rp.w13(i, i), 0.5);
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) EXPECT_EQ(a.rp.v31(i, j), 0.0);
  }
}

TEST(Training, RotatedInitHasPrescribedSpectrum) {
  RngStream rng(2);
  const Assumption1Init a = init_assumption1(rng, 5, 0.2, InitBasis::random_orthogonal);
  const SpectralTrace tr = spectral_trace(a.rp, a.basis);
  EXPECT_LT(tr.off_basis_v, 1e-12);
  EXPECT_LT(tr.off_basis_w, 1e-12);
  for (double l : tr.lambda_v) {
    EXPECT_GE(l, -0.4 - 1e-12);
    EXPECT_LE(l, -0.2 + 1e-12);
  }
  EXPECT_LT(max_abs(sub(matmul(transpose(a.basis), a.basis), Matrix::identity(5))), 1e-12);
}

TEST(Training, SigmaOutsideRangeIsRejected) {
  RngStream rng(3);
  EXPECT_THROW(init_assumption1(rng, 2, 0.0, InitBasis::standard), BadSigma);
  EXPECT_THROW(init_assumption1(rng, 2, 0.6, InitBasis::standard), BadSigma);
  WarningCapture cap;
  check_sigma(0.01, 0.4, 5);
  EXPECT_FALSE(cap.messages().empty());
  check_sigma(0.3, 0.4, 5);
  EXPECT_EQ(cap.messages().size(), 1u);
}

TEST(Training, RandomInitDrawsVThenW) {
  RngStream a(4), b(4);
  const LsaParams p = init_random(a, 2, 0.5);
  for (double x : p.v.data()) EXPECT_EQ(x, 0.5 * b.normal());
  for (double x : p.w.data()) EXPECT_EQ(x, 0.5 * b.normal());
}

TEST(Training, ZeroIterationsLogsInitialState) {
  TrainConfig c = theory_config();
  c.iterations = 0;
  const TrainInit init = make_init(c);
  const TrainResult r = train(c, init);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].step, 0u);
  EXPECT_TRUE(r.params.v == init.params.v);
}

TEST(Training, TheoryModeKeepsPatternAndZeroBlocks) {
  const TrainConfig c = theory_config();
  const TrainInit init = make_init(c);
  const TrainResult r = train(c, init);
  EXPECT_EQ(r.records.size(), 5u);
  EXPECT_EQ(r.records.back().step, 20u);
  EXPECT_LE(r.max_zero_block_ratio, 1e-12);
  const ReducedParams rp = extract_reduced(r.params);
  EXPECT_EQ(rp.w24, -1.0);
  EXPECT_TRUE(embed_reduced(rp).v == r.params.v);
  EXPECT_TRUE(embed_reduced(rp).w == r.params.w);
  const McConfig common{c.d, c.n, c.k, c.eta, 20000, true};
  EXPECT_LT(cot_loss_mc(r.params, common, RngStream(77)).mean, cot_loss_mc(init.params, common, RngStream(77)).mean);
}

TEST(Training, RunsAreReproducible) {
  const TrainConfig c = theory_config();
  const TrainResult a = train(c, make_init(c));
  const TrainResult b = train(c, make_init(c));
  EXPECT_TRUE(a.params.v == b.params.v);
  EXPECT_TRUE(a.params.w == b.params.w);
}

TEST(Training, AdamStepMatchesHandComputation) {
  Adam adam(2, 0.1, 0.9, 0.999, 1e-8);
  std::vector<double> p{1.0, -1.0};
  adam.step(p, std::vector<double>{2.0, -0.5});
  // First bias-corrected step is lr·g/(|g| + eps).
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -1.0 + 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Training, ExperimentModeLowersLoss) {
  TrainConfig c;
  c.d = 2;
  c.n = 6;
  c.k = 2;
  c.batch = 64;
  c.iterations = 60;
  c.lr = 0.01;
  c.log_every = 60;
  c.seed = 9;
  c.eval_tasks = 200;
  const TrainResult r = train(c, make_init(c));
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_LT(r.records.back().cot_loss, r.records.front().cot_loss);
  EXPECT_GE(r.records.back().eval_loss, 0.0);
  EXPECT_LT(r.records.front().eval_loss, 0.0);
}

TEST(Training, DivergenceReportsLastGoodParameters) {
  TrainConfig c = theory_config();
  c.h = 1e6;
  c.iterations = 50;
  std::size_t bad_step = 999;
  TrainHooks hooks;
  hooks.on_diverged = [&](const LsaParams& p, std::size_t t) {
    bad_step = t;
    EXPECT_TRUE(all_finite(p.v));
  };
  EXPECT_THROW(train(c, make_init(c), hooks), Diverged);
  EXPECT_LT(bad_step, 50u);
}

TEST(Training, ValidationRejectsBadConfigs) {
  TrainConfig c;
  c.batch = 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.antithetic = true;
  c.batch = 7;
  EXPECT_THROW(validate(c), ConfigError);
  c = TrainConfig{};
  c.eta = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Training, TrajectoryColumnsMatchFields) {
  TrajectoryRecord r;
  r.spectrum.lambda_v = {-0.1};
  r.spectrum.lambda_w = {0.9};
  EXPECT_EQ(trajectory_csv_fields(r, true).size(), trajectory_csv_columns().size());
  EXPECT_EQ(trajectory_csv_columns().front(), "step");
}
