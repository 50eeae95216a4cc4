#include <gtest/gtest.h>

#include "cotlsa/objectives.hpp"
#include "cotlsa/parallel.hpp"
#include "cotlsa/reference.hpp"

using namespace cotlsa;

namespace {

LsaParams random_params(std::uint64_t seed, std::size_t d) {
  RngStream rng(seed);
  LsaParams p = LsaParams::zeros(d);
  p.v = scale(gaussian_matrix(rng, p.d_e(), p.d_e()), 0.3);
  p.w = scale(gaussian_matrix(rng, p.d_e(), p.d_e()), 0.3);
  return p;
}

double rel(const Matrix& a, const Matrix& b) { return max_abs(sub(a, b)) / std::max(max_abs(b), 1e-300); }

}  // namespace

TEST(Parallel, ChunkedReduceFoldsInOrder) {
  const auto total = chunked_reduce<double>(1000, 0.0, [](std::size_t i, double& acc) { acc += 1.0 / (1.0 + i); });
  double chunks = 0.0;
  for (std::size_t c = 0; c < 1000; c += kReduceChunk) {
    double part = 0.0;
    for (std::size_t i = c; i < std::min<std::size_t>(1000, c + kReduceChunk); ++i) part += 1.0 / (1.0 + i);
    chunks += part;
  }
  EXPECT_EQ(total, chunks);
  EXPECT_EQ(chunked_reduce<double>(0, 0.0, [](std::size_t, double& acc) { acc += 1.0; }), 0.0);
}

TEST(Parallel, ThreadCountDoesNotChangeBits) {
  const LsaParams p = random_params(1, 3);
  const McConfig cfg{3, 8, 3, 0.4, 500, false};
  set_thread_count(1);
  const GradEstimate one = grad_mc(p, cfg, RngStream(2));
  for (int threads : {2, 3, 8}) {
    set_thread_count(threads);
    const GradEstimate many = grad_mc(p, cfg, RngStream(2));
    EXPECT_TRUE(one.g_v.mean == many.g_v.mean) << threads;
    EXPECT_TRUE(one.g_w.mean == many.g_w.mean) << threads;
    EXPECT_TRUE(one.g_v.std_error == many.g_v.std_error) << threads;
    EXPECT_EQ(one.loss.mean, many.loss.mean) << threads;
  }
  const GradEstimate serial = grad_mc(p, cfg, RngStream(2), Execution::serial);
  EXPECT_TRUE(one.g_v.mean == serial.g_v.mean);
  EXPECT_TRUE(one.g_w.mean == serial.g_w.mean);
}

TEST(Parallel, FastKernelsMatchReference) {
  for (std::size_t d : {1u, 2u, 4u}) {
    const LsaParams p = random_params(10 + d, d);
    RngStream rng(20 + d);
    for (int t = 0; t < 10; ++t) {
      const TaskInstance task = sample_task(rng, d, 6);
      const GdIterates gd = gd_iterates(task, 0.4, 3);
      for (std::size_t i = 0; i <= 3; ++i) {
        const PromptSequence z = build_prompt(task, gd, i);
        const Vector fast = forward_last_token(z, p);
        const Vector slow = reference::forward_last_token(z, p);
        EXPECT_LE(norm2(vsub(fast, slow)), 1e-12 * std::max(1.0, norm2(slow)));
      }
      LossReport lf, ls;
      const GradPair gf = grad_full_sample(task, p, 3, 0.4, &lf);
      const GradPair gs = reference::grad_full_sample(task, p, 3, 0.4, &ls);
      EXPECT_LT(rel(gf.g_v, gs.g_v), 1e-11);
      EXPECT_LT(rel(gf.g_w, gs.g_w), 1e-11);
      EXPECT_NEAR(lf.total, ls.total, 1e-12 * std::max(1.0, ls.total));
    }
  }
}

TEST(Parallel, BatchEstimateMatchesReference) {
  const LsaParams p = random_params(30, 2);
  for (bool anti : {false, true}) {
    const McConfig cfg{2, 5, 2, 0.4, 200, anti};
    const GradEstimate fast = grad_mc(p, cfg, RngStream(31));
    const GradEstimate slow = reference::grad_mc(p, cfg, RngStream(31));
    EXPECT_LT(rel(fast.g_v.mean, slow.g_v.mean), 1e-10);
    EXPECT_LT(rel(fast.g_w.mean, slow.g_w.mean), 1e-10);
    EXPECT_NEAR(fast.loss.mean, slow.loss.mean, 1e-10 * slow.loss.mean);
    EXPECT_EQ(fast.loss.count, slow.loss.count);
  }
}
