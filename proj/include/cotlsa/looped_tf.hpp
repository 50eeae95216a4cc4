#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cotlsa/linalg.hpp"
#include "cotlsa/mc.hpp"
#include "cotlsa/parallel.hpp"
#include "cotlsa/rng.hpp"

namespace cotlsa {

// W = [[A, 0], [0, 0]], V = [[0, 0], [0, 1]], applied `loops` times.
struct LoopedParams {
  Matrix a;
  std::size_t loops = 1;
};

struct IclTask {
  Matrix x;  // d × n
  Vector x_query;
  Vector w_star;
  Vector y;
  double y_query = 0.0;

  std::size_t d() const noexcept { return x.rows(); }
  std::size_t n() const noexcept { return x.cols(); }
};

IclTask make_icl_task(Matrix x, Vector x_query, Vector w_star);

// Draw order: X column by column, x_query, then w*.
IclTask sample_icl_task(RngStream& rng, std::size_t d, std::size_t n);

// Iterates Z ← Z − (1/n)·V Z M Zᵀ W Z on the (d+1)×(n+1) prompt and returns
// −Z[d, n]. M masks the query column out of the keys, so only the n examples
// attend; the query label slot starts at 0.
double loop_forward(const IclTask& task, const LoopedParams& params);

// E[(TF_L − y_query)²] from simulated prompts; task i from rng.split(i).
McEstimate loop_loss_mc(const LoopedParams& params, std::size_t d, std::size_t n, std::size_t tasks,
                        const RngStream& rng, Execution exec = Execution::parallel);

// E[tr((I − SA)^{2L})] with S = sample_wishart_s(rng.split(i), d, n).
McEstimate loop_loss_closed_mc(const LoopedParams& params, std::size_t d, std::size_t n, std::size_t tasks,
                               const RngStream& rng, Execution exec = Execution::parallel);

// Gradient of the trace loss, E[−2L·S(I − AᵀS)^{2L−1}], on the same S draws as
// loop_loss_closed_mc.
MatrixEstimate loop_grad_mc(const LoopedParams& params, std::size_t d, std::size_t n, std::size_t tasks,
                            const RngStream& rng, Execution exec = Execution::parallel);

// The symmetrized sum −Σ_{i=0}^{2L−1} E[(I − SA)^i S (I − SA)^{2L−1−i}]. It
// agrees with loop_grad_mc when A commutes with S (e.g. A ∝ I) and differs
// otherwise.
MatrixEstimate loop_grad_sum_mc(const LoopedParams& params, std::size_t d, std::size_t n, std::size_t tasks,
                                const RngStream& rng, Execution exec = Execution::parallel);

// Same per-sample S draws and formula as the MC routines, with S supplied.
double loop_closed_sample(const Matrix& a, const Matrix& s, std::size_t loops);
Matrix loop_grad_sample(const Matrix& a, const Matrix& s, std::size_t loops);

struct LoopRecord {
  std::size_t step = 0;
  double loss_closed = 0.0;
  double loss_direct = -1.0;  // negative when not computed
  double stderr_closed = 0.0;
  double op_norm_i_minus_a = 0.0;
};

struct LoopFlowConfig {
  std::size_t d = 8;
  std::size_t n = 1024;
  std::size_t loops = 4;
  double h = 0.05;
  std::size_t steps = 300;
  std::size_t batch = 256;       // S draws per gradient step
  std::size_t eval_tasks = 2000; // S draws for the logged closed loss (fixed stream)
  std::size_t direct_tasks = 0;  // simulated prompts for loss_direct, 0 disables
  std::size_t log_every = 10;
  Execution exec = Execution::parallel;
};

struct LoopTrajectory {
  std::vector<LoopRecord> records;
  Matrix final_a;
};

// Euler steps A ← A − h·ĝ(A). Step t uses rng.split(t) for its gradient; every
// logged loss uses the same evaluation draws. Throws Diverged.
LoopTrajectory loop_gradient_flow(const Matrix& a0, const LoopFlowConfig& cfg, const RngStream& rng);

std::vector<std::string> loop_csv_columns();
std::vector<std::string> loop_csv_fields(const LoopRecord& r);

}  // namespace cotlsa
