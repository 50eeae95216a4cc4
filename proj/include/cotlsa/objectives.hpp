#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cotlsa/lsa_model.hpp"
#include "cotlsa/mc.hpp"
#include "cotlsa/parallel.hpp"
#include "cotlsa/rng.hpp"
#include "cotlsa/task_data.hpp"

namespace cotlsa {

struct LossReport {
  double total = 0.0;
  std::vector<double> per_step;  // k+1 entries
};

struct GradPair {
  Matrix g_v;
  Matrix g_w;
};

struct ReducedGrad {
  Matrix g_v31;
  Matrix g_w13;
  double g_w24 = 0.0;
};

// Teacher-forced CoT loss on one task: Z_0..Z_k carry the ground-truth
// iterates, the target of the last step is w*.
LossReport cot_loss_sample(const TaskInstance& task, const LsaParams& params, std::size_t k, double eta);

// Gradient of cot_loss_sample. Writes the loss into `loss` when given.
GradPair grad_full_sample(const TaskInstance& task, const LsaParams& params, std::size_t k, double eta,
                          LossReport* loss = nullptr);

// Simplified loss ½Σ‖w_i + ṼS(W̃w_i + w24 w*) − w_{i+1}‖² of the reduced model.
LossReport reduced_loss_sample(const TaskInstance& task, const ReducedParams& rp, std::size_t k, double eta);

// g_w24 is left at zero unless train_w24 is set.
ReducedGrad grad_reduced_sample(const TaskInstance& task, const ReducedParams& rp, std::size_t k, double eta,
                                bool train_w24, LossReport* loss = nullptr);

struct McConfig {
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  double eta = 0.4;
  std::size_t batch = 2;
  bool antithetic = false;
};

// In antithetic mode sample p (p < batch/2) draws one task from rng.split(p)
// and pairs it with its negated-w* partner; the pair's two gradients are added
// before accumulation, so odd-in-w* entries cancel exactly. Otherwise task i
// comes from rng.split(i).
struct GradEstimate {
  McEstimate loss;
  MatrixEstimate g_v;
  MatrixEstimate g_w;
};

struct ReducedGradEstimate {
  McEstimate loss;
  MatrixEstimate g_v31;
  MatrixEstimate g_w13;
  McEstimate g_w24;
};

McEstimate cot_loss_mc(const LsaParams& params, const McConfig& cfg, const RngStream& rng,
                       Execution exec = Execution::parallel);
GradEstimate grad_mc(const LsaParams& params, const McConfig& cfg, const RngStream& rng,
                     Execution exec = Execution::parallel);
ReducedGradEstimate grad_reduced_mc(const ReducedParams& rp, const McConfig& cfg, bool train_w24,
                                    const RngStream& rng, Execution exec = Execution::parallel);

// Central differences with step h = 1e-6·max(1, |θ|) per entry.
double fd_step(double theta);
Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& at);
double fd_derivative(const std::function<double(double)>& f, double at);

}  // namespace cotlsa
