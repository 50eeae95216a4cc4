#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cotlsa/lsa_model.hpp"
#include "cotlsa/mc.hpp"
#include "cotlsa/parallel.hpp"
#include "cotlsa/rng.hpp"
#include "cotlsa/task_data.hpp"

namespace cotlsa {

struct Rollout {
  std::vector<Vector> w_hats;           // ŵ_1 .. ŵ_{k'+1}
  std::vector<double> per_step_pred_error;  // ‖ŵ_i − w_i‖, empty when no reference η was given
  double final_error = 0.0;             // ‖ŵ_{k'+1} − w*‖
  Vector final_token;                   // full output token of the last forward pass
};

// Autoregressive generation from Z₀: each output token is appended verbatim,
// ⋆-entries included. Per-step errors are measured against gd_iterates(task,
// ref_eta, k') when ref_eta > 0.
Rollout cot_rollout(const TaskInstance& task, const LsaParams& params, std::size_t k_prime,
                    double ref_eta = 0.0);

// Same rollout with the x/y slots of every generated token zeroed before it is
// appended. Returns the largest weight-slice deviation from the verbatim rollout.
double star_entry_sensitivity(const TaskInstance& task, const LsaParams& params, std::size_t k_prime);

// ½‖f(Ẑ_{k'})[:,−1] − (0, 0, w*, 1)‖² for one task.
double eval_loss_sample(const TaskInstance& task, const LsaParams& params, std::size_t k_prime);

// Task i is drawn from rng.split(i).
McEstimate eval_loss_mc(const LsaParams& params, std::size_t n, std::size_t k_prime, std::size_t tasks,
                        const RngStream& rng, Execution exec = Execution::parallel);

// x_i ~ N(0, cov). When eta > 0, warns if the spectrum of cov leaves
// [δ/η, (2−δ)/η] (or (0, 2/η) when delta == 0).
McEstimate eval_loss_ood_mc(const LsaParams& params, const Matrix& cov, std::size_t n,
                            std::size_t k_prime, std::size_t tasks, const RngStream& rng,
                            double eta = 0.0, double delta = 0.0,
                            Execution exec = Execution::parallel);

// True when every eigenvalue of cov lies in [δ/η, (2−δ)/η].
bool in_ood_window(const Matrix& cov, double eta, double delta);

// Splits the reduced-model rollout error into the GD error w_{k'+1} − w* and
// the propagated one-step prediction errors (I + ṼSW̃)^i Δ^pred_{k'−i+1}.
struct ErrorDecomposition {
  double final_error = 0.0;        // from the full-model rollout of embed_reduced(rp)
  double gd_error = 0.0;           // ‖w_{k'+1} − w*‖
  std::vector<double> propagated;  // ‖(I + ṼSW̃)^i Δ^pred_{k'−i+1}‖, i = 0..k'
  double bound = 0.0;              // gd_error + Σ propagated
  double identity_residual = 0.0;  // ‖(ŵ_{k'+1} − w*) − (vector sum)‖
};

ErrorDecomposition error_decomposition(const TaskInstance& task, const ReducedParams& rp, double eta,
                                       std::size_t k_prime);

struct EvalRow {
  std::string run_id;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t k_train = 0;
  std::size_t k_prime = 0;
  double eta = 0.0;
  std::string sigma_id;
  std::size_t n_tasks = 0;
  double loss_mean = 0.0;
  double loss_stderr = 0.0;
  double wall_ms = 0.0;
};

std::vector<std::string> eval_csv_columns();
std::vector<std::string> eval_csv_fields(const EvalRow& row);

}  // namespace cotlsa
