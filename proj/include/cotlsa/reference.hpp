#pragma once

#include <cstddef>

#include "cotlsa/lsa_model.hpp"
#include "cotlsa/mc.hpp"
#include "cotlsa/objectives.hpp"
#include "cotlsa/task_data.hpp"

// Straightforward serial kernels that materialize every prompt Z_i and apply
// the gradient sums term by term. Kept as the baseline the fast kernels are
// tested and benchmarked against.
namespace cotlsa::reference {

// Dense Z + VZ(ZᵀWZ)/n, last column.
Vector forward_last_token(const PromptSequence& z, const LsaParams& params);

// Σ_i (1/n)(f_i − t_i) z_iᵀ Wᵀ Z_i Z_iᵀ and Σ_i (1/n) Z_i Z_iᵀ Vᵀ (f_i − t_i) z_iᵀ.
GradPair grad_full_sample(const TaskInstance& task, const LsaParams& params, std::size_t k, double eta,
                          LossReport* loss = nullptr);

// Plain serial loop over the batch in index order, one accumulator.
GradEstimate grad_mc(const LsaParams& params, const McConfig& cfg, const RngStream& rng);

}  // namespace cotlsa::reference
