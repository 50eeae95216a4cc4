#pragma once

#include <cstddef>
#include <span>

#include "cotlsa/linalg.hpp"
#include "cotlsa/task_data.hpp"

namespace cotlsa {

// Full (V, W) pair acting on d_e = 2d+2 dimensional tokens.
struct LsaParams {
  std::size_t d = 0;
  Matrix v;
  Matrix w;

  std::size_t d_e() const noexcept { return 2 * d + 2; }
  static LsaParams zeros(std::size_t d);
};

// Token rows split into four groups: x (d rows), y (1), w (d), indicator (1).
// Blocks are addressed 1-based as in (V_ij, W_ij), i, j in 1..4.
struct BlockRange {
  std::size_t row0 = 0;
  std::size_t rows = 0;
  std::size_t col0 = 0;
  std::size_t cols = 0;
};

BlockRange block_range(std::size_t d, int bi, int bj);
Matrix get_block(const Matrix& m, const BlockRange& r);
void set_block(Matrix& m, const BlockRange& r, const Matrix& values);

// The three dynamically relevant blocks: Ṽ = V₃₁, W̃ = W₁₃ and the scalar w₂₄.
struct ReducedParams {
  Matrix v31;
  Matrix w13;
  double w24 = -1.0;

  std::size_t d() const noexcept { return v31.rows(); }
};

// Gram matrix ZZᵀ of a token matrix.
Matrix token_gram(const Matrix& tokens);

// Gram of the n data columns (x_j, y_j, 0, 0) of a prompt.
Matrix data_gram(const TaskInstance& task);

// g += z zᵀ.
void add_outer(Matrix& g, std::span<const double> z);

// z + V·G·W·z/n with G = ZZᵀ. All forward passes go through this form; the
// rollout and the loss keep G up to date with rank-one updates.
Vector forward_from_gram(const LsaParams& params, const Matrix& gram, std::span<const double> z,
                         std::size_t n);

// Last column of Z + VZ(ZᵀWZ)/n. The normalizer is the example count n.
Vector forward_last_token(const PromptSequence& z, const LsaParams& params);

// w_i + Ṽ·S·(W̃·w_i + w24·w*).
Vector reduced_forward(std::span<const double> w_i, const TaskInstance& task, const ReducedParams& rp);

// V₃₁ = −ηI, W₁₃ = I, w₂₄ = −1, zero elsewhere.
LsaParams construct_multistep(std::size_t d, double eta);

ReducedParams extract_reduced(const LsaParams& params);
LsaParams embed_reduced(const ReducedParams& rp);

// Entries allowed to be nonzero by the trained pattern: the diagonals of V₃₁
// and W₁₃ and the scalar w₂₄.
bool on_diag_pattern(std::size_t d, bool is_v, std::size_t row, std::size_t col);
// Entries of the full blocks V₃₁, W₁₃ and w₂₄.
bool on_block_pattern(std::size_t d, bool is_v, std::size_t row, std::size_t col);

struct PatternResidual {
  double off_pattern_mass = 0.0;  // squared-Frobenius share outside the diagonal pattern
  double product_error = 0.0;     // ‖V₃₁W₁₃ + ηI‖_F / √d
  double scale_error = 0.0;       // ‖W₁₃ + w₂₄ I‖_F / √d
};

PatternResidual pattern_residual(const LsaParams& params, double eta);

}  // namespace cotlsa
