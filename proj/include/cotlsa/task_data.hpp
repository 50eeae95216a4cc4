#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotlsa/linalg.hpp"
#include "cotlsa/rng.hpp"

namespace cotlsa {

// One noiseless in-context regression task: y_j = x_jᵀ w*.
struct TaskInstance {
  Matrix x;      // d × n, column j is x_j
  Vector w_star;
  Vector y;      // length n
  Matrix s;      // XXᵀ/n, cached at construction

  std::size_t d() const noexcept { return x.rows(); }
  std::size_t n() const noexcept { return x.cols(); }
};

// Builds a task from explicit inputs; computes y = Xᵀw* and S = XXᵀ/n.
TaskInstance make_task(Matrix x, Vector w_star);

// X drawn column by column (all of x_1, then x_2, ...), then w*.
TaskInstance sample_task(RngStream& rng, std::size_t d, std::size_t n);

// x_j ~ N(0, cov), w* ~ N(0, I). Throws NotSPD.
TaskInstance sample_task_cov(RngStream& rng, std::size_t d, std::size_t n, const Matrix& cov);

// Same X, weights and labels negated. Used for antithetic pairs.
TaskInstance antithetic_partner(const TaskInstance& task);

// Wishart sample S = L Lᵀ / n via the Bartlett decomposition: L lower
// triangular, L_ii = sqrt(χ²_{n−i}) (0-based i), L_ij ~ N(0,1) for i > j.
// Same law as XXᵀ/n with x_j ~ N(0, I_d), at O(d²) draws instead of O(dn).
Matrix sample_wishart_s(RngStream& rng, std::size_t d, std::size_t n);

// Covariance U·diag(λ)·Uᵀ with U random orthogonal and λ_j uniform on
// [δ/η, (2−δ)/η]. Warns when δ < 0.1.
Matrix sample_ood_covariance(RngStream& rng, std::size_t d, double eta, double delta);

// Emits a warning when eta lies outside (0.1, 0.9). Never throws.
void check_eta(double eta);

// Ground-truth gradient-descent iterates w_0 = 0, ..., w_{k+1}.
struct GdIterates {
  double eta = 0.0;
  std::vector<Vector> iters;

  std::size_t k() const noexcept { return iters.size() - 2; }
};

// w_i = w_{i−1} − η·X(Xᵀw_{i−1} − y)/n.
GdIterates gd_iterates(const TaskInstance& task, double eta, std::size_t k);

// (I − (I − ηS)^i) w*.
Vector gd_closed_form(const TaskInstance& task, double eta, std::size_t i);

// Token matrix of width n + i + 1. Columns 0..n-1 carry (x_j, y_j, 0, 0); the
// remaining columns carry weight tokens (0, 0, w_m, 1).
struct PromptSequence {
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t step_index = 0;
  Matrix tokens;

  std::size_t d_e() const noexcept { return 2 * d + 2; }
  std::size_t width() const noexcept { return tokens.cols(); }
  Vector last_token() const { return tokens.col(tokens.cols() - 1); }
};

// Training sequence Z_i carrying w_0..w_i. Throws StepOutOfRange when i > k.
PromptSequence build_prompt(const TaskInstance& task, const GdIterates& iterates, std::size_t i);

// (0_d, 0, w, 1).
Vector weight_token(std::span<const double> w);

// (0_d, 0, w_{i+1}, 1) for i < k and (0_d, 0, final_w, 1) for i = k.
// Throws StepOutOfRange when i > k.
Vector target_token(const GdIterates& iterates, std::size_t i, std::span<const double> final_w);

// Weight slice (entries d+1 .. 2d, 0-based) of a d_e-token.
Vector weight_slice(std::span<const double> token, std::size_t d);

// Line-delimited JSON task dump: {d, n, seed, w_star, x (column-major), y}.
std::string task_to_json_line(const TaskInstance& task, std::uint64_t seed);
TaskInstance task_from_json_line(std::string_view line, std::uint64_t* seed = nullptr);
void write_task_dump(std::ostream& out, std::span<const TaskInstance> tasks,
                     std::span<const std::uint64_t> seeds);
std::vector<TaskInstance> read_task_dump(std::istream& in, std::vector<std::uint64_t>* seeds = nullptr);

}  // namespace cotlsa
