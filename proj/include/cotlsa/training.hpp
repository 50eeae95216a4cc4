#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cotlsa/lsa_model.hpp"
#include "cotlsa/objectives.hpp"
#include "cotlsa/parallel.hpp"
#include "cotlsa/rng.hpp"

namespace cotlsa {

enum class TrainMode { theory, experiment };
enum class OptimizerKind { gradient_flow, adam };
enum class InitBasis { standard, random_orthogonal };

struct TrainConfig {
  std::size_t d = 10;
  std::size_t n = 20;
  std::size_t k = 20;
  double eta = 0.4;
  TrainMode mode = TrainMode::experiment;
  OptimizerKind optimizer = OptimizerKind::adam;
  double h = 0.01;  // gradient-flow Euler step
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 1000;
  bool antithetic = false;
  std::size_t iterations = 750;
  std::uint64_t seed = 0;
  std::size_t log_every = 50;
  // Initialization.
  double init_scale = 0.1;  // experiment mode
  double sigma = 0.3;       // theory mode
  InitBasis basis = InitBasis::standard;
  // Periodic evaluation loss (0 disables; the final step is always evaluated when eval_tasks > 0).
  std::size_t eval_every = 0;
  std::size_t eval_tasks = 0;
  std::size_t eval_k_prime = 0;  // 0 means "use k"
  Execution exec = Execution::parallel;
};

// Throws ConfigError on inconsistent settings.
void validate(const TrainConfig& cfg);

// Seed layout: the initialization draws from stream derive_seed(seed, 0); the
// batch of step t uses RngStream(derive_seed(seed, 1)).split(t); evaluation
// number e uses RngStream(derive_seed(seed, 2)).split(e).
RngStream init_stream(std::uint64_t seed);
RngStream batch_stream(std::uint64_t seed, std::size_t step);
RngStream eval_stream(std::uint64_t seed, std::size_t index);

struct Assumption1Init {
  ReducedParams rp;
  Matrix basis;  // U, columns u_j
};

// λ^Ṽ_j uniform on [−2σ, −σ], λ^W̃_j uniform on [σ, 1/2], w24 = −1, Ṽ and W̃
// diagonal in U. Draw order: U (random basis only), all λ^Ṽ, then all λ^W̃.
// Throws BadSigma unless 0 < σ ≤ 1/2.
Assumption1Init init_assumption1(RngStream& rng, std::size_t d, double sigma, InitBasis basis);

// Warns when σ ≤ 3(1−η)/((2−η)(k+1)).
void check_sigma(double sigma, double eta, std::size_t k);

// i.i.d. N(0, scale²) entries over V then W.
LsaParams init_random(RngStream& rng, std::size_t d, double scale);

struct SpectralTrace {
  std::vector<double> lambda_v;  // u_jᵀṼu_j
  std::vector<double> lambda_w;  // u_jᵀW̃u_j
  double off_basis_v = 0.0;      // ‖Ṽ − U diag(λ^Ṽ) Uᵀ‖_F
  double off_basis_w = 0.0;
};

SpectralTrace spectral_trace(const ReducedParams& rp, const Matrix& basis);

struct TrajectoryRecord {
  std::size_t step = 0;
  double cot_loss = 0.0;
  double cot_loss_stderr = 0.0;
  double eval_loss = -1.0;  // negative when not evaluated at this step
  double eval_loss_stderr = 0.0;
  PatternResidual pattern;
  double grad_norm_v = 0.0;
  double grad_norm_w = 0.0;
  // Largest off-pattern gradient entry over the largest V₃₁/W₁₃ gradient entry
  // (theory mode only, 0 otherwise).
  double zero_block_ratio = 0.0;
  SpectralTrace spectrum;  // theory mode only
  double wall_ms = 0.0;
};

std::vector<std::string> trajectory_csv_columns();
std::vector<std::string> trajectory_csv_fields(const TrajectoryRecord& r, bool with_timing);

struct TrainInit {
  LsaParams params;
  Matrix basis;  // theory mode; identity when unused
};

TrainInit make_init(const TrainConfig& cfg);

struct TrainHooks {
  // Called for every logged record with the parameters at that step.
  std::function<void(const TrajectoryRecord&, const LsaParams&)> on_log;
  // Called with the last finite parameters before Diverged is thrown.
  std::function<void(const LsaParams&, std::size_t)> on_diverged;
};

struct TrainResult {
  LsaParams params;
  std::vector<TrajectoryRecord> records;
  double max_zero_block_ratio = 0.0;
};

// Runs cfg.iterations optimizer steps. Theory mode computes the full gradient,
// audits the off-pattern entries, and updates only V₃₁ and W₁₃ (w24 stays
// fixed). Experiment mode updates every entry. Throws Diverged.
TrainResult train(const TrainConfig& cfg, const TrainInit& init, const TrainHooks& hooks = {});

// Adam state over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1, double beta2, double eps);
  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace cotlsa
