#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <json.hpp>

#include "cotlsa/linalg.hpp"
#include "cotlsa/mc.hpp"
#include "cotlsa/parallel.hpp"
#include "cotlsa/rng.hpp"

namespace cotlsa {

// n/(n+d+1).
double one_step_optimum_eta(std::size_t n, std::size_t d);

// ½(d − 2η*d + (η*²/n)(n+d+1)d) at η* = n/(n+d+1); equals ½d(d+1)/(n+d+1).
double no_cot_lower_bound(std::size_t n, std::size_t d);

// Machine-readable outcome of one check.
struct Verdict {
  std::string check;
  nlohmann::json params;
  nlohmann::json estimate_summary;
  double bound = 0.0;
  double stderr_value = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

struct MomentReport {
  MatrixEstimate first;   // E[XXᵀ]
  MatrixEstimate second;  // E[(XXᵀ)²]
  double first_target = 0.0;   // scale of I
  double second_target = 0.0;  // scale of I
  double max_abs_z_first = 0.0;
  double max_abs_z_second = 0.0;
  bool pass = false;  // all |z| ≤ 4
};

// Entrywise z-scores of MC estimates against nI and n(n+d+1)I. Sample i uses
// X = gaussian_matrix(rng.split(i), d, n). second_target overrides the scale
// of the second-moment target (negative controls).
MomentReport wishart_moment_check(std::size_t d, std::size_t n, std::size_t samples, const RngStream& rng,
                                  std::optional<double> second_target = std::nullopt,
                                  Execution exec = Execution::parallel);

enum class ConcentrationVariant {
  single,     // E[SΛ(I−ηS)ᵏS]            main term Λ
  two_sided,  // E[SΛ(I−ηS)ᵏΓS]           main term ΛΓ
  right,      // E[SΛSΓ(I−ηS)ᵏ]           main term ΛΓ
  trace,      // E[Λ(I−ηS)ᵏ]              main term Λ
};

struct ConcentrationReport {
  Matrix estimate;        // MC mean of the expectation
  Matrix estimate_stderr; // entrywise standard errors
  Matrix main_term;       // Λ or ΛΓ
  Matrix delta;           // estimate/(1−η)ᵏ − main (or estimate − 0 when degenerate)
  Matrix delta_stderr;
  double rel_error = 0.0;
  double bound = 0.0;     // c·k²d/n
  double mc_stderr = 0.0; // ‖delta_stderr‖_F / ‖main‖_op, a conservative noise scale for rel_error
  bool degenerate = false;  // (1−η)ᵏ == 0: absolute error reported
  bool pass = false;
};

// S is drawn with sample_wishart_s(rng.split(i), d, n).
ConcentrationReport concentration_check(std::size_t d, std::size_t n, std::size_t k, double eta,
                                        const Matrix& lambda, std::size_t samples, const RngStream& rng,
                                        double c_const = 10.0,
                                        ConcentrationVariant variant = ConcentrationVariant::single,
                                        const Matrix* gamma = nullptr,
                                        Execution exec = Execution::parallel);

struct StructureFit {
  std::vector<double> coefficients;
  double residual = 0.0;           // ‖Δ − fit‖_F
  double relative_residual = 0.0;  // residual / ‖Δ‖_F
};

// Two-term basis {Λ, tr(Λ)I} when gamma is null, otherwise {ΛΓ, tr(Λ)Γ,
// tr(Γ)Λ, I}. The tr(Λ)tr(Γ)I and tr(ΛΓ)I terms are both multiples of I for a
// single (Λ, Γ), so they share the last coefficient. Throws RankDeficientBasis.
StructureFit error_structure_fit(const Matrix& delta, const Matrix& lambda, const Matrix* gamma = nullptr);

// Analytic gradients against central differences on one random configuration:
// a task from rng, full (V, W) with N(0, 0.5²) entries, and a reduced state
// with N(0, 0.5²) blocks and w24 = −1 + N(0, 0.3²). Relative errors are
// |analytic − fd| / max(|analytic|, 1e-4·max|analytic|) over entries with
// |analytic| > floor.
struct GradCheckReport {
  double max_rel_full = 0.0;
  double max_rel_reduced = 0.0;
  std::size_t entries_checked = 0;
};

GradCheckReport gradient_fd_check(RngStream& rng, std::size_t d, std::size_t n, std::size_t k, double eta,
                                  double floor = 1e-8);

Verdict moment_verdict(const MomentReport& r, std::size_t d, std::size_t n, std::size_t samples);
Verdict concentration_verdict(const ConcentrationReport& r, std::size_t d, std::size_t n, std::size_t k,
                              double eta, std::size_t samples, double c_const);

}  // namespace cotlsa
