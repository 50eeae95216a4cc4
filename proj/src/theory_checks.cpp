#include "cotlsa/theory_checks.hpp"

#include <algorithm>
#include <cmath>

#include "cotlsa/errors.hpp"
#include "cotlsa/lsa_model.hpp"
#include "cotlsa/objectives.hpp"
#include "cotlsa/task_data.hpp"

namespace cotlsa {

double one_step_optimum_eta(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0) throw Error("one_step_optimum_eta: n and d must be positive");
  const double nn = static_cast<double>(n);
  return nn / (nn + static_cast<double>(d) + 1.0);
}

double no_cot_lower_bound(std::size_t n, std::size_t d) {
  const double eta = one_step_optimum_eta(n, d);
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  return 0.5 * (dd - 2.0 * eta * dd + (eta * eta / nn) * (nn + dd + 1.0) * dd);
}

nlohmann::json Verdict::to_json() const {
  return nlohmann::json{{"check", check},   {"params", params}, {"estimate_summary", estimate_summary},
                        {"bound", bound},   {"stderr", stderr_value}, {"pass", pass}};
}

namespace {

struct MomentAcc {
  MatrixMoments first;
  MatrixMoments second;
  MomentAcc& operator+=(const MomentAcc& o) {
    first += o.first;
    second += o.second;
    return *this;
  }
};

double max_abs_z(const MatrixEstimate& e, double target_scale) {
  double worst = 0.0;
  for (std::size_t i = 0; i < e.mean.rows(); ++i)
    for (std::size_t j = 0; j < e.mean.cols(); ++j) {
      const double target = i == j ? target_scale : 0.0;
      const double diff = std::abs(e.mean(i, j) - target);
      const double se = e.std_error(i, j);
      const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
      worst = std::max(worst, z);
    }
  return worst;
}

}  // namespace

MomentReport wishart_moment_check(std::size_t d, std::size_t n, std::size_t samples, const RngStream& rng,
                                  std::optional<double> second_target, Execution exec) {
  if (samples < 1000) throw Error("wishart_moment_check: need at least 1000 samples");
  MomentAcc zero{MatrixMoments(d, d), MatrixMoments(d, d)};
  const MomentAcc acc = chunked_reduce(
      samples, zero,
      [&](std::size_t i, MomentAcc& a) {
        RngStream local = rng.split(i);
        const Matrix x = gaussian_matrix(local, d, n);
        const Matrix xxt = matmul(x, transpose(x));
        a.first.add(xxt);
        a.second.add(matmul(xxt, xxt));
      },
      exec);
  const double nn = static_cast<double>(n);
  MomentReport r;
  r.first = acc.first.estimate();
  r.second = acc.second.estimate();
  r.first_target = nn;
  r.second_target = second_target.value_or(nn * (nn + static_cast<double>(d) + 1.0));
  r.max_abs_z_first = max_abs_z(r.first, r.first_target);
  r.max_abs_z_second = max_abs_z(r.second, r.second_target);
  r.pass = r.max_abs_z_first <= 4.0 && r.max_abs_z_second <= 4.0;
  return r;
}

ConcentrationReport concentration_check(std::size_t d, std::size_t n, std::size_t k, double eta,
                                        const Matrix& lambda, std::size_t samples, const RngStream& rng,
                                        double c_const, ConcentrationVariant variant, const Matrix* gamma,
                                        Execution exec) {
  if (lambda.rows() != d || lambda.cols() != d) throw DimensionMismatch("concentration_check: Λ must be d×d");
  const bool needs_gamma = variant == ConcentrationVariant::two_sided || variant == ConcentrationVariant::right;
  if (needs_gamma && (!gamma || gamma->rows() != d || gamma->cols() != d))
    throw DimensionMismatch("concentration_check: this variant needs a d×d Γ");
  if (samples < 2) throw Error("concentration_check: need at least two samples");

  const MatrixMoments moments = chunked_reduce(
      samples, MatrixMoments(d, d),
      [&](std::size_t i, MatrixMoments& acc) {
        RngStream local = rng.split(i);
        const Matrix s = sample_wishart_s(local, d, n);
        Matrix contraction = Matrix::identity(d);
        contraction -= scale(s, eta);
        const Matrix p = matpow(contraction, static_cast<unsigned>(k));
        Matrix value;
        switch (variant) {
          case ConcentrationVariant::single: value = matmul(matmul(s, lambda), matmul(p, s)); break;
          case ConcentrationVariant::two_sided:
            value = matmul(matmul(s, lambda), matmul(p, matmul(*gamma, s)));
            break;
          case ConcentrationVariant::right: value = matmul(matmul(s, lambda), matmul(s, matmul(*gamma, p))); break;
          case ConcentrationVariant::trace: value = matmul(lambda, p); break;
        }
        acc.add(value);
      },
      exec);
  const MatrixEstimate est = moments.estimate();

  ConcentrationReport r;
  r.estimate = est.mean;
  r.estimate_stderr = est.std_error;
  r.main_term = needs_gamma ? matmul(lambda, *gamma) : lambda;
  const double factor = std::pow(1.0 - eta, static_cast<double>(k));
  const double main_norm = operator_norm(r.main_term);
  r.degenerate = factor == 0.0 || main_norm == 0.0;
  if (r.degenerate) {
    r.delta = est.mean;
    r.delta_stderr = est.std_error;
    r.rel_error = operator_norm(r.delta);
    r.mc_stderr = frobenius_norm(r.delta_stderr);
  } else {
    r.delta = sub(scale(est.mean, 1.0 / factor), r.main_term);
    r.delta_stderr = scale(est.std_error, 1.0 / std::abs(factor));
    r.rel_error = operator_norm(r.delta) / main_norm;
    r.mc_stderr = frobenius_norm(r.delta_stderr) / main_norm;
  }
  const double kk = static_cast<double>(k);
  r.bound = c_const * kk * kk * static_cast<double>(d) / static_cast<double>(n);
  r.pass = r.rel_error <= r.bound + 4.0 * r.mc_stderr;
  return r;
}

StructureFit error_structure_fit(const Matrix& delta, const Matrix& lambda, const Matrix* gamma) {
  const std::size_t d = delta.rows();
  std::vector<Matrix> basis;
  const Matrix id = Matrix::identity(d);
  const double tl = trace(lambda);
  if (!gamma) {
    basis = {lambda, scale(id, tl)};
  } else {
    const double tg = trace(*gamma);
    const Matrix lg = matmul(lambda, *gamma);
    basis = {lg, scale(*gamma, tl), scale(lambda, tg), id};
  }
  Matrix a(d * d, basis.size());
  for (std::size_t c = 0; c < basis.size(); ++c) {
    const auto src = basis[c].data();
    for (std::size_t i = 0; i < src.size(); ++i) a(i, c) = src[i];
  }
  const LeastSquaresResult ls = least_squares(a, delta.data());
  StructureFit fit;
  fit.coefficients = ls.coefficients;
  fit.residual = ls.residual_norm;
  const double dn = frobenius_norm(delta);
  fit.relative_residual = dn > 0.0 ? fit.residual / dn : 0.0;
  return fit;
}

GradCheckReport gradient_fd_check(RngStream& rng, std::size_t d, std::size_t n, std::size_t k, double eta,
                                  double floor) {
  constexpr double kRelativeFloor = 1e-4;
  const TaskInstance task = sample_task(rng, d, n);
  LsaParams params = LsaParams::zeros(d);
  for (auto& x : params.v.data()) x = 0.5 * rng.normal();
  for (auto& x : params.w.data()) x = 0.5 * rng.normal();
  ReducedParams rp{Matrix(d, d), Matrix(d, d), -1.0 + 0.3 * rng.normal()};
  for (auto& x : rp.v31.data()) x = 0.5 * rng.normal();
  for (auto& x : rp.w13.data()) x = 0.5 * rng.normal();

  GradCheckReport r;
  auto compare = [&](const Matrix& analytic, const Matrix& fd, double& worst) {
    const auto a = analytic.data();
    const auto f = fd.data();
    const double scale_floor = kRelativeFloor * max_abs(analytic);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i]) <= floor) continue;
      worst = std::max(worst, std::abs(a[i] - f[i]) / std::max(std::abs(a[i]), scale_floor));
      ++r.entries_checked;
    }
  };

  const GradPair g = grad_full_sample(task, params, k, eta);
  const Matrix fd_v = fd_gradient(
      [&](const Matrix& v) { return cot_loss_sample(task, LsaParams{d, v, params.w}, k, eta).total; }, params.v);
  const Matrix fd_w = fd_gradient(
      [&](const Matrix& w) { return cot_loss_sample(task, LsaParams{d, params.v, w}, k, eta).total; }, params.w);
  compare(g.g_v, fd_v, r.max_rel_full);
  compare(g.g_w, fd_w, r.max_rel_full);

  const ReducedGrad gr = grad_reduced_sample(task, rp, k, eta, true);
  const Matrix fd_v31 = fd_gradient(
      [&](const Matrix& v) { return reduced_loss_sample(task, ReducedParams{v, rp.w13, rp.w24}, k, eta).total; },
      rp.v31);
  const Matrix fd_w13 = fd_gradient(
      [&](const Matrix& w) { return reduced_loss_sample(task, ReducedParams{rp.v31, w, rp.w24}, k, eta).total; },
      rp.w13);
  const double fd_w24 = fd_derivative(
      [&](double w24) { return reduced_loss_sample(task, ReducedParams{rp.v31, rp.w13, w24}, k, eta).total; },
      rp.w24);
  compare(gr.g_v31, fd_v31, r.max_rel_reduced);
  compare(gr.g_w13, fd_w13, r.max_rel_reduced);
  Matrix a24(1, 1), f24(1, 1);
  a24(0, 0) = gr.g_w24;
  f24(0, 0) = fd_w24;
  compare(a24, f24, r.max_rel_reduced);
  return r;
}

Verdict moment_verdict(const MomentReport& r, std::size_t d, std::size_t n, std::size_t samples) {
  Verdict v;
  v.check = "moments";
  v.params = {{"d", d}, {"n", n}, {"samples", samples}};
  v.estimate_summary = {{"first_target", r.first_target},
                        {"second_target", r.second_target},
                        {"max_abs_z_first", r.max_abs_z_first},
                        {"max_abs_z_second", r.max_abs_z_second}};
  v.bound = 4.0;
  v.stderr_value = std::max(r.max_abs_z_first, r.max_abs_z_second);
  v.pass = r.pass;
  return v;
}

Verdict concentration_verdict(const ConcentrationReport& r, std::size_t d, std::size_t n, std::size_t k,
                              double eta, std::size_t samples, double c_const) {
  Verdict v;
  v.check = "concentration";
  v.params = {{"d", d}, {"n", n}, {"k", k}, {"eta", eta}, {"samples", samples}, {"c_const", c_const}};
  v.estimate_summary = {{"rel_error", r.rel_error}, {"degenerate", r.degenerate}};
  v.bound = r.bound;
  v.stderr_value = r.mc_stderr;
  v.pass = r.pass;
  return v;
}

}  // namespace cotlsa
