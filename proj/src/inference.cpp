#include "cotlsa/inference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cotlsa/csv.hpp"
#include "cotlsa/diagnostics.hpp"
#include "cotlsa/errors.hpp"

namespace cotlsa {

namespace {

void check_task_params(const TaskInstance& task, const LsaParams& params) {
  if (task.d() != params.d) throw DimensionMismatch("task dimension differs from model dimension");
  const std::size_t de = params.d_e();
  if (params.v.rows() != de || params.v.cols() != de || params.w.rows() != de || params.w.cols() != de)
    throw DimensionMismatch("LsaParams: V and W must be d_e×d_e");
}

// Runs the rollout; `feed` may rewrite each generated token before it is appended.
template <class Feed>
Rollout rollout_impl(const TaskInstance& task, const LsaParams& params, std::size_t k_prime, Feed&& feed) {
  check_task_params(task, params);
  const std::size_t d = task.d();
  Matrix gram = data_gram(task);
  Vector last = weight_token(Vector(d, 0.0));
  add_outer(gram, last);
  Rollout r;
  r.w_hats.reserve(k_prime + 1);
  for (std::size_t i = 0; i <= k_prime; ++i) {
    Vector out = forward_from_gram(params, gram, last, task.n());
    r.w_hats.push_back(weight_slice(out, d));
    if (i == k_prime) {
      r.final_token = std::move(out);
      break;
    }
    feed(out);
    add_outer(gram, out);
    last = std::move(out);
  }
  r.final_error = norm2(vsub(r.w_hats.back(), task.w_star));
  return r;
}

}  // namespace

Rollout cot_rollout(const TaskInstance& task, const LsaParams& params, std::size_t k_prime, double ref_eta) {
  Rollout r = rollout_impl(task, params, k_prime, [](Vector&) {});
  if (ref_eta > 0.0) {
    const GdIterates gd = gd_iterates(task, ref_eta, k_prime);
    r.per_step_pred_error.reserve(k_prime + 1);
    for (std::size_t i = 0; i <= k_prime; ++i)
      r.per_step_pred_error.push_back(norm2(vsub(r.w_hats[i], gd.iters[i + 1])));
  }
  return r;
}

double star_entry_sensitivity(const TaskInstance& task, const LsaParams& params, std::size_t k_prime) {
  const std::size_t d = task.d();
  const Rollout verbatim = rollout_impl(task, params, k_prime, [](Vector&) {});
  const Rollout zeroed = rollout_impl(task, params, k_prime, [d](Vector& z) {
    std::fill(z.begin(), z.begin() + static_cast<long>(d + 1), 0.0);
  });
  double worst = 0.0;
  for (std::size_t i = 0; i < verbatim.w_hats.size(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      worst = std::max(worst, std::abs(verbatim.w_hats[i][j] - zeroed.w_hats[i][j]));
  return worst;
}

double eval_loss_sample(const TaskInstance& task, const LsaParams& params, std::size_t k_prime) {
  const Rollout r = rollout_impl(task, params, k_prime, [](Vector&) {});
  const Vector target = weight_token(task.w_star);
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double e = r.final_token[i] - target[i];
    acc += e * e;
  }
  return std::isfinite(acc) ? 0.5 * acc : INFINITY;
}

McEstimate eval_loss_mc(const LsaParams& params, std::size_t n, std::size_t k_prime, std::size_t tasks,
                        const RngStream& rng, Execution exec) {
  if (tasks < 2) throw Error("eval_loss_mc: need at least two tasks");
  const std::size_t d = params.d;
  const auto moments = chunked_reduce(
      tasks, ScalarMoments{},
      [&](std::size_t i, ScalarMoments& acc) {
        RngStream local = rng.split(i);
        const TaskInstance task = sample_task(local, d, n);
        acc.add(eval_loss_sample(task, params, k_prime));
      },
      exec);
  return moments.estimate();
}

bool in_ood_window(const Matrix& cov, double eta, double delta) {
  const SymmetricEigen eig = symmetric_eigen(cov);
  return eig.values.front() >= delta / eta && eig.values.back() <= (2.0 - delta) / eta;
}

McEstimate eval_loss_ood_mc(const LsaParams& params, const Matrix& cov, std::size_t n,
                            std::size_t k_prime, std::size_t tasks, const RngStream& rng, double eta,
                            double delta, Execution exec) {
  if (tasks < 2) throw Error("eval_loss_ood_mc: need at least two tasks");
  const std::size_t d = params.d;
  if (cov.rows() != d || cov.cols() != d) throw DimensionMismatch("eval_loss_ood_mc: cov must be d×d");
  cholesky(cov);
  if (eta > 0.0) {
    const SymmetricEigen eig = symmetric_eigen(cov);
    const double lo = delta / eta;
    const double hi = (2.0 - delta) / eta;
    const bool outside = delta > 0.0 ? (eig.values.front() < lo || eig.values.back() > hi)
                                     : (eig.values.front() <= 0.0 || eig.values.back() >= hi);
    if (outside) {
      std::ostringstream msg;
      msg << "covariance spectrum [" << eig.values.front() << ", " << eig.values.back()
          << "] leaves the contraction window [" << lo << ", " << hi << "]";
      warn(msg.str());
    }
  }
  const auto moments = chunked_reduce(
      tasks, ScalarMoments{},
      [&](std::size_t i, ScalarMoments& acc) {
        RngStream local = rng.split(i);
        const TaskInstance task = sample_task_cov(local, d, n, cov);
        acc.add(eval_loss_sample(task, params, k_prime));
      },
      exec);
  return moments.estimate();
}

ErrorDecomposition error_decomposition(const TaskInstance& task, const ReducedParams& rp, double eta,
                                       std::size_t k_prime) {
  const std::size_t d = task.d();
  const GdIterates gd = gd_iterates(task, eta, k_prime);
  ErrorDecomposition out;
  out.final_error = cot_rollout(task, embed_reduced(rp), k_prime).final_error;

  // M = I + ṼSW̃ propagates an input error through one reduced step.
  Matrix m = matmul(rp.v31, matmul(task.s, rp.w13));
  for (std::size_t j = 0; j < d; ++j) m(j, j) += 1.0;

  // Δ^pred_{j+1} = f(w_j) − w_{j+1} with ground-truth input w_j.
  std::vector<Vector> pred(k_prime + 2);
  for (std::size_t j = 0; j <= k_prime; ++j)
    pred[j + 1] = vsub(reduced_forward(gd.iters[j], task, rp), gd.iters[j + 1]);

  Vector total = vsub(gd.iters[k_prime + 1], task.w_star);
  out.gd_error = norm2(total);
  out.bound = out.gd_error;
  Matrix power = Matrix::identity(d);
  for (std::size_t i = 0; i <= k_prime; ++i) {
    const Vector term = matvec(power, pred[k_prime - i + 1]);
    const double nt = norm2(term);
    out.propagated.push_back(nt);
    out.bound += nt;
    for (std::size_t j = 0; j < d; ++j) total[j] += term[j];
    power = matmul(m, power);
  }

  Vector w_hat(d, 0.0);
  for (std::size_t j = 0; j <= k_prime; ++j) w_hat = reduced_forward(w_hat, task, rp);
  out.identity_residual = norm2(vsub(vsub(w_hat, task.w_star), total));
  return out;
}

std::vector<std::string> eval_csv_columns() {
  return {"run_id", "d",        "n",         "k_train",     "k_prime", "eta",
          "sigma_id", "n_tasks", "loss_mean", "loss_stderr", "wall_ms"};
}

std::vector<std::string> eval_csv_fields(const EvalRow& row) {
  return {row.run_id,
          format_number(row.d),
          format_number(row.n),
          format_number(row.k_train),
          format_number(row.k_prime),
          format_number(row.eta),
          row.sigma_id,
          format_number(row.n_tasks),
          format_number(row.loss_mean),
          format_number(row.loss_stderr),
          format_number(row.wall_ms)};
}

}  // namespace cotlsa
