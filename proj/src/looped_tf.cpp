#include "cotlsa/looped_tf.hpp"

#include <cmath>

#include "cotlsa/csv.hpp"
#include "cotlsa/errors.hpp"
#include "cotlsa/task_data.hpp"

namespace cotlsa {

IclTask make_icl_task(Matrix x, Vector x_query, Vector w_star) {
  if (x.rows() != w_star.size() || x_query.size() != w_star.size())
    throw DimensionMismatch("make_icl_task: dimensions");
  IclTask t;
  t.y = matvec_transposed(x, w_star);
  t.y_query = dot(w_star, x_query);
  t.x = std::move(x);
  t.x_query = std::move(x_query);
  t.w_star = std::move(w_star);
  return t;
}

IclTask sample_icl_task(RngStream& rng, std::size_t d, std::size_t n) {
  Matrix x(d, n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < d; ++i) x(i, c) = rng.normal();
  Vector xq(d), w(d);
  for (auto& v : xq) v = rng.normal();
  for (auto& v : w) v = rng.normal();
  return make_icl_task(std::move(x), std::move(xq), std::move(w));
}

double loop_forward(const IclTask& task, const LoopedParams& params) {
  const std::size_t d = task.d();
  const std::size_t n = task.n();
  if (params.a.rows() != d || params.a.cols() != d) throw DimensionMismatch("loop_forward: A must be d×d");
  const std::size_t rows = d + 1;
  Matrix z(rows, n + 1);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < d; ++i) z(i, c) = task.x(i, c);
    z(d, c) = task.y[c];
  }
  for (std::size_t i = 0; i < d; ++i) z(i, n) = task.x_query[i];

  Matrix w(rows, rows);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) w(i, j) = params.a(i, j);
  Matrix v(rows, rows);
  v(d, d) = 1.0;

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t l = 0; l < params.loops; ++l) {
    // P = Z M Zᵀ over the example columns only.
    Matrix p(rows, rows);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t i = 0; i < rows; ++i) {
        const double zi = z(i, c);
        for (std::size_t j = 0; j < rows; ++j) p(i, j) += zi * z(j, c);
      }
    const Matrix attn = matmul(matmul(v, p), matmul(w, z));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t c = 0; c <= n; ++c) z(i, c) -= inv_n * attn(i, c);
  }
  return -z(d, n);
}

namespace {

Matrix contraction_sa(const Matrix& a, const Matrix& s) {
  Matrix m = Matrix::identity(a.rows());
  m -= matmul(s, a);
  return m;
}

}  // namespace

double loop_closed_sample(const Matrix& a, const Matrix& s, std::size_t loops) {
  return trace(matpow(contraction_sa(a, s), static_cast<unsigned>(2 * loops)));
}

Matrix loop_grad_sample(const Matrix& a, const Matrix& s, std::size_t loops) {
  Matrix m = Matrix::identity(a.rows());
  m -= matmul(transpose(a), s);
  const Matrix g = matmul(s, matpow(m, static_cast<unsigned>(2 * loops - 1)));
  return scale(g, -2.0 * static_cast<double>(loops));
}

McEstimate loop_loss_mc(const LoopedParams& params, std::size_t d, std::size_t n, std::size_t tasks,
                        const RngStream& rng, Execution exec) {
  if (tasks < 2) throw Error("loop_loss_mc: need at least two tasks");
  const auto m = chunked_reduce(
      tasks, ScalarMoments{},
      [&](std::size_t i, ScalarMoments& acc) {
        RngStream local = rng.split(i);
        const IclTask task = sample_icl_task(local, d, n);
        const double e = loop_forward(task, params) - task.y_query;
        acc.add(e * e);
      },
      exec);
  return m.estimate();
}

McEstimate loop_loss_closed_mc(const LoopedParams& params, std::size_t d, std::size_t n, std::size_t tasks,
                               const RngStream& rng, Execution exec) {
  if (tasks < 2) throw Error("loop_loss_closed_mc: need at least two tasks");
  const auto m = chunked_reduce(
      tasks, ScalarMoments{},
      [&](std::size_t i, ScalarMoments& acc) {
        RngStream local = rng.split(i);
        acc.add(loop_closed_sample(params.a, sample_wishart_s(local, d, n), params.loops));
      },
      exec);
  return m.estimate();
}

MatrixEstimate loop_grad_mc(const LoopedParams& params, std::size_t d, std::size_t n, std::size_t tasks,
                            const RngStream& rng, Execution exec) {
  if (tasks < 2) throw Error("loop_grad_mc: need at least two tasks");
  const auto m = chunked_reduce(
      tasks, MatrixMoments(d, d),
      [&](std::size_t i, MatrixMoments& acc) {
        RngStream local = rng.split(i);
        acc.add(loop_grad_sample(params.a, sample_wishart_s(local, d, n), params.loops));
      },
      exec);
  return m.estimate();
}

MatrixEstimate loop_grad_sum_mc(const LoopedParams& params, std::size_t d, std::size_t n, std::size_t tasks,
                                const RngStream& rng, Execution exec) {
  if (tasks < 2) throw Error("loop_grad_sum_mc: need at least two tasks");
  const std::size_t p = 2 * params.loops;
  const auto m = chunked_reduce(
      tasks, MatrixMoments(d, d),
      [&](std::size_t i, MatrixMoments& acc) {
        RngStream local = rng.split(i);
        const Matrix s = sample_wishart_s(local, d, n);
        const Matrix c = contraction_sa(params.a, s);
        std::vector<Matrix> powers{Matrix::identity(d)};
        for (std::size_t j = 1; j < p; ++j) powers.push_back(matmul(powers.back(), c));
        Matrix sum(d, d);
        for (std::size_t j = 0; j < p; ++j) sum += matmul(matmul(powers[j], s), powers[p - 1 - j]);
        acc.add(scale(sum, -1.0));
      },
      exec);
  return m.estimate();
}

LoopTrajectory loop_gradient_flow(const Matrix& a0, const LoopFlowConfig& cfg, const RngStream& rng) {
  if (!(cfg.h > 0.0)) throw Error("loop_gradient_flow: step must be positive");
  if (cfg.log_every == 0) throw Error("loop_gradient_flow: log_every must be positive");
  const RngStream grad_rng = rng.split(0);
  const RngStream eval_rng = rng.split(1);
  const RngStream direct_rng = rng.split(2);
  LoopTrajectory tr;
  LoopedParams params{a0, cfg.loops};
  const std::size_t d = cfg.d;

  for (std::size_t t = 0;; ++t) {
    const bool last = t == cfg.steps;
    if (last || t % cfg.log_every == 0) {
      LoopRecord rec;
      rec.step = t;
      const McEstimate closed = loop_loss_closed_mc(params, d, cfg.n, cfg.eval_tasks, eval_rng, cfg.exec);
      rec.loss_closed = closed.mean;
      rec.stderr_closed = closed.std_error;
      if (cfg.direct_tasks >= 2)
        rec.loss_direct = loop_loss_mc(params, d, cfg.n, cfg.direct_tasks, direct_rng, cfg.exec).mean;
      Matrix gap = Matrix::identity(d);
      gap -= params.a;
      rec.op_norm_i_minus_a = operator_norm(gap);
      tr.records.push_back(rec);
    }
    if (last) break;
    const MatrixEstimate g = loop_grad_mc(params, d, cfg.n, cfg.batch, grad_rng.split(t), cfg.exec);
    Matrix next = params.a;
    next -= scale(g.mean, cfg.h);
    if (!all_finite(next)) throw Diverged("looped flow produced non-finite A", static_cast<long>(t));
    params.a = std::move(next);
  }
  tr.final_a = params.a;
  return tr;
}

std::vector<std::string> loop_csv_columns() {
  return {"step", "loss_closed", "loss_direct", "stderr", "op_norm_I_minus_A"};
}

std::vector<std::string> loop_csv_fields(const LoopRecord& r) {
  return {format_number(r.step), format_number(r.loss_closed),
          r.loss_direct >= 0.0 ? format_number(r.loss_direct) : "", format_number(r.stderr_closed),
          format_number(r.op_norm_i_minus_a)};
}

}  // namespace cotlsa
