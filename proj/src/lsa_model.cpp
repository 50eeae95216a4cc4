#include "cotlsa/lsa_model.hpp"

#include <cmath>

#include "cotlsa/errors.hpp"

namespace cotlsa {

LsaParams LsaParams::zeros(std::size_t d) {
  const std::size_t de = 2 * d + 2;
  return LsaParams{d, Matrix(de, de), Matrix(de, de)};
}

namespace {

std::size_t group_offset(std::size_t d, int g) {
  switch (g) {
    case 1: return 0;
    case 2: return d;
    case 3: return d + 1;
    case 4: return 2 * d + 1;
  }
  throw Error("block index must lie in 1..4");
}

std::size_t group_size(std::size_t d, int g) { return (g == 1 || g == 3) ? d : 1; }

void check_params(const LsaParams& p) {
  const std::size_t de = p.d_e();
  if (p.v.rows() != de || p.v.cols() != de || p.w.rows() != de || p.w.cols() != de)
    throw DimensionMismatch("LsaParams: V and W must be d_e×d_e");
}

}  // namespace

BlockRange block_range(std::size_t d, int bi, int bj) {
  return BlockRange{group_offset(d, bi), group_size(d, bi), group_offset(d, bj), group_size(d, bj)};
}

Matrix get_block(const Matrix& m, const BlockRange& r) {
  Matrix out(r.rows, r.cols);
  for (std::size_t i = 0; i < r.rows; ++i)
    for (std::size_t j = 0; j < r.cols; ++j) out(i, j) = m(r.row0 + i, r.col0 + j);
  return out;
}

void set_block(Matrix& m, const BlockRange& r, const Matrix& values) {
  if (values.rows() != r.rows || values.cols() != r.cols) throw DimensionMismatch("set_block: shape");
  for (std::size_t i = 0; i < r.rows; ++i)
    for (std::size_t j = 0; j < r.cols; ++j) m(r.row0 + i, r.col0 + j) = values(i, j);
}

Matrix token_gram(const Matrix& tokens) {
  const std::size_t de = tokens.rows();
  Matrix g(de, de);
  for (std::size_t c = 0; c < tokens.cols(); ++c) {
    for (std::size_t i = 0; i < de; ++i) {
      const double ti = tokens(i, c);
      if (ti == 0.0) continue;
      for (std::size_t j = 0; j < de; ++j) g(i, j) += ti * tokens(j, c);
    }
  }
  return g;
}

Matrix data_gram(const TaskInstance& task) {
  const std::size_t d = task.d();
  const std::size_t n = task.n();
  Matrix g(2 * d + 2, 2 * d + 2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += task.x(i, c) * task.x(j, c);
      g(i, j) = acc;
      g(j, i) = acc;
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += task.x(i, c) * task.y[c];
    g(i, d) = acc;
    g(d, i) = acc;
  }
  double yy = 0.0;
  for (std::size_t c = 0; c < n; ++c) yy += task.y[c] * task.y[c];
  g(d, d) = yy;
  return g;
}

void add_outer(Matrix& g, std::span<const double> z) {
  const std::size_t m = z.size();
  for (std::size_t i = 0; i < m; ++i) {
    const double zi = z[i];
    if (zi == 0.0) continue;
    auto r = g.row(i);
    for (std::size_t j = 0; j < m; ++j) r[j] += zi * z[j];
  }
}

Vector forward_from_gram(const LsaParams& params, const Matrix& gram, std::span<const double> z,
                         std::size_t n) {
  const Vector wz = matvec(params.w, z);
  const Vector gwz = matvec(gram, wz);
  Vector out = matvec(params.v, gwz);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z[i] + out[i] * inv_n;
  return out;
}

Vector forward_last_token(const PromptSequence& z, const LsaParams& params) {
  check_params(params);
  if (z.tokens.rows() != params.d_e()) throw DimensionMismatch("forward_last_token: token dimension");
  const Vector last = z.last_token();
  return forward_from_gram(params, token_gram(z.tokens), last, z.n);
}

Vector reduced_forward(std::span<const double> w_i, const TaskInstance& task, const ReducedParams& rp) {
  const std::size_t d = task.d();
  if (w_i.size() != d || rp.v31.rows() != d || rp.w13.rows() != d)
    throw DimensionMismatch("reduced_forward: dimensions");
  Vector inner = matvec(rp.w13, w_i);
  for (std::size_t j = 0; j < d; ++j) inner[j] += rp.w24 * task.w_star[j];
  const Vector step = matvec(rp.v31, matvec(task.s, inner));
  Vector out(w_i.begin(), w_i.end());
  for (std::size_t j = 0; j < d; ++j) out[j] += step[j];
  return out;
}

LsaParams construct_multistep(std::size_t d, double eta) {
  ReducedParams rp{scale(Matrix::identity(d), -eta), Matrix::identity(d), -1.0};
  return embed_reduced(rp);
}

ReducedParams extract_reduced(const LsaParams& params) {
  const std::size_t d = params.d;
  ReducedParams rp;
  rp.v31 = get_block(params.v, block_range(d, 3, 1));
  rp.w13 = get_block(params.w, block_range(d, 1, 3));
  rp.w24 = params.w(d, 2 * d + 1);
  return rp;
}

LsaParams embed_reduced(const ReducedParams& rp) {
  const std::size_t d = rp.d();
  LsaParams p = LsaParams::zeros(d);
  set_block(p.v, block_range(d, 3, 1), rp.v31);
  set_block(p.w, block_range(d, 1, 3), rp.w13);
  p.w(d, 2 * d + 1) = rp.w24;
  return p;
}

bool on_block_pattern(std::size_t d, bool is_v, std::size_t row, std::size_t col) {
  if (is_v) return row >= d + 1 && row < 2 * d + 1 && col < d;
  if (row == d && col == 2 * d + 1) return true;
  return row < d && col >= d + 1 && col < 2 * d + 1;
}

bool on_diag_pattern(std::size_t d, bool is_v, std::size_t row, std::size_t col) {
  if (!on_block_pattern(d, is_v, row, col)) return false;
  if (is_v) return row - (d + 1) == col;
  if (row == d) return true;
  return col - (d + 1) == row;
}

PatternResidual pattern_residual(const LsaParams& params, double eta) {
  check_params(params);
  const std::size_t d = params.d;
  const std::size_t de = params.d_e();
  double total = 0.0;
  double off = 0.0;
  for (int which = 0; which < 2; ++which) {
    const bool is_v = which == 0;
    const Matrix& m = is_v ? params.v : params.w;
    for (std::size_t i = 0; i < de; ++i)
      for (std::size_t j = 0; j < de; ++j) {
        const double e2 = m(i, j) * m(i, j);
        total += e2;
        if (!on_diag_pattern(d, is_v, i, j)) off += e2;
      }
  }
  const ReducedParams rp = extract_reduced(params);
  Matrix prod = matmul(rp.v31, rp.w13);
  Matrix scaled = rp.w13;
  for (std::size_t j = 0; j < d; ++j) {
    prod(j, j) += eta;
    scaled(j, j) += rp.w24;
  }
  const double root_d = std::sqrt(static_cast<double>(d));
  PatternResidual r;
  r.off_pattern_mass = total > 0.0 ? off / total : 0.0;
  r.product_error = frobenius_norm(prod) / root_d;
  r.scale_error = frobenius_norm(scaled) / root_d;
  return r;
}

}  // namespace cotlsa
