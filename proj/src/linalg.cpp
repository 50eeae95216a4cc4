#include "cotlsa/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "cotlsa/errors.hpp"

namespace cotlsa {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionMismatch("Matrix: data length does not match rows*cols");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Vector Matrix::col(std::size_t j) const {
  Vector out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void Matrix::set_col(std::size_t j, std::span<const double> values) {
  if (values.size() != rows_) throw DimensionMismatch("set_col: length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double factor) noexcept {
  for (auto& v : data_) v *= factor;
  return *this;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  out += b;
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  out -= b;
  return out;
}

Matrix scale(const Matrix& a, double factor) {
  Matrix out = a;
  out *= factor;
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double ail = a(i, l);
      if (ail == 0.0) continue;
      auto b_row = b.row(l);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += ail * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionMismatch("matvec: length mismatch");
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw DimensionMismatch("matvec_transposed: length mismatch");
  Vector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += r[j] * xi;
  }
  return out;
}

Matrix outer(std::span<const double> u, std::span<const double> v) {
  Matrix out(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out(i, j) = u[i] * v[j];
  return out;
}

double trace(const Matrix& a) {
  if (!a.is_square()) throw NonSquare("trace: matrix is not square");
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

Matrix symmetrize(const Matrix& a) {
  if (!a.is_square()) throw NonSquare("symmetrize: matrix is not square");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = 0.5 * (a(i, j) + a(j, i));
  return out;
}

double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const std::size_t n = a.cols();
  auto run = [&](Vector v) {
    double nv = norm2(v);
    for (auto& x : v) x /= nv;
    double estimate = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      Vector w = matvec_transposed(a, matvec(a, v));
      const double rayleigh = dot(v, w);
      const double nw = norm2(w);
      if (nw == 0.0) return 0.0;
      for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
      if (iter > 0 && std::abs(rayleigh - estimate) <= 1e-10 * std::abs(rayleigh)) {
        estimate = rayleigh;
        break;
      }
      estimate = rayleigh;
    }
    // One more Rayleigh quotient with the converged vector.
    const Vector av = matvec(a, v);
    return std::max(std::sqrt(std::max(estimate, 0.0)), norm2(av));
  };
  double result = run(Vector(n, 1.0));
  if (result == 0.0 && frobenius_norm(a) > 0.0) {
    // The all-ones start lies in the null space; retry from a ramp.
    Vector ramp(n);
    std::iota(ramp.begin(), ramp.end(), 1.0);
    result = run(std::move(ramp));
  }
  return result;
}

Matrix matpow(const Matrix& a, unsigned k) {
  if (!a.is_square()) throw NonSquare("matpow: matrix is not square");
  Matrix result = Matrix::identity(a.rows());
  Matrix base = a;
  bool first = true;
  while (k > 0) {
    if (k & 1U) {
      result = first ? base : matmul(result, base);
      first = false;
    }
    k >>= 1U;
    if (k > 0) base = matmul(base, base);
  }
  return result;
}

Matrix cholesky(const Matrix& a) {
  if (!a.is_square()) throw NotSPD("cholesky: matrix is not square");
  const std::size_t n = a.rows();
  const double tol = 1e-12 * std::max(1.0, max_abs(a));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) throw NotSPD("cholesky: matrix is not symmetric");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t p = 0; p < j; ++p) diag -= l(j, p) * l(j, p);
    if (!(diag > 0.0)) throw NotSPD("cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

double determinant(const Matrix& a) {
  if (!a.is_square()) throw NonSquare("determinant: matrix is not square");
  Matrix lu = a;
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(lu(r, c)) > std::abs(lu(pivot, c))) pivot = r;
    if (lu(pivot, c) == 0.0) return 0.0;
    if (pivot != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(pivot, j), lu(c, j));
      det = -det;
    }
    det *= lu(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = lu(r, c) / lu(c, c);
      for (std::size_t j = c; j < n; ++j) lu(r, j) -= f * lu(c, j);
    }
  }
  return det;
}

SymmetricEigen symmetric_eigen(const Matrix& a) {
  if (!a.is_square()) throw NonSquare("symmetric_eigen: matrix is not square");
  const std::size_t n = a.rows();
  Matrix m = symmetrize(a);
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off <= 1e-30 * std::max(1.0, frobenius_norm(m) * frobenius_norm(m))) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (m(p, q) == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return m(i, i) < m(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = m(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

LeastSquaresResult least_squares(const Matrix& a, std::span<const double> b) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (b.size() != m) throw DimensionMismatch("least_squares: rhs length mismatch");
  if (m < n) throw RankDeficientBasis("least_squares: fewer equations than unknowns");
  Matrix r = a;
  Vector qtb(b.begin(), b.end());
  const double scale_ref = std::max(frobenius_norm(a), 1e-300);
  for (std::size_t k = 0; k < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k; i < m; ++i) alpha += r(i, k) * r(i, k);
    alpha = std::sqrt(alpha);
    if (alpha <= 1e-10 * scale_ref) {
      throw RankDeficientBasis("least_squares: column " + std::to_string(k) +
                               " is numerically dependent");
    }
    if (r(k, k) > 0) alpha = -alpha;
    Vector v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
    v[0] -= alpha;
    const double vnorm2 = dot(v, v);
    if (vnorm2 > 0.0) {
      for (std::size_t j = k; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i - k] * r(i, j);
        s = 2.0 * s / vnorm2;
        for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i - k];
      }
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * qtb[i];
      s = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < m; ++i) qtb[i] -= s * v[i - k];
    }
    if (std::abs(r(k, k)) <= 1e-10 * scale_ref) {
      throw RankDeficientBasis("least_squares: column " + std::to_string(k) +
                               " is numerically dependent");
    }
  }
  LeastSquaresResult out;
  out.coefficients.assign(n, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    double s = qtb[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= r(k, j) * out.coefficients[j];
    out.coefficients[k] = s / r(k, k);
  }
  double res = 0.0;
  for (std::size_t i = n; i < m; ++i) res += qtb[i] * qtb[i];
  out.residual_norm = std::sqrt(res);
  return out;
}

Matrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols) {
  Matrix out(rows, cols);
  for (double& v : out.data()) v = rng.normal();
  return out;
}

Matrix gaussian_with_cov(RngStream& rng, const Matrix& cov, std::size_t count) {
  const Matrix l = cholesky(cov);
  const std::size_t d = cov.rows();
  Matrix out(d, count);
  Vector g(d);
  for (std::size_t c = 0; c < count; ++c) {
    for (auto& v : g) v = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t p = 0; p <= i; ++p) s += l(i, p) * g[p];
      out(i, c) = s;
    }
  }
  return out;
}

Matrix random_orthogonal(RngStream& rng, std::size_t d) {
  Matrix a = gaussian_matrix(rng, d, d);
  Matrix q = Matrix::identity(d);
  for (std::size_t k = 0; k + 1 < d; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k; i < d; ++i) alpha += a(i, k) * a(i, k);
    alpha = std::sqrt(alpha);
    if (a(k, k) > 0) alpha = -alpha;
    Vector v(d - k);
    for (std::size_t i = k; i < d; ++i) v[i - k] = a(i, k);
    v[0] -= alpha;
    const double vnorm2 = dot(v, v);
    if (vnorm2 == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < d; ++i) s += v[i - k] * a(i, j);
      s = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < d; ++i) a(i, j) -= s * v[i - k];
    }
    // q <- q H_k
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = k; j < d; ++j) s += q(i, j) * v[j - k];
      s = 2.0 * s / vnorm2;
      for (std::size_t j = k; j < d; ++j) q(i, j) -= s * v[j - k];
    }
  }
  // a now holds R; fold sign(R_jj) into column j of q.
  for (std::size_t j = 0; j < d; ++j) {
    if (a(j, j) < 0.0)
      for (std::size_t i = 0; i < d; ++i) q(i, j) = -q(i, j);
  }
  return q;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

Vector axpy(double alpha, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("axpy: length mismatch");
  Vector out(y.begin(), y.end());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
  return out;
}

Vector vsub(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("vsub: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

}  // namespace cotlsa
