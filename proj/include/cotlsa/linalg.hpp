#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cotlsa/rng.hpp"

namespace cotlsa {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  Vector col(std::size_t j) const;
  void set_col(std::size_t j, std::span<const double> values);

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double factor) noexcept;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Vector matvec(const Matrix& a, std::span<const double> x);
Vector matvec_transposed(const Matrix& a, std::span<const double> x);  // aᵀx
Matrix outer(std::span<const double> u, std::span<const double> v);
double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
bool all_finite(const Matrix& a);
Matrix symmetrize(const Matrix& a);  // (a + aᵀ)/2

// Largest singular value by power iteration on aᵀa: 200 iterations, 1e-10
// relative tolerance on the Rayleigh quotient, start vector all-ones normalized.
double operator_norm(const Matrix& a);

// a^k by repeated squaring; a^0 = I. Throws NonSquare.
Matrix matpow(const Matrix& a, unsigned k);

// Lower-triangular L with a = L Lᵀ. Throws NotSPD when a is not symmetric
// (relative tolerance 1e-12) or a pivot is not strictly positive.
Matrix cholesky(const Matrix& a);

double determinant(const Matrix& a);

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // columns are orthonormal eigenvectors
};
// Cyclic Jacobi; input must be symmetric.
SymmetricEigen symmetric_eigen(const Matrix& a);

struct LeastSquaresResult {
  Vector coefficients;
  double residual_norm = 0.0;
};
// Householder QR solve of min ‖a x − b‖. Throws RankDeficientBasis when a
// column is numerically dependent on the previous ones.
LeastSquaresResult least_squares(const Matrix& a, std::span<const double> b);

// i.i.d. N(0,1) entries, drawn in row-major order.
Matrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols);

// `count` columns, each an independent N(0, cov) draw L·g with L = cholesky(cov)
// and g drawn with gaussian_matrix ordering per column. Throws NotSPD.
Matrix gaussian_with_cov(RngStream& rng, const Matrix& cov, std::size_t count);

// Haar-distributed orthogonal matrix: Householder QR of a Gaussian matrix with
// the signs of R's diagonal folded into Q.
Matrix random_orthogonal(RngStream& rng, std::size_t d);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
Vector axpy(double alpha, std::span<const double> x, std::span<const double> y);  // αx + y
Vector vsub(std::span<const double> a, std::span<const double> b);

}  // namespace cotlsa
