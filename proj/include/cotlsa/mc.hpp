#pragma once

#include <cmath>
#include <cstddef>

#include "cotlsa/linalg.hpp"

namespace cotlsa {

// Monte-Carlo estimate with the standard error of the mean.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

// |a − b| in units of the combined standard error.
inline double z_score(const McEstimate& a, const McEstimate& b) {
  const double se = std::hypot(a.std_error, b.std_error);
  return se > 0.0 ? std::abs(a.mean - b.mean) / se : (a.mean == b.mean ? 0.0 : INFINITY);
}

// Within max(abs_tol, sigmas·stderr) of a known target.
inline bool within(const McEstimate& est, double target, double abs_tol, double sigmas = 4.0) {
  return std::abs(est.mean - target) <= std::max(abs_tol, sigmas * est.std_error);
}

struct ScalarMoments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;

  void add(double x) noexcept {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  ScalarMoments& operator+=(const ScalarMoments& o) noexcept {
    sum += o.sum;
    sum_sq += o.sum_sq;
    count += o.count;
    return *this;
  }
  McEstimate estimate() const noexcept {
    McEstimate e;
    e.count = count;
    if (count == 0) return e;
    const double n = static_cast<double>(count);
    e.mean = sum / n;
    if (count > 1) {
      const double var = std::max(0.0, (sum_sq - n * e.mean * e.mean) / (n - 1.0));
      e.std_error = std::sqrt(var / n);
    }
    if (!std::isfinite(e.mean)) e.std_error = INFINITY;
    return e;
  }
};

struct MatrixEstimate {
  Matrix mean;
  Matrix std_error;
  std::size_t count = 0;
};

// Entrywise sums for matrix-valued samples.
struct MatrixMoments {
  Matrix sum;
  Matrix sum_sq;
  std::size_t count = 0;

  MatrixMoments() = default;
  MatrixMoments(std::size_t rows, std::size_t cols) : sum(rows, cols), sum_sq(rows, cols) {}

  void add(const Matrix& x) {
    auto s = sum.data();
    auto q = sum_sq.data();
    auto v = x.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      s[i] += v[i];
      q[i] += v[i] * v[i];
    }
    ++count;
  }
  MatrixMoments& operator+=(const MatrixMoments& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    count += o.count;
    return *this;
  }
  MatrixEstimate estimate() const {
    MatrixEstimate e{Matrix(sum.rows(), sum.cols()), Matrix(sum.rows(), sum.cols()), count};
    if (count == 0) return e;
    const double n = static_cast<double>(count);
    auto s = sum.data();
    auto q = sum_sq.data();
    auto m = e.mean.data();
    auto se = e.std_error.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
      m[i] = s[i] / n;
      if (count > 1) {
        const double var = std::max(0.0, (q[i] - n * m[i] * m[i]) / (n - 1.0));
        se[i] = std::sqrt(var / n);
      }
    }
    return e;
  }
};

}  // namespace cotlsa
