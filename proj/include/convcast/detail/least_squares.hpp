#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace convcast::detail {

/// Dense row-major matrix, just enough for small regression problems.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct LeastSquaresSolution {
  std::vector<double> beta;
  std::vector<double> residuals;
  double sse = 0.0;
  /// Diagonal of (X^T X)^{-1}, for coefficient standard errors.
  std::vector<double> inverse_gram_diagonal;
  /// Columns found to be (numerically) in the span of earlier columns.
  std::vector<std::size_t> deficient_columns;
};

inline constexpr double rank_tolerance = 1e-11;

/// Least squares min ||X b - y|| by Householder QR of the column-normalized
/// design. The normal matrix is never formed.
inline LeastSquaresSolution solve_least_squares(const Matrix& x, std::span<const double> y) {
  const std::size_t n = x.rows;
  const std::size_t p = x.cols;
  LeastSquaresSolution out;

  std::vector<double> scale(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x(i, j) * x(i, j);
    scale[j] = std::sqrt(s);
    if (scale[j] == 0.0) out.deficient_columns.push_back(j);
  }
  if (n < p) {
    for (std::size_t j = n; j < p; ++j) out.deficient_columns.push_back(j);
  }
  if (!out.deficient_columns.empty()) return out;

  Matrix a(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) a(i, j) = x(i, j) / scale[j];
  std::vector<double> qty(y.begin(), y.end());

  std::vector<double> v(n);
  for (std::size_t k = 0; k < p; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm <= rank_tolerance) {
      out.deficient_columns.push_back(k);
      continue;
    }
    const double alpha = a(k, k) > 0.0 ? -norm : norm;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      v[i] = a(i, k) - (i == k ? alpha : 0.0);
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) continue;  // column already reduced
    for (std::size_t j = k; j < p; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i] * a(i, j);
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) a(i, j) -= f * v[i];
    }
    double dot = 0.0;
    for (std::size_t i = k; i < n; ++i) dot += v[i] * qty[i];
    const double f = 2.0 * dot / vnorm2;
    for (std::size_t i = k; i < n; ++i) qty[i] -= f * v[i];
  }
  if (!out.deficient_columns.empty()) return out;

  // Back substitution R z = (Q^T y)[0:p].
  std::vector<double> z(p, 0.0);
  for (std::size_t kk = p; kk-- > 0;) {
    double s = qty[kk];
    for (std::size_t j = kk + 1; j < p; ++j) s -= a(kk, j) * z[j];
    z[kk] = s / a(kk, kk);
  }
  out.beta.resize(p);
  for (std::size_t j = 0; j < p; ++j) out.beta[j] = z[j] / scale[j];

  out.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t j = 0; j < p; ++j) fit += x(i, j) * out.beta[j];
    out.residuals[i] = y[i] - fit;
    out.sse += out.residuals[i] * out.residuals[i];
  }

  // (A^T A)^{-1} = R^{-1} R^{-T}; invert the upper-triangular R column by column.
  Matrix rinv(p, p);
  for (std::size_t col = 0; col < p; ++col) {
    for (std::size_t kk = col + 1; kk-- > 0;) {
      double s = kk == col ? 1.0 : 0.0;
      for (std::size_t j = kk + 1; j <= col; ++j) s -= a(kk, j) * rinv(j, col);
      rinv(kk, col) = s / a(kk, kk);
    }
  }
  out.inverse_gram_diagonal.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (std::size_t k = j; k < p; ++k) s += rinv(j, k) * rinv(j, k);
    out.inverse_gram_diagonal[j] = s / (scale[j] * scale[j]);
  }
  return out;
}

}  // namespace convcast::detail
