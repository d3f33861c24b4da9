#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gensql/error.hpp"

namespace gensql {

// Dense row-major matrix, sized for desk-scale covariance work.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Matrix transpose() const {
    Matrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out.at(j, i) = at(i, j);
    return out;
  }

  Matrix operator*(const Matrix& o) const {
    if (cols_ != o.rows_) throw EvalError("linalg", "matrix product shape mismatch");
    Matrix out(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        double a = at(i, k);
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < o.cols_; ++j) out.at(i, j) += a * o.at(k, j);
      }
    return out;
  }

  std::vector<double> operator*(const std::vector<double>& v) const {
    if (cols_ != v.size()) throw EvalError("linalg", "matrix-vector shape mismatch");
    std::vector<double> out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out[i] += at(i, j) * v[j];
    return out;
  }

  Matrix submatrix(const std::vector<int>& row_idx, const std::vector<int>& col_idx) const {
    Matrix out(row_idx.size(), col_idx.size());
    for (std::size_t i = 0; i < row_idx.size(); ++i)
      for (std::size_t j = 0; j < col_idx.size(); ++j)
        out.at(i, j) = at(static_cast<std::size_t>(row_idx[i]),
                          static_cast<std::size_t>(col_idx[j]));
    return out;
  }

  bool symmetric(double tol = 1e-9) const {
    if (rows_ != cols_) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        if (std::fabs(at(i, j) - at(j, i)) > tol) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Lower-triangular Cholesky factor; throws when the matrix is not SPD.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw EvalError("linalg", "cholesky of a non-square matrix");
  std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l.at(j, k) * l.at(j, k);
    if (d <= 0.0 || !std::isfinite(d))
      throw EvalError("not-spd", "covariance matrix is not positive definite");
    l.at(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = s / l.at(j, j);
    }
  }
  return l;
}

// Solve L y = b (forward) then L^T x = y (backward).
inline std::vector<double> cholesky_solve(const Matrix& l, std::vector<double> b) {
  std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l.at(i, k) * b[k];
    b[i] /= l.at(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) b[ii] -= l.at(k, ii) * b[k];
    b[ii] /= l.at(ii, ii);
  }
  return b;
}

// Solve (L L^T) X = B column by column.
inline Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
  Matrix out(b.rows(), b.cols());
  std::vector<double> col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b.at(i, j);
    std::vector<double> x = cholesky_solve(l, col);
    for (std::size_t i = 0; i < b.rows(); ++i) out.at(i, j) = x[i];
  }
  return out;
}

inline double log_det_from_cholesky(const Matrix& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l.at(i, i));
  return 2.0 * s;
}

}  // namespace gensql
