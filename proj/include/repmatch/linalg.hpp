#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace repmatch {

// Dense row-major matrix of doubles. Dimensions are always positive and the
// constructors refuse non-finite entries; element access through operator()
// is unchecked.
class Matrix {
 public:
  // Zero-filled rows x cols.
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix column(std::span<const double> values);
  static Matrix row(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return entries_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

  std::span<double> entries() { return entries_; }
  std::span<const double> entries() const { return entries_; }
  std::span<double> row_span(std::size_t r) { return {entries_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {entries_.data() + r * cols_, cols_};
  }

  Matrix transpose() const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
};

// Product a * b. Rows of the result are distributed over OpenMP threads for
// large problems; every output entry is accumulated in the same order as
// matmul_serial, so the two agree bit for bit.
Matrix matmul(const Matrix& a, const Matrix& b);
// Single-threaded reference kernel.
Matrix matmul_serial(const Matrix& a, const Matrix& b);
// aᵀ * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& m, double factor);

double frobenius_norm_sq(const Matrix& m);
double frobenius_norm(const Matrix& m);

// First j columns of m, 1 <= j <= m.cols().
Matrix top_columns(const Matrix& m, std::size_t j);

struct SvdOptions {
  std::size_t max_sweeps = 100;
};

// Thin SVD: m = left * diag(singular_values) * rightᵀ with k = min(rows, cols).
// Singular values are descending; the entry of largest magnitude in each right
// singular vector (first one on ties) is non-negative.
struct SvdResult {
  Matrix left;   // rows x k
  std::vector<double> singular_values;
  Matrix right;  // cols x k
};

// One-sided (Hestenes) Jacobi. Throws ConvergenceError when the sweep cap is
// reached.
SvdResult svd(const Matrix& m, const SvdOptions& options = {});

// Number of singular values strictly above tol * sigma_max; 0 for the zero
// matrix.
std::size_t effective_rank(std::span<const double> singular_values, double tol = 1e-10);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

}  // namespace repmatch
