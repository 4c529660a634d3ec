#include "repmatch/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "repmatch/error.hpp"

namespace repmatch {

namespace {

// Below this many multiply-adds the OpenMP fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 16;

void require_positive(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw DataError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {
  require_positive(rows, cols);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  require_positive(rows, cols);
  if (entries_.size() != rows * cols) {
    throw DataError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " needs " + std::to_string(rows * cols) + " entries, got " +
                    std::to_string(entries_.size()));
  }
  if (!all_finite()) throw DataError("matrix entries must be finite");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  if (!m.all_finite()) throw DataError("matrix entries must be finite");
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DataError("matrix needs at least one row");
  const std::size_t cols = rows.front().size();
  std::vector<double> entries;
  entries.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DataError("ragged rows in matrix literal");
    entries.insert(entries.end(), r.begin(), r.end());
  }
  return Matrix(rows.size(), cols, std::move(entries));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DataError("matmul dimension mismatch: " + shape(a) + " * " + shape(b));
  }
  const std::size_t n = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  Matrix c(n, m);
  const bool parallel = n > 1 && n * m * inner >= kParallelWork;
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto ri = static_cast<std::size_t>(i);
    std::span<double> out = c.row_span(ri);
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(ri, k);
      std::span<const double> brow = b.row_span(k);
      for (std::size_t j = 0; j < m; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DataError("matmul dimension mismatch: " + shape(a) + " * " + shape(b));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DataError("matmul_tn dimension mismatch: " + shape(a) + "ᵀ * " + shape(b));
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k)
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError("add dimension mismatch: " + shape(a) + " + " + shape(b));
  }
  Matrix c = a;
  auto out = c.entries();
  auto rhs = b.entries();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError("subtract dimension mismatch: " + shape(a) + " - " + shape(b));
  }
  Matrix c = a;
  auto out = c.entries();
  auto rhs = b.entries();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= rhs[i];
  return c;
}

Matrix scaled(const Matrix& m, double factor) {
  Matrix c = m;
  for (double& v : c.entries()) v *= factor;
  return c;
}

double frobenius_norm_sq(const Matrix& m) {
  double sum = 0.0;
  for (double v : m.entries()) sum += v * v;
  return sum;
}

double frobenius_norm(const Matrix& m) { return std::sqrt(frobenius_norm_sq(m)); }

Matrix top_columns(const Matrix& m, std::size_t j) {
  if (j == 0 || j > m.cols()) {
    throw DataError("top_columns: j=" + std::to_string(j) + " out of range [1, " +
                    std::to_string(m.cols()) + "]");
  }
  Matrix out(m.rows(), j);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < j; ++c) out(r, c) = m(r, c);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::size_t effective_rank(std::span<const double> singular_values, double tol) {
  if (singular_values.empty()) return 0;
  const double largest = *std::max_element(singular_values.begin(), singular_values.end());
  if (!(largest > 0.0)) return 0;
  return static_cast<std::size_t>(std::count_if(singular_values.begin(), singular_values.end(),
                                                [&](double s) { return s > tol * largest; }));
}

namespace {

// Columns are stored as rows of `cols` (n vectors of length m) so rotations
// touch contiguous memory.
struct JacobiState {
  std::size_t m;
  std::size_t n;
  std::vector<double> cols;  // n x m
  std::vector<double> v;     // n x n, row j = column j of V

  double* col(std::size_t j) { return cols.data() + j * m; }
  double* vcol(std::size_t j) { return v.data() + j * n; }
};

void rotate(double* x, double* y, std::size_t len, double c, double s) {
  for (std::size_t i = 0; i < len; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

// Requires m >= n.
SvdResult jacobi_tall(const Matrix& a, const SvdOptions& options) {
  JacobiState st{a.rows(), a.cols(), std::vector<double>(a.rows() * a.cols()),
                 std::vector<double>(a.cols() * a.cols(), 0.0)};
  for (std::size_t r = 0; r < st.m; ++r)
    for (std::size_t c = 0; c < st.n; ++c) st.cols[c * st.m + r] = a(r, c);
  for (std::size_t j = 0; j < st.n; ++j) st.v[j * st.n + j] = 1.0;

  const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(st.m);
  bool converged = st.n < 2;
  for (std::size_t sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < st.n; ++p) {
      for (std::size_t q = p + 1; q < st.n; ++q) {
        double* cp = st.col(p);
        double* cq = st.col(q);
        double alpha = 0.0;
        double beta = 0.0;
        double gamma = 0.0;
        for (std::size_t i = 0; i < st.m; ++i) {
          alpha += cp[i] * cp[i];
          beta += cq[i] * cq[i];
          gamma += cp[i] * cq[i];
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(cp, cq, st.m, c, s);
        rotate(st.vcol(p), st.vcol(q), st.n, c, s);
      }
    }
  }
  if (!converged) {
    throw ConvergenceError("svd: one-sided Jacobi did not converge within " +
                           std::to_string(options.max_sweeps) + " sweeps");
  }

  std::vector<double> sigma(st.n);
  for (std::size_t j = 0; j < st.n; ++j) {
    const double* cj = st.col(j);
    double sum = 0.0;
    for (std::size_t i = 0; i < st.m; ++i) sum += cj[i] * cj[i];
    sigma[j] = std::sqrt(sum);
  }
  std::vector<std::size_t> order(st.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out{Matrix(st.m, st.n), std::vector<double>(st.n), Matrix(st.n, st.n)};
  std::vector<bool> filled(st.n, false);
  for (std::size_t k = 0; k < st.n; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    const double* vj = st.vcol(j);
    for (std::size_t i = 0; i < st.n; ++i) out.right(i, k) = vj[i];
    if (sigma[j] > std::numeric_limits<double>::min()) {
      const double* cj = st.col(j);
      for (std::size_t i = 0; i < st.m; ++i) out.left(i, k) = cj[i] / sigma[j];
      filled[k] = true;
    }
  }

  // Zero singular values leave their left vectors undetermined; complete the
  // basis with whichever standard basis vector survives projection best.
  for (std::size_t k = 0; k < st.n; ++k) {
    if (filled[k]) continue;
    double best_norm = -1.0;
    std::vector<double> best;
    for (std::size_t e = 0; e < st.m; ++e) {
      std::vector<double> cand(st.m, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t other = 0; other < st.n; ++other) {
          if (!filled[other]) continue;
          double proj = 0.0;
          for (std::size_t i = 0; i < st.m; ++i) proj += out.left(i, other) * cand[i];
          for (std::size_t i = 0; i < st.m; ++i) cand[i] -= proj * out.left(i, other);
        }
      }
      const double len = norm(cand);
      if (len > best_norm) {
        best_norm = len;
        best = std::move(cand);
      }
    }
    for (std::size_t i = 0; i < st.m; ++i) out.left(i, k) = best[i] / best_norm;
    filled[k] = true;
  }

  for (std::size_t k = 0; k < st.n; ++k) {
    std::size_t pivot = 0;
    for (std::size_t i = 1; i < st.n; ++i)
      if (std::abs(out.right(i, k)) > std::abs(out.right(pivot, k))) pivot = i;
    if (out.right(pivot, k) < 0.0) {
      for (std::size_t i = 0; i < st.n; ++i) out.right(i, k) = -out.right(i, k);
      for (std::size_t i = 0; i < st.m; ++i) out.left(i, k) = -out.left(i, k);
    }
  }
  return out;
}

}  // namespace

SvdResult svd(const Matrix& m, const SvdOptions& options) {
  if (!m.all_finite()) throw DataError("svd: input has non-finite entries");
  if (m.rows() >= m.cols()) return jacobi_tall(m, options);

  // Wide input: factor the transpose and swap the roles of the factors, then
  // restore the sign convention on the new right factor.
  SvdResult t = jacobi_tall(m.transpose(), options);
  SvdResult out{std::move(t.right), std::move(t.singular_values), std::move(t.left)};
  const std::size_t k = out.singular_values.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pivot = 0;
    for (std::size_t i = 1; i < out.right.rows(); ++i)
      if (std::abs(out.right(i, c)) > std::abs(out.right(pivot, c))) pivot = i;
    if (out.right(pivot, c) < 0.0) {
      for (std::size_t i = 0; i < out.right.rows(); ++i) out.right(i, c) = -out.right(i, c);
      for (std::size_t i = 0; i < out.left.rows(); ++i) out.left(i, c) = -out.left(i, c);
    }
  }
  return out;
}

}  // namespace repmatch
