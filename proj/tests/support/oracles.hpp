#pragma once

// Independent reference computations for tests. Nothing here calls the
// library's numerical kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "repmatch/linalg.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const repmatch::Matrix& m) {
  Dense out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

inline repmatch::Matrix from_dense(const Dense& d) { return repmatch::Matrix::from_rows(d); }

inline Dense matmul(const Dense& a, const Dense& b) {
  const std::size_t n = a.size();
  const std::size_t k = b.size();
  const std::size_t m = b.front().size();
  Dense out(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      long double acc = 0.0L;
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<long double>(a[i][p]) * b[p][j];
      out[i][j] = static_cast<double>(acc);
    }
  return out;
}

inline Dense transpose(const Dense& a) {
  Dense out(a.front().size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[j][i] = a[i][j];
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(acc);
}

// Modified Gram-Schmidt with reorthogonalization; vectors whose residual falls
// below tol times their original norm are dropped.
inline std::vector<std::vector<double>> gram_schmidt(const std::vector<std::vector<double>>& vectors,
                                                     double tol = 1e-9) {
  std::vector<std::vector<double>> basis;
  for (const auto& v : vectors) {
    const double original = std::sqrt(dot(v, v));
    if (original == 0.0) continue;
    std::vector<double> w = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) {
        const double c = dot(w, q);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * q[i];
      }
    const double n = std::sqrt(dot(w, w));
    if (n <= tol * original) continue;
    for (double& x : w) x /= n;
    basis.push_back(std::move(w));
  }
  return basis;
}

// ‖Q1ᵀQ2‖²_F / min(|Q1|, |Q2|) for orthonormal vector lists.
inline double subspace_phi(const std::vector<std::vector<double>>& q1, const std::vector<std::vector<double>>& q2) {
  double acc = 0.0;
  for (const auto& a : q1)
    for (const auto& b : q2) {
      const double c = dot(a, b);
      acc += c * c;
    }
  return acc / static_cast<double>(std::min(q1.size(), q2.size()));
}

// Determinant by Gaussian elimination with partial pivoting.
inline double determinant(Dense m) {
  const std::size_t n = m.size();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[pivot][c])) pivot = r;
    if (m[pivot][c] == 0.0) return 0.0;
    if (pivot != c) {
      std::swap(m[pivot], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return det;
}

// Eigenvalues of a small symmetric matrix with distinct eigenvalues: scan
// det(G - λI) for sign changes on [0, trace], then bisect each bracket.
inline std::vector<double> symmetric_eigenvalues(const Dense& g, std::size_t scan_steps = 200000) {
  const std::size_t n = g.size();
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += g[i][i];
  auto f = [&](double lambda) {
    Dense s = g;
    for (std::size_t i = 0; i < n; ++i) s[i][i] -= lambda;
    return determinant(s);
  };
  const double lo = -1e-12 * (trace + 1.0);
  const double hi = trace * (1.0 + 1e-9) + 1e-12;
  std::vector<double> roots;
  double prev_x = lo;
  double prev_f = f(lo);
  for (std::size_t s = 1; s <= scan_steps; ++s) {
    const double x = lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(scan_steps);
    const double fx = f(x);
    if (fx == 0.0) {
      roots.push_back(x);
    } else if ((prev_f < 0.0) != (fx < 0.0) && prev_f != 0.0) {
      double a = prev_x;
      double b = x;
      double fa = prev_f;
      for (int it = 0; it < 200 && b - a > 0.0; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        const double fm = f(mid);
        if ((fm < 0.0) == (fa < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_f = fx;
  }
  std::sort(roots.rbegin(), roots.rend());
  return roots;
}

inline std::vector<double> singular_values(const repmatch::Matrix& m) {
  const Dense d = to_dense(m);
  const Dense gram = matmul(transpose(d), d);
  auto eig = symmetric_eigenvalues(gram);
  for (double& e : eig) e = std::sqrt(std::max(e, 0.0));
  return eig;
}

inline std::vector<double> gaussian_vector(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

inline repmatch::Matrix gaussian_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols) {
  std::vector<double> entries = gaussian_vector(gen, rows * cols);
  return repmatch::Matrix(rows, cols, std::move(entries));
}

// d x d matrix Σ σ_k u_k v_kᵀ with orthonormal u, v drawn by Gram-Schmidt.
struct Planted {
  repmatch::Matrix matrix;
  std::vector<std::vector<double>> left;
  std::vector<std::vector<double>> right;
};

inline Planted planted(std::mt19937_64& gen, std::size_t d, const std::vector<double>& sigmas) {
  std::vector<std::vector<double>> raw_u;
  std::vector<std::vector<double>> raw_v;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    raw_u.push_back(gaussian_vector(gen, d));
    raw_v.push_back(gaussian_vector(gen, d));
  }
  Planted p{repmatch::Matrix(d, d), gram_schmidt(raw_u), gram_schmidt(raw_v)};
  for (std::size_t k = 0; k < sigmas.size(); ++k)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) p.matrix(i, j) += sigmas[k] * p.left[k][i] * p.right[k][j];
  return p;
}

inline std::vector<std::vector<double>> leading(const std::vector<std::vector<double>>& q, std::size_t k) {
  return {q.begin(), q.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace oracle
