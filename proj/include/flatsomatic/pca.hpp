#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "flatsomatic/linalg.hpp"
#include "flatsomatic/random.hpp"

namespace flatsomatic {

struct PcaResult {
  Matrix projection;                       // n x d scores
  Matrix components;                       // d x m orthonormal rows
  std::vector<double> explained_variance;  // eigenvalues, non-increasing
  std::vector<double> explained_ratios;    // eigenvalue / total variance
  std::vector<double> mean;                // column means of the input
};

namespace detail {

inline std::vector<double> get_col(const Matrix& m, std::size_t j) {
  std::vector<double> v(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) v[i] = m(i, j);
  return v;
}

inline void set_col(Matrix& m, std::size_t j, const std::vector<double>& v) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = v[i];
}

inline double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Modified Gram-Schmidt over columns, run twice for stability. Columns that
// collapse (rank deficiency) are replaced with fresh seeded random vectors
// orthogonalized against the ones already accepted.
inline void orthonormalize_columns(Matrix& b, RandomStream& refill) {
  const std::size_t q = b.rows(), d = b.cols();
  std::vector<std::vector<double>> cols(d);
  for (std::size_t j = 0; j < d; ++j) cols[j] = get_col(b, j);
  for (std::size_t j = 0; j < d; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < j; ++i) {
        const double proj = vec_dot(cols[i], cols[j]);
        for (std::size_t t = 0; t < q; ++t) cols[j][t] -= proj * cols[i][t];
      }
    double norm = std::sqrt(vec_dot(cols[j], cols[j]));
    while (norm < 1e-150) {
      for (double& v : cols[j]) v = refill.normal();
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < j; ++i) {
          const double proj = vec_dot(cols[i], cols[j]);
          for (std::size_t t = 0; t < q; ++t) cols[j][t] -= proj * cols[i][t];
        }
      norm = std::sqrt(vec_dot(cols[j], cols[j]));
    }
    for (double& v : cols[j]) v /= norm;
  }
  for (std::size_t j = 0; j < d; ++j) set_col(b, j, cols[j]);
}

struct EigenPairs {
  Matrix vectors;  // q x d, orthonormal columns
  std::vector<double> values;
};

// Subspace (block power) iteration for the top-d eigenpairs of a symmetric
// PSD matrix. Stops when every Ritz residual ||S v - lambda v|| is small
// relative to the leading eigenvalue.
inline EigenPairs top_eigenpairs(const Matrix& s, std::size_t d, std::size_t max_sweeps = 300,
                                 double tol = 1e-11) {
  const std::size_t q = s.rows();
  RandomStream rng(0x50434149, 0x45494745);  // fixed internal stream: PCA is seedless
  Matrix b(q, d);
  for (double& v : b.values()) v = rng.normal();
  orthonormalize_columns(b, rng);
  std::vector<double> lambda(d, 0.0);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    Matrix y = matmul(s, b);
    double max_residual = 0.0, lead = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      auto bj = get_col(b, j);
      auto yj = get_col(y, j);
      lambda[j] = vec_dot(bj, yj);
      double res = 0.0;
      for (std::size_t t = 0; t < q; ++t) {
        const double r = yj[t] - lambda[j] * bj[t];
        res += r * r;
      }
      max_residual = std::max(max_residual, std::sqrt(res));
      lead = std::max(lead, std::abs(lambda[j]));
    }
    if (max_residual <= tol * std::max(lead, 1.0)) break;
    b = std::move(y);
    orthonormalize_columns(b, rng);
  }
  // order by eigenvalue, descending; stable so tied pairs keep their order
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return lambda[a] > lambda[c]; });
  EigenPairs out;
  out.vectors = Matrix(q, d);
  out.values.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    out.values[j] = std::max(lambda[order[j]], 0.0);
    for (std::size_t t = 0; t < q; ++t) out.vectors(t, j) = b(t, order[j]);
  }
  return out;
}

}  // namespace detail

/// Principal components of X via the smaller of the covariance (m x m) or
/// Gram (n x n) eigenproblem. Components are orthonormal rows with the
/// largest-magnitude entry positive; eigenvalues use the n-1 normalization.
inline PcaResult pca(const Matrix& x, std::size_t d) {
  const std::size_t n = x.rows(), m = x.cols();
  if (n < 2) throw argument_error("pca: need at least 2 rows");
  if (d < 1 || d > std::min(n, m))
    throw argument_error("pca: d must satisfy 1 <= d <= min(n, m)");

  PcaResult r;
  r.mean = column_sums(x);
  for (double& v : r.mean) v /= static_cast<double>(n);
  Matrix xc = x;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = xc.row(i);
    for (std::size_t j = 0; j < m; ++j) row[j] -= r.mean[j];
  }

  double total_var = 0.0;
  for (double v : xc.values()) total_var += v * v;
  total_var /= static_cast<double>(n - 1);

  if (total_var == 0.0) {
    r.components = Matrix(d, m);
    for (std::size_t j = 0; j < d; ++j) r.components(j, j) = 1.0;
    r.projection = Matrix(n, d, 0.0);
    r.explained_variance.assign(d, 0.0);
    r.explained_ratios.assign(d, 0.0);
    return r;
  }

  const double scale = 1.0 / static_cast<double>(n - 1);
  if (m <= n) {
    Matrix cov = matmul_tn(xc, xc);
    scale_inplace(cov, scale);
    detail::EigenPairs eig = detail::top_eigenpairs(cov, d);
    r.components = Matrix(d, m);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t t = 0; t < m; ++t) r.components(j, t) = eig.vectors(t, j);
    r.explained_variance = std::move(eig.values);
  } else {
    Matrix gram = matmul_nt(xc, xc);
    scale_inplace(gram, scale);
    detail::EigenPairs eig = detail::top_eigenpairs(gram, d);
    // lift Gram eigenvectors u to input space: v = Xc^T u, normalized. A unit
    // eigenvector with eigenvalue l lifts to norm sqrt((n-1) l), so directions
    // whose residual is negligible against the leading one are treated as null.
    Matrix lifted = matmul_tn(xc, eig.vectors);  // m x d
    const double lead_norm = std::sqrt(static_cast<double>(n - 1) * eig.values[0]);
    const double null_threshold = std::max(1e-150, 1e-7 * lead_norm);
    r.components = Matrix(d, m);
    for (std::size_t j = 0; j < d; ++j) {
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t prev = 0; prev < j; ++prev) {
          double proj = 0.0;
          for (std::size_t t = 0; t < m; ++t) proj += r.components(prev, t) * lifted(t, j);
          for (std::size_t t = 0; t < m; ++t) lifted(t, j) -= proj * r.components(prev, t);
        }
      double norm = 0.0;
      for (std::size_t t = 0; t < m; ++t) norm += lifted(t, j) * lifted(t, j);
      norm = std::sqrt(norm);
      if (norm < null_threshold) {
        // null direction: fall back to a canonical basis vector orthogonal
        // to the components accepted so far
        for (std::size_t cand = 0; cand < m; ++cand) {
          std::vector<double> e(m, 0.0);
          e[cand] = 1.0;
          for (std::size_t prev = 0; prev < j; ++prev) {
            double proj = 0.0;
            for (std::size_t t = 0; t < m; ++t) proj += r.components(prev, t) * e[t];
            for (std::size_t t = 0; t < m; ++t) e[t] -= proj * r.components(prev, t);
          }
          double en = 0.0;
          for (double v : e) en += v * v;
          en = std::sqrt(en);
          if (en > 1e-8) {
            for (std::size_t t = 0; t < m; ++t) r.components(j, t) = e[t] / en;
            break;
          }
        }
      } else {
        for (std::size_t t = 0; t < m; ++t) r.components(j, t) = lifted(t, j) / norm;
      }
    }
    r.explained_variance = std::move(eig.values);
  }

  // sign convention: the largest-magnitude entry of each component is positive
  for (std::size_t j = 0; j < d; ++j) {
    double* row = r.components.row(j);
    std::size_t arg = 0;
    for (std::size_t t = 1; t < m; ++t)
      if (std::abs(row[t]) > std::abs(row[arg])) arg = t;
    if (row[arg] < 0.0)
      for (std::size_t t = 0; t < m; ++t) row[t] = -row[t];
  }

  r.projection = matmul_nt(xc, r.components);
  r.explained_ratios.resize(d);
  for (std::size_t j = 0; j < d; ++j) r.explained_ratios[j] = r.explained_variance[j] / total_var;
  return r;
}

}  // namespace flatsomatic
