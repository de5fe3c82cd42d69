#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "flatsomatic/errors.hpp"

namespace flatsomatic {

/// Dense row-major matrix of 64-bit floats.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
      if (r.size() != m.cols_) throw shape_error("from_rows: ragged row lengths");
      std::size_t j = 0;
      for (double v : r) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  std::span<double> row_span(std::size_t i) { return {row(i), cols_}; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

  std::span<double> values() { return {data_.data(), data_.size()}; }
  std::span<const double> values() const { return {data_.data(), data_.size()}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  /// Checked-mode constructor guard: rejects NaN/Inf payloads.
  void require_finite(const char* what) const {
    if (!all_finite()) throw shape_error(std::string(what) + ": non-finite entries");
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// Worker count for row-parallel kernels. FLATSOMATIC_THREADS caps it;
/// unset means single-threaded.
inline int env_worker_count() {
  const char* s = std::getenv("FLATSOMATIC_THREADS");
  if (!s) return 1;
  int v = std::atoi(s);
  return v > 0 ? v : 1;
}

namespace detail {

// Splits [0, n) into contiguous row ranges, runs fn(begin, end) per range.
// Each output row is produced by exactly one worker with the same serial
// inner-loop order as the single-threaded path, so results are bit-identical
// for any worker count.
template <typename Fn>
void parallel_rows(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n < 2) {
    fn(std::size_t{0}, n);
    return;
  }
  std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> threads;
  threads.reserve(w);
  std::size_t chunk = (n + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    std::size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    threads.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : threads) th.join();
}

constexpr std::size_t kBlockK = 256;

}  // namespace detail

/// C = A * B. Accumulation order over k is fixed (ascending), independent of
/// blocking and worker count.
inline Matrix matmul(const Matrix& a, const Matrix& b, int workers = -1) {
  if (a.cols() != b.rows()) throw shape_error("matmul: inner dimensions differ");
  if (workers < 0) workers = env_worker_count();
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  Matrix c(n, p, 0.0);
  detail::parallel_rows(n, workers, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t k0 = 0; k0 < m; k0 += detail::kBlockK) {
      const std::size_t k1 = std::min(m, k0 + detail::kBlockK);
      for (std::size_t i = i0; i < i1; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t k = k0; k < k1; ++k) {
          const double aik = arow[k];
          if (aik == 0.0) continue;
          const double* brow = b.row(k);
          for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
        }
      }
    }
  });
  return c;
}

/// C = A^T * B, A is (n x r), B is (n x p), C is (r x p).
inline Matrix matmul_tn(const Matrix& a, const Matrix& b, int workers = -1) {
  if (a.rows() != b.rows()) throw shape_error("matmul_tn: row counts differ");
  if (workers < 0) workers = env_worker_count();
  const std::size_t n = a.rows(), r = a.cols(), p = b.cols();
  Matrix c(r, p, 0.0);
  // k runs over the shared row index; same fixed order in every partition.
  detail::parallel_rows(r, workers, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t k = 0; k < n; ++k) {
      const double* arow = a.row(k);
      const double* brow = b.row(k);
      for (std::size_t i = i0; i < i1; ++i) {
        const double aki = arow[i];
        if (aki == 0.0) continue;
        double* crow = c.row(i);
        for (std::size_t j = 0; j < p; ++j) crow[j] += aki * brow[j];
      }
    }
  });
  return c;
}

/// C = A * B^T, A is (n x m), B is (p x m), C is (n x p).
inline Matrix matmul_nt(const Matrix& a, const Matrix& b, int workers = -1) {
  if (a.cols() != b.cols()) throw shape_error("matmul_nt: column counts differ");
  if (workers < 0) workers = env_worker_count();
  const std::size_t n = a.rows(), m = a.cols(), p = b.rows();
  Matrix c(n, p, 0.0);
  detail::parallel_rows(n, workers, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const double* arow = a.row(i);
      double* crow = c.row(i);
      for (std::size_t j = 0; j < p; ++j) {
        const double* brow = b.row(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) acc += arow[k] * brow[k];
        crow[j] = acc;
      }
    }
  });
  return c;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw shape_error("add_inplace: shape mismatch");
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
}

inline void scale_inplace(Matrix& a, double s) {
  for (double& v : a.values()) v *= s;
}

/// Adds v to every row of x.
inline void add_row_vector(Matrix& x, std::span<const double> v) {
  if (x.cols() != v.size()) throw shape_error("add_row_vector: length mismatch");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) r[j] += v[j];
  }
}

/// Column sums of x.
inline std::vector<double> column_sums(const Matrix& x) {
  std::vector<double> s(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) s[j] += r[j];
  }
  return s;
}

}  // namespace flatsomatic
