#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "flatsomatic/data.hpp"
#include "flatsomatic/linalg.hpp"
#include "flatsomatic/synth.hpp"

namespace flatsomatic::testutil {

/// Wraps a dense 0/1 matrix as an occurrence matrix with synthetic ids/keys.
inline OccurrenceMatrix matrix_from_dense(const Matrix& x) {
  OccurrenceMatrix m;
  m.vocabulary.reserve(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) m.vocabulary.push_back(synth_feature_key(j));
  m.row_ptr.push_back(0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "R%04zu", i);
    m.sample_ids.push_back(buf);
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (x(i, j) != 0.0) m.col_idx.push_back(static_cast<std::uint32_t>(j));
    m.row_ptr.push_back(m.col_idx.size());
  }
  m.validate();
  return m;
}

/// Two-cluster binary dataset: rows alternate between complementary halves
/// plus per-entry flip noise.
inline Matrix two_block_dataset(std::size_t n, std::size_t m, double flip, RandomStream& rng) {
  Matrix x(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const bool left = i % 2 == 0;
    for (std::size_t j = 0; j < m; ++j) {
      bool bit = left ? j < m / 2 : j >= m / 2;
      if (rng.uniform() < flip) bit = !bit;
      x(i, j) = bit ? 1.0 : 0.0;
    }
  }
  return x;
}

}  // namespace flatsomatic::testutil
