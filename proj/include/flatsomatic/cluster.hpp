#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flatsomatic/linalg.hpp"
#include "flatsomatic/metrics.hpp"
#include "flatsomatic/random.hpp"

namespace flatsomatic {

struct Clustering {
  std::vector<std::size_t> assignments;
  Matrix centroids;  // k x d
  double inertia = 0.0;
};

namespace stream_id {
constexpr std::uint64_t kKmeans = 0x4B4D4E53;  // "KMNS"
}

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

// Nearest centroid per point; ties break to the lowest centroid index.
inline std::vector<std::size_t> assign_nearest(const Matrix& x, const Matrix& c) {
  std::vector<std::size_t> a(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = sq_dist(x.row(i), c.row(0), x.cols());
    std::size_t arg = 0;
    for (std::size_t j = 1; j < c.rows(); ++j) {
      const double d = sq_dist(x.row(i), c.row(j), x.cols());
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    a[i] = arg;
  }
  return a;
}

inline double sse(const Matrix& x, const Matrix& c, const std::vector<std::size_t>& assign) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += sq_dist(x.row(i), c.row(assign[i]), x.cols());
  return s;
}

// D^2-weighted seeding.
inline Matrix kmeanspp_init(const Matrix& x, std::size_t k, RandomStream& rng) {
  const std::size_t n = x.rows(), d = x.cols();
  Matrix c(k, d);
  std::size_t first = rng.uniform_below(n);
  std::copy_n(x.row(first), d, c.row(0));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(x.row(i), c.row(0), d);
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_below(n);
    }
    std::copy_n(x.row(pick), d, c.row(j));
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x.row(i), c.row(j), d));
  }
  return c;
}

}  // namespace detail

/// One Lloyd run from a k-means++ start. inertia_trace (when given) records
/// the SSE after every update+assign sweep; the sequence is non-increasing.
inline Clustering kmeans_single(const Matrix& x, std::size_t k, RandomStream& rng,
                                std::size_t max_iters = 100,
                                std::vector<double>* inertia_trace = nullptr) {
  const std::size_t n = x.rows(), d = x.cols();
  Clustering result;
  result.centroids = detail::kmeanspp_init(x, k, rng);
  result.assignments = detail::assign_nearest(x, result.centroids);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // update step
    result.centroids.fill(0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.assignments[i];
      ++counts[c];
      double* crow = result.centroids.row(c);
      const double* xrow = x.row(i);
      for (std::size_t j = 0; j < d; ++j) crow[j] += xrow[j];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0) {
        double* crow = result.centroids.row(c);
        for (std::size_t j = 0; j < d; ++j) crow[j] /= static_cast<double>(counts[c]);
      }
    // empty clusters grab the point farthest from its current centroid
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double worst = -1.0;
      std::size_t far = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dist = detail::sq_dist(x.row(i), result.centroids.row(result.assignments[i]), d);
        if (dist > worst) {
          worst = dist;
          far = i;
        }
      }
      std::copy_n(x.row(far), d, result.centroids.row(c));
      result.assignments[far] = c;
      counts[c] = 1;
    }
    // assignment step
    std::vector<std::size_t> next = detail::assign_nearest(x, result.centroids);
    if (inertia_trace) inertia_trace->push_back(detail::sse(x, result.centroids, next));
    const bool converged = next == result.assignments;
    result.assignments = std::move(next);
    if (converged) break;
  }
  result.inertia = detail::sse(x, result.centroids, result.assignments);
  return result;
}

/// Best of `restarts` independent Lloyd runs (ties keep the earliest restart).
inline Clustering kmeans(const Matrix& x, std::size_t k, std::size_t restarts = 10,
                         std::size_t max_iters = 100, std::uint64_t seed = 42) {
  if (k < 1) throw argument_error("kmeans: k must be >= 1");
  if (k > x.rows()) throw argument_error("kmeans: k exceeds number of points");
  if (restarts < 1) throw argument_error("kmeans: restarts must be >= 1");
  Clustering best;
  for (std::size_t r = 0; r < restarts; ++r) {
    RandomStream rng(seed, stream_id::kKmeans, r);
    Clustering c = kmeans_single(x, k, rng, max_iters);
    if (r == 0 || c.inertia < best.inertia) best = std::move(c);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Normalized mutual information

/// Maps arbitrary labels to dense indices (lexicographic order).
inline std::vector<std::size_t> label_indices(std::span<const std::string> labels) {
  std::map<std::string, std::size_t> ids;
  for (const auto& s : labels) ids.emplace(s, 0);
  std::size_t next = 0;
  for (auto& [key, id] : ids) id = next++;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& s : labels) out.push_back(ids.at(s));
  return out;
}

/// 2 I(A;B) / (H(A)+H(B)) with natural logs; 1 when both labelings are
/// constant, 0 when exactly one is.
inline double nmi(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw shape_error("nmi: length mismatch");
  if (a.empty()) throw argument_error("nmi: empty labelings");
  const std::size_t n = a.size();
  const std::size_t ka = *std::max_element(a.begin(), a.end()) + 1;
  const std::size_t kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<double> na(ka, 0.0), nb(kb, 0.0), nab(ka * kb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    na[a[i]] += 1.0;
    nb[b[i]] += 1.0;
    nab[a[i] * kb + b[i]] += 1.0;
  }
  const double dn = static_cast<double>(n);
  auto entropy = [&](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts)
      if (c > 0.0) h -= (c / dn) * std::log(c / dn);
    return h;
  };
  const double ha = entropy(na), hb = entropy(nb);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < ka; ++i)
    for (std::size_t j = 0; j < kb; ++j) {
      const double c = nab[i * kb + j];
      if (c > 0.0) mi += (c / dn) * std::log(c * dn / (na[i] * nb[j]));
    }
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

/// K-means on both representations with shared settings, NMI of each against
/// the reference labels.
inline MetricsReport cluster_compare(const Matrix& embeddings, const Matrix& pca_projection,
                                     std::span<const std::size_t> true_labels, std::size_t k,
                                     std::uint64_t seed, std::size_t restarts = 10,
                                     std::size_t max_iters = 100) {
  if (embeddings.rows() != pca_projection.rows() || embeddings.rows() != true_labels.size())
    throw shape_error("cluster_compare: row counts differ");
  Clustering on_vae = kmeans(embeddings, k, restarts, max_iters, seed);
  Clustering on_pca = kmeans(pca_projection, k, restarts, max_iters, seed);
  MetricsReport r;
  r.nmi_vae = nmi(on_vae.assignments, true_labels);
  r.nmi_pca = nmi(on_pca.assignments, true_labels);
  r.seed = seed;
  r.k = k;
  r.dim = embeddings.cols();
  return r;
}

}  // namespace flatsomatic
