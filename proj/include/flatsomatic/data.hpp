#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flatsomatic/errors.hpp"
#include "flatsomatic/linalg.hpp"
#include "flatsomatic/random.hpp"

namespace flatsomatic {

// ---------------------------------------------------------------------------
// Mutation records and keys

inline const std::set<std::string>& allowed_chromosomes() {
  static const std::set<std::string> chroms = [] {
    std::set<std::string> s;
    for (int i = 1; i <= 22; ++i) s.insert(std::to_string(i));
    s.insert("X");
    s.insert("Y");
    s.insert("MT");
    return s;
  }();
  return chroms;
}

/// Case-insensitive normalization with an optional leading "chr" stripped.
/// Returns nullopt for tokens outside {"1".."22","X","Y","MT"}.
inline std::optional<std::string> normalize_chromosome(std::string_view token) {
  std::string t(token);
  for (char& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t.rfind("CHR", 0) == 0) t = t.substr(3);
  if (!allowed_chromosomes().count(t)) return std::nullopt;
  return t;
}

struct MutationRecord {
  std::string sample_id;
  std::string chromosome;  // normalized
  std::uint64_t position = 0;
  std::optional<double> vaf;  // carried, never used downstream
};

/// The positional surjection: collapse a record to "CHROM:POS", discarding
/// every non-positional feature.
inline std::string make_key(const MutationRecord& r) {
  return r.chromosome + ":" + std::to_string(r.position);
}

inline std::string make_key(std::string_view chromosome, std::uint64_t position) {
  return std::string(chromosome) + ":" + std::to_string(position);
}

/// Inverse of make_key; round-trips by construction.
inline std::pair<std::string, std::uint64_t> parse_key(std::string_view key) {
  auto colon = key.find(':');
  if (colon == std::string_view::npos) throw parse_error("malformed mutation key: " + std::string(key));
  auto chrom = normalize_chromosome(key.substr(0, colon));
  if (!chrom) throw parse_error("malformed mutation key: " + std::string(key));
  std::string_view pos_sv = key.substr(colon + 1);
  std::uint64_t pos = 0;
  auto [p, ec] = std::from_chars(pos_sv.data(), pos_sv.data() + pos_sv.size(), pos);
  if (ec != std::errc{} || p != pos_sv.data() + pos_sv.size())
    throw parse_error("malformed mutation key: " + std::string(key));
  return {*chrom, pos};
}

// ---------------------------------------------------------------------------
// Profiles

struct SomaticProfileSet {
  struct Sample {
    std::string id;
    std::vector<std::string> keys;  // sorted, unique
  };
  std::vector<Sample> samples;
  std::map<std::string, std::string> labels;  // sample_id -> class label, optional

  std::size_t size() const { return samples.size(); }

  void validate() const {
    std::set<std::string_view> ids;
    for (const auto& s : samples)
      if (!ids.insert(s.id).second) throw argument_error("duplicate sample id: " + s.id);
    for (const auto& [id, _] : labels)
      if (!ids.count(id)) throw argument_error("label refers to unknown sample id: " + id);
  }
};

// ---------------------------------------------------------------------------
// Vocabulary

struct Vocabulary {
  std::vector<std::string> keys;           // lexicographically sorted, unique
  std::vector<std::uint64_t> doc_freq;     // aligned with keys
  std::uint64_t removed = 0;               // keys dropped by the frequency filter
};

/// Keeps keys carried by at least min_freq distinct samples (document
/// frequency); removal threshold matches "frequency < min_freq".
inline Vocabulary build_vocabulary(const SomaticProfileSet& profiles, std::uint64_t min_freq) {
  if (profiles.samples.empty()) throw argument_error("build_vocabulary: no samples");
  if (min_freq < 1) throw argument_error("build_vocabulary: min_freq must be >= 1");
  std::map<std::string, std::uint64_t> freq;
  for (const auto& s : profiles.samples)
    for (const auto& k : s.keys) ++freq[k];  // keys within a sample are unique
  Vocabulary v;
  for (const auto& [key, df] : freq) {
    if (df >= min_freq) {
      v.keys.push_back(key);
      v.doc_freq.push_back(df);
    } else {
      ++v.removed;
    }
  }
  if (v.keys.empty()) throw empty_vocabulary_error("vocabulary empty after filtering");
  return v;
}

// ---------------------------------------------------------------------------
// Occurrence matrix (sparse binary, CSR)

struct OccurrenceMatrix {
  std::vector<std::string> vocabulary;  // m columns, sorted
  std::vector<std::string> sample_ids;  // n rows
  std::vector<std::uint64_t> row_ptr;   // n+1
  std::vector<std::uint32_t> col_idx;   // nnz, strictly increasing per row

  std::size_t n_samples() const { return sample_ids.size(); }
  std::size_t n_features() const { return vocabulary.size(); }
  std::size_t nnz() const { return col_idx.size(); }

  std::span<const std::uint32_t> row(std::size_t i) const {
    return {col_idx.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
  }

  /// Densifies the listed rows into a (len x m) 0/1 matrix, in list order.
  Matrix gather_dense(std::span<const std::size_t> rows_wanted) const {
    Matrix out(rows_wanted.size(), n_features(), 0.0);
    for (std::size_t r = 0; r < rows_wanted.size(); ++r) {
      double* dst = out.row(r);
      for (std::uint32_t j : row(rows_wanted[r])) dst[j] = 1.0;
    }
    return out;
  }

  Matrix to_dense() const {
    std::vector<std::size_t> all(n_samples());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return gather_dense(all);
  }

  std::vector<std::uint64_t> column_popcounts() const {
    std::vector<std::uint64_t> c(n_features(), 0);
    for (std::uint32_t j : col_idx) ++c[j];
    return c;
  }

  void validate() const {
    if (row_ptr.size() != n_samples() + 1 || row_ptr.front() != 0 || row_ptr.back() != nnz())
      throw shape_error("occurrence matrix: bad row pointers");
    for (std::size_t i = 0; i < n_samples(); ++i) {
      auto r = row(i);
      for (std::size_t t = 0; t < r.size(); ++t) {
        if (r[t] >= n_features()) throw shape_error("occurrence matrix: column index out of range");
        if (t > 0 && r[t] <= r[t - 1]) throw shape_error("occurrence matrix: row indices not strictly increasing");
      }
    }
  }
};

/// Row i, column j set iff sample i carries vocabulary[j]; out-of-vocabulary
/// keys are ignored. Row order follows the profile order.
inline OccurrenceMatrix build_matrix(const SomaticProfileSet& profiles,
                                     std::span<const std::string> vocabulary) {
  for (std::size_t j = 1; j < vocabulary.size(); ++j)
    if (!(vocabulary[j - 1] < vocabulary[j]))
      throw argument_error("build_matrix: vocabulary must be sorted and duplicate-free");
  OccurrenceMatrix m;
  m.vocabulary.assign(vocabulary.begin(), vocabulary.end());
  m.row_ptr.reserve(profiles.samples.size() + 1);
  m.row_ptr.push_back(0);
  for (const auto& s : profiles.samples) {
    m.sample_ids.push_back(s.id);
    for (const auto& k : s.keys) {
      auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), k);
      if (it != vocabulary.end() && *it == k)
        m.col_idx.push_back(static_cast<std::uint32_t>(it - vocabulary.begin()));
    }
    m.row_ptr.push_back(m.col_idx.size());
  }
  return m;
}

inline OccurrenceMatrix build_matrix(const SomaticProfileSet& profiles, const Vocabulary& vocab) {
  return build_matrix(profiles, std::span<const std::string>(vocab.keys));
}

// ---------------------------------------------------------------------------
// K-fold partitioning

struct KFoldPlan {
  std::vector<std::vector<std::size_t>> folds;
  std::uint64_t seed = 0;
};

namespace stream_id {
constexpr std::uint64_t kFold = 0x4B464F4C;  // "KFOL"
}

/// Deterministic shuffle by seed, then contiguous slices; fold sizes differ
/// by at most one (the first n%k folds take the extra element).
inline KFoldPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) throw argument_error("kfold_split: need 2 <= k <= n");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  RandomStream rng(seed, stream_id::kFold);
  rng.shuffle(idx);
  KFoldPlan plan;
  plan.seed = seed;
  std::size_t base = n / k, extra = n % k, at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = base + (f < extra ? 1 : 0);
    plan.folds.emplace_back(idx.begin() + at, idx.begin() + at + len);
    at += len;
  }
  return plan;
}

/// Complement of one fold, in ascending index order.
inline std::vector<std::size_t> fold_complement(const KFoldPlan& plan, std::size_t fold,
                                                std::size_t n) {
  std::vector<bool> held(n, false);
  for (std::size_t i : plan.folds[fold]) held[i] = true;
  std::vector<std::size_t> rest;
  rest.reserve(n - plan.folds[fold].size());
  for (std::size_t i = 0; i < n; ++i)
    if (!held[i]) rest.push_back(i);
  return rest;
}

}  // namespace flatsomatic
