#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "flatsomatic/data.hpp"
#include "flatsomatic/random.hpp"

namespace flatsomatic {

/// Planted-cluster generator parameters. Each cluster owns a disjoint block
/// of signature_size features; in-signature features occur with probability
/// p_in, all others with p_out.
struct SynthParams {
  std::size_t n_samples = 2000;
  std::size_t n_features = 5000;
  std::size_t n_clusters = 8;
  double p_in = 0.3;
  double p_out = 0.005;
  std::size_t signature_size = 625;
  std::uint64_t seed = 1;
};

namespace stream_id {
constexpr std::uint64_t kSynthAssign = 0x53594E41;    // "SYNA"
constexpr std::uint64_t kSynthFeatures = 0x53594E46;  // "SYNF"
}

namespace detail {

inline const std::vector<std::string>& synth_chromosomes() {
  static const std::vector<std::string> chroms = [] {
    std::vector<std::string> v;
    for (int i = 1; i <= 22; ++i) v.push_back(std::to_string(i));
    v.push_back("X");
    v.push_back("Y");
    return v;
  }();
  return chroms;
}

}  // namespace detail

/// Maps a synthetic feature index to a valid mutation key so generated data
/// survives the TSV round trip.
inline std::string synth_feature_key(std::size_t feature) {
  const auto& chroms = detail::synth_chromosomes();
  return make_key(chroms[feature % chroms.size()], feature);
}

inline SomaticProfileSet synth_generate(const SynthParams& p) {
  if (p.n_samples == 0 || p.n_features == 0 || p.n_clusters == 0)
    throw argument_error("synth_generate: counts must be positive");
  if (!(p.p_in > 0.0 && p.p_in <= 1.0))
    throw argument_error("synth_generate: p_in must be in (0, 1]");
  if (!(p.p_out >= 0.0 && p.p_out <= p.p_in))
    throw argument_error("synth_generate: need 0 <= p_out <= p_in");
  if (p.signature_size * p.n_clusters > p.n_features)
    throw argument_error("synth_generate: signature_size * n_clusters exceeds n_features");

  std::vector<std::string> keys(p.n_features);
  for (std::size_t f = 0; f < p.n_features; ++f) keys[f] = synth_feature_key(f);

  RandomStream assign_rng(p.seed, stream_id::kSynthAssign);
  std::vector<std::size_t> cluster_of(p.n_samples);
  for (std::size_t i = 0; i < p.n_samples; ++i)
    cluster_of[i] = static_cast<std::size_t>(assign_rng.uniform_below(p.n_clusters));

  int id_width = 1;
  for (std::size_t v = p.n_samples; v >= 10 && id_width < 20; v /= 10) ++id_width;

  SomaticProfileSet out;
  out.samples.reserve(p.n_samples);
  for (std::size_t i = 0; i < p.n_samples; ++i) {
    RandomStream rng(p.seed, stream_id::kSynthFeatures, i);
    const std::size_t c = cluster_of[i];
    const std::size_t sig_begin = c * p.signature_size;
    const std::size_t sig_end = sig_begin + p.signature_size;
    std::vector<std::string> sample_keys;
    for (std::size_t f = 0; f < p.n_features; ++f) {
      const double prob = (f >= sig_begin && f < sig_end) ? p.p_in : p.p_out;
      if (rng.bernoulli(prob)) sample_keys.push_back(keys[f]);
    }
    std::sort(sample_keys.begin(), sample_keys.end());
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "S%0*zu", id_width, i);
    out.samples.push_back({idbuf, std::move(sample_keys)});
    out.labels[idbuf] = "cluster_" + std::to_string(c);
  }
  return out;
}

}  // namespace flatsomatic
