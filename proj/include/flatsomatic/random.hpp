#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace flatsomatic {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream derived from (seed, stream_id, substream).
///
/// All randomness in the library flows through streams derived this way from
/// one global seed, so adding a new consumer (or running existing ones in
/// parallel) never reorders the draws of another stream. Draw primitives are
/// implemented by hand rather than via std distributions so that sequences
/// are fixed by this header alone.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream_id * 0xD1342543DE82EF95ULL;
    std::uint64_t b = splitmix64(s);
    s ^= substream * 0xDABA0B6EB09322DBULL;
    std::uint64_t c = splitmix64(s);
    engine_.seed(a ^ (b << 1) ^ c);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), bitmask rejection (n > 0).
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t mask = ~std::uint64_t{0} >> std::countl_zero(n - 1);
    std::uint64_t v;
    do {
      v = engine_() & mask;
    } while (v >= n);
    return v;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; generates pairs, caches the spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Fisher-Yates shuffle with draws from this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace flatsomatic
