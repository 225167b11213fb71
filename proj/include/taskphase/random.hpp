#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace taskphase {

// Counter-based random numbers: every draw is a pure function of its key, so
// rollouts can be replayed or parallelised without sharing generator state.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform01(std::initializer_list<std::uint64_t> key) {
  return to_unit(hash_key(key));
}

/// Stream tags keep draws for different purposes independent under the same key.
enum class Stream : std::uint64_t {
  Action = 1,
  Transition = 2,
  Initial = 3,
  Controller = 4,
  RewardCoin = 5,
  Generic = 6,
};

/// Sequential generator over a keyed stream, for code that just needs "the next number".
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t next_bits() { return hash_key({seed_, stream_, counter_++}); }
  double uniform() { return to_unit(next_bits()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// Inverse-CDF draw from a discrete distribution. Falls back to the last
/// positive entry when rounding leaves u above the cumulative sum.
inline std::size_t sample_categorical(std::span<const double> probs, double u) {
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cum += probs[i];
    if (u < cum) return i;
  }
  return last_positive;
}

}  // namespace taskphase
