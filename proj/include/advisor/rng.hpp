#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace advisor {

/// SplitMix64 output function (Steele, Lea & Flood).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Index drawn from a probability row by inverse CDF at u ∈ [0,1).
/// Zero-probability entries are never returned.
inline std::size_t sample_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

/// Counter-based random stream. The i-th draw of the stream keyed by `key`
/// is mix64(key + (i+1)·golden), so any stream can be split off from
/// (seed, path...) without coordinating with other streams.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  /// Stream for a hierarchical path under a master seed, e.g. (seed, {episode}).
  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = mix64(seed + kGolden);
    for (std::uint64_t p : path) key = mix64(key ^ mix64(p + 0x632BE59BD9B4E019ULL));
    return RngStream(key);
  }

  RngStream split(std::uint64_t index) const { return RngStream(mix64(key_ ^ mix64(index + 0xD1B54A32D192ED03ULL))); }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Index drawn from a probability row by inverse CDF.
  std::size_t categorical(std::span<const double> probs) { return sample_index(probs, uniform()); }

  bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && uniform() < p); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace advisor
