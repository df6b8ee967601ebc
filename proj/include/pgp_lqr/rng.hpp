#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace pgp_lqr {

/// Counter-based 64-bit random stream.
///
/// The i-th output (i = 0, 1, ...) of a stream with key k is
///
///     mix64(k + (i + 1) * 0x9E3779B97F4A7C15)
///
/// where mix64 is the SplitMix64 finalizer. A stream is identified by
/// (seed, stream id); its key is mix64(mix64(seed) + stream * 0xD1B54A32D192ED03).
/// Sub-streams derive their key the same way from the parent key, so the
/// values drawn for sample i depend only on (master seed, i) and never on
/// scheduling.
///
/// Derived variates:
///   uniform()  = (next_u64() >> 11) * 2^-53                  in [0, 1)
///   normal()   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)          one normal per two uniforms
///
/// Matrices are always filled row-major from a stream.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kStreamMul = 0xD1B54A32D192ED03ULL;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(mix64(seed) + stream * kStreamMul)) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Independent child stream; does not advance this stream.
  CounterRng substream(std::uint64_t index) const { return CounterRng(key_, index, Tag{}); }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  struct Tag {};
  CounterRng(std::uint64_t parent_key, std::uint64_t index, Tag)
      : key_(mix64(mix64(parent_key) + index * kStreamMul)) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace pgp_lqr
