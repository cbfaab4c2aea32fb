#pragma once

#include <cstdint>

namespace fignn {

/// Counter-based generator: the n-th draw of (seed, stream) is a pure function
/// of the three integers, so results do not depend on call order across
/// streams or on the platform's <random> implementation.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    return mix(mix(seed_ ^ mix(stream_ + 0x632BE59BD9B4E019ull)) + counter_++);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// Stable 64-bit hash of a string, used to derive RNG streams from names.
inline std::uint64_t stream_id(const char* name) {
  std::uint64_t h = 1469598103934665603ull;
  for (; *name; ++name) {
    h ^= static_cast<unsigned char>(*name);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace fignn
