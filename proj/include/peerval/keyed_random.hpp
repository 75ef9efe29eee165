#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace peerval {

// Counter-based randomness: every draw is a pure function of (seed, key,
// counter), so results do not depend on dispatch order.

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class KeyedStream {
 public:
  KeyedStream(std::uint64_t seed, std::string_view key) : base_(splitmix64(seed ^ fnv1a(key))) {}

  std::uint64_t bits(std::uint64_t counter) const { return splitmix64(base_ + splitmix64(counter)); }

  /// Uniform in [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller over counters (2c, 2c+1).
  double normal(std::uint64_t counter) const {
    const double u1 = 1.0 - uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t base_;
};

}  // namespace peerval
