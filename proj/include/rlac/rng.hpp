#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace rlac {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Counter-based generator: the i-th draw is a pure function of (key, i), so
// a stream's full state is two integers and substreams never overlap in
// practice. Derived streams are obtained by hashing a name or an index into
// the key, which keeps parallel work reproducible regardless of scheduling.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x6A09E667F3BCC909ULL)) {}
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  Rng substream(std::string_view name) const {
    return Rng(mix64(key_ ^ fnv1a(name)), 0);
  }
  Rng substream(std::uint64_t index) const {
    return Rng(mix64(key_ + 0x9E3779B97F4A7C15ULL * (index + 1)), 0);
  }

  std::uint64_t next_u64() {
    return mix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Box-Muller, one draw per pair of uniforms; no cached spare so the state
  // stays (key, counter).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t key_ = mix64(0x6A09E667F3BCC909ULL);
  std::uint64_t counter_ = 0;
};

}  // namespace rlac
