#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace solarchain::rng {

/// FNV-1a, used to turn names (cities, tags) into stream-key components.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a key tuple.
constexpr std::uint64_t key_hash(std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t k : key) h = mix64(h ^ mix64(k));
  return h;
}

/// An independent random stream addressed by a key such as
/// (seed, tag, city, node, hour). Draws depend only on the key, so adding
/// cities or nodes never perturbs existing streams. The engine is
/// std::mt19937_64, whose output sequence is fixed by the standard; the
/// distributions below are written out so results do not depend on the
/// standard library's distribution implementations.
class Stream {
 public:
  explicit Stream(std::initializer_list<std::uint64_t> key) : engine_(key_hash(key)) {}

  std::uint64_t next() { return engine_(); }

  /// [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [lo, hi], unbiased by rejection.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

  /// Box-Muller; one draw per call.
  double normal(double mean = 0.0, double sd = 1.0);

  /// Normal restricted to (lo, hi] by rejection; falls back to clamping
  /// after a bounded number of attempts.
  double truncated_normal(double mean, double sd, double lo, double hi);

 private:
  std::mt19937_64 engine_;
};

}  // namespace solarchain::rng
