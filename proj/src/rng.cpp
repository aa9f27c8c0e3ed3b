#include "solarchain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace solarchain::rng {

std::uint64_t Stream::uniform_int(std::uint64_t lo, std::uint64_t hi) {
  if (hi <= lo) return lo;
  const std::uint64_t span = hi - lo;
  if (span == std::numeric_limits<std::uint64_t>::max()) return next();
  const std::uint64_t n = span + 1;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return lo + x % n;
}

double Stream::normal(double mean, double sd) {
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Stream::truncated_normal(double mean, double sd, double lo, double hi) {
  for (int i = 0; i < 64; ++i) {
    const double x = normal(mean, sd);
    if (x > lo && x <= hi) return x;
  }
  return std::clamp(mean, std::nextafter(lo, hi), hi);
}

}  // namespace solarchain::rng
