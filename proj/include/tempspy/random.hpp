#pragma once

// Counter-based randomness. Every random quantity in the simulator is a pure
// function of (seed, counter), so measurements can be evaluated in any order.

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <cstdint>
#include <string_view>

namespace tempspy {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t counter) noexcept {
  return mix64(mix64(seed) ^ (counter * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
}

/// FNV-1a, used for naming sub-streams and for config digests.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named sub-stream of a master seed: ("array", "enroll", "spy", "scenario", ...).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                    std::uint64_t index = 0) noexcept {
  return hash_combine(hash_combine(master, fnv1a64(stream)), index);
}

/// Uniform in the open interval (0, 1); never returns 0 or 1.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

inline double normal_quantile(double u) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Largest |z| that `normal_quantile(to_unit(bits))` can produce.
inline double max_abs_normal_draw() {
  static const double bound = -normal_quantile(to_unit(0)) + 1e-9;
  return bound;
}

}  // namespace tempspy
