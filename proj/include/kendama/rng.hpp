#pragma once

/**
 * @file rng.hpp
 * @brief Seeded random streams.
 *
 * Engines are std::mt19937_64; the conversions to floating point are written
 * out here so streams stay identical across standard libraries.
 */

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace kendama::rng {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of child stream `index` under `parent`; distinct (parent, index) pairs give unrelated streams.
inline std::uint64_t child_seed(std::uint64_t parent, std::uint64_t index) {
  return mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Engine& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

/// Uniform on the open interval (0, 1).
inline double uniform_open01(Engine& g) { return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53; }

inline double uniform(Engine& g, double lo, double hi) { return lo + (hi - lo) * uniform01(g); }

/// Standard normal by Box–Muller, one draw per call.
inline double standard_normal(Engine& g) {
  const double u1 = uniform_open01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace kendama::rng
