#pragma once

#include <cstdint>
#include <random>

namespace sponge {

// Independent stream purposes per vehicle.
enum class Stream : std::uint64_t { Spawn = 1, Mode = 2, Backoff = 3, Utility = 4 };

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seeded per (run seed, vehicle id, purpose). mt19937_64 output is fully
/// specified by the standard, so streams are identical across platforms.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t id, Stream purpose) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ splitmix64(id + 0x632BE59BD9B4E019ULL));
  s = splitmix64(s ^ static_cast<std::uint64_t>(purpose));
  return std::mt19937_64(s);
}

/// Uniform in [0, 1) with 53 random bits. Avoids std::uniform_real_distribution,
/// whose algorithm is implementation-defined.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

/// Bernoulli(p); p >= 1 is always true and p <= 0 always false.
inline bool bernoulli(std::mt19937_64& g, double p) {
  return uniform01(g) < p;
}

}  // namespace sponge
