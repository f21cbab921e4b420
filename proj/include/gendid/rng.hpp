#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gendid::rng {

using Engine = std::mt19937_64;

// Independent stream for (seed, stream, substream); the same triple always
// yields the same sequence regardless of which thread consumes it.
inline Engine stream(std::uint64_t seed, std::uint64_t id, std::uint64_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32),
                    static_cast<std::uint32_t>(sub), static_cast<std::uint32_t>(sub >> 32)};
  return Engine(seq);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for nested streams.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

// Uniform integer in [0, n), by rejection so the result does not depend on the
// standard library's distribution implementation.
inline std::uint64_t below(Engine& g, std::uint64_t n) {
  const std::uint64_t limit = Engine::max() - (Engine::max() % n + 1) % n;
  std::uint64_t x;
  do x = g();
  while (x > limit);
  return x % n;
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& g) {
  for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[below(g, k)]);
}

// Uniform on (0, 1), 53 bits.
inline double uniform(Engine& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Standard normal by Box-Muller; uses two uniforms per call so draws stay
// aligned with the engine state.
inline double normal(Engine& g) {
  const double u1 = uniform(g);
  const double u2 = uniform(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

}  // namespace gendid::rng
