#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace immiscible {

using Rng = std::mt19937_64;

// Splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic child seed for (master, path...). Different paths give
// statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags for derive_seed.
enum class Stream : std::uint64_t {
  Data = 1,
  Noise = 2,
  Timestep = 3,
  Init = 4,
  EvalNoise = 5,
  EvalTarget = 6,
  EvalProjection = 7,
  Trial = 8,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return derive_seed(master, {static_cast<std::uint64_t>(stream), index});
}

}  // namespace immiscible
