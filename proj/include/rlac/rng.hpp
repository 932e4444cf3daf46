#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace rlac {

using Rng = std::mt19937_64;

inline std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a root seed and a path of tags.
/// Streams are keyed by role (instruction, output index, ...) rather than by
/// call order, so rollouts can be evaluated in any order.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(root);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(root, path));
}

/// Stable tag for string-named stream roles.
inline std::uint64_t tag(std::string_view name) { return fnv1a64(name); }

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace rlac
