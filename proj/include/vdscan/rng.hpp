#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace vdscan {

/// SplitMix64 finalizer; a bijective mix of one 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive an independent stream seed from a root seed and a path of counters.
/// derive_seed(s, {a, b}) is a pure function, so any unit of work can build
/// its own generator without touching shared state.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(root);
  for (auto p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stable 64-bit digest of a string, for deriving per-item seeds from ids.
constexpr std::uint64_t hash_string(std::string_view text) noexcept {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (char c : text) h = mix64(h ^ static_cast<std::uint8_t>(c));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(root, path));
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace vdscan
