#pragma once

#include <cstdint>
#include <initializer_list>

namespace presstrain {

// SplitMix64 finaliser; portable sub-stream derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(base);
  for (auto p : parts) h = mix64(((h << 23) | (h >> 41)) ^ mix64(p));
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t part) { return derive_seed(base, {part}); }

}  // namespace presstrain
