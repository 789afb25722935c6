#pragma once

// Small seeded generators for property tests.

#include <cstdint>
#include <random>
#include <vector>

#include "presstrain/glovewire.hpp"

namespace gen {

inline presstrain::RawFrame frame(std::mt19937_64& rng) {
  presstrain::RawFrame f;
  f.seq = static_cast<std::uint8_t>(rng());
  f.timestamp_us = rng();
  std::uniform_int_distribution<int> ch(0, presstrain::kMaxChannelValue);
  for (auto& c : f.channels) c = static_cast<std::uint16_t>(ch(rng));
  return f;
}

inline std::vector<std::uint8_t> bytes(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

inline std::vector<double> normal_sample(std::mt19937_64& rng, std::size_t n, double mean, double sd) {
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> out(n);
  for (auto& x : out) x = d(rng);
  return out;
}

}  // namespace gen
