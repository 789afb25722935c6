#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "presstrain/fsr_model.hpp"
#include "presstrain/glovewire.hpp"

namespace presstrain {

// Channel map: fingertips are small sensors, phalanx pads medium, the two
// palmar eminences large (presence only).
inline constexpr std::size_t kIndexFingertipChannel = 0;

inline constexpr std::array<SensorCategory, kChannelCount> kGloveLayout = {
    SensorCategory::Small,  SensorCategory::Small,  SensorCategory::Small,  SensorCategory::Small,
    SensorCategory::Small,  SensorCategory::Medium, SensorCategory::Medium, SensorCategory::Medium,
    SensorCategory::Medium, SensorCategory::Medium, SensorCategory::Large,  SensorCategory::Large,
};

/// Twelve simulated channels producing wire frames.
class SimulatedGlove {
 public:
  explicit SimulatedGlove(std::uint64_t seed, ArtefactModel model = {}) {
    std::seed_seq seq{seed, std::uint64_t{0x676c6f7665}};
    std::array<std::uint32_t, kChannelCount * 2> words{};
    seq.generate(words.begin(), words.end());
    for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
      const std::uint64_t s = (std::uint64_t{words[2 * ch]} << 32) | words[2 * ch + 1];
      sensors_[ch] = FsrSensor(SensorSpec::of(kGloveLayout[ch]), model, s);
    }
  }

  RawFrame sample(std::span<const double, kChannelCount> forces_N, double dt_s) {
    RawFrame f;
    f.seq = seq_++;
    for (std::size_t ch = 0; ch < kChannelCount; ++ch)
      f.channels[ch] = static_cast<std::uint16_t>(sensors_[ch].step(forces_N[ch], dt_s));
    clock_s_ += dt_s;
    f.timestamp_us = static_cast<std::uint64_t>(std::llround(clock_s_ * 1e6));
    return f;
  }

  /// Only the index fingertip pressed; everything else unloaded.
  RawFrame sample_index(double force_N, double dt_s) {
    std::array<double, kChannelCount> forces{};
    forces[kIndexFingertipChannel] = force_N;
    return sample(forces, dt_s);
  }

  const FsrSensor& sensor(std::size_t ch) const { return sensors_.at(ch); }

 private:
  std::array<FsrSensor, kChannelCount> sensors_;
  std::uint8_t seq_ = 0;
  double clock_s_ = 0.0;
};

}  // namespace presstrain
