#pragma once

// Force-sensitive resistor channel model: resistance curve, divider, 10-bit
// ADC and the time-dependent artefacts (lag, creep, hysteresis, noise).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "presstrain/error.hpp"

namespace presstrain {

inline constexpr int kAdcMaxCounts = 1023;
inline constexpr int kPresenceThresholdCounts = 50;

enum class SensorCategory { Small, Medium, Large };

inline std::string_view to_string(SensorCategory c) {
  switch (c) {
    case SensorCategory::Small: return "small";
    case SensorCategory::Medium: return "medium";
    case SensorCategory::Large: return "large";
  }
  return "small";
}

inline SensorCategory category_from_string(std::string_view s) {
  if (s == "small" || s == "Small") return SensorCategory::Small;
  if (s == "medium" || s == "Medium") return SensorCategory::Medium;
  if (s == "large" || s == "Large") return SensorCategory::Large;
  throw Error(ErrorCode::InvalidInput, "unknown sensor category '" + std::string(s) + "'");
}

inline double nominal_diameter_mm(SensorCategory c) {
  switch (c) {
    case SensorCategory::Small: return 6.0;
    case SensorCategory::Medium: return 12.0;
    case SensorCategory::Large: return 24.8;
  }
  return 6.0;
}

/// Static description of one sensor and its divider circuit.
/// Resistance follows R = k * F^-alpha (k in ohm * N^alpha).
struct SensorSpec {
  SensorCategory category = SensorCategory::Small;
  double diameter_mm = 6.0;
  double r_measure_ohm = 3300.0;
  double v_ref_volt = 5.0;
  double response_time_s = 0.0025;
  double max_force_N = 100.0;
  double k_ohm = 30000.0;
  double alpha = 1.0;

  static SensorSpec of(SensorCategory c) {
    SensorSpec s;
    s.category = c;
    s.diameter_mm = nominal_diameter_mm(c);
    switch (c) {
      case SensorCategory::Small:
        s.r_measure_ohm = 3300.0;
        s.k_ohm = 30000.0;
        s.alpha = 1.0;
        break;
      case SensorCategory::Medium:
        s.r_measure_ohm = 10000.0;
        s.k_ohm = 45000.0;
        s.alpha = 0.9;
        break;
      case SensorCategory::Large:
        s.r_measure_ohm = 10000.0;
        s.k_ohm = 60000.0;
        s.alpha = 0.8;
        break;
    }
    return s;
  }

  void validate() const {
    if (!(r_measure_ohm > 0.0) || !(v_ref_volt > 0.0))
      throw Error(ErrorCode::InvalidInput, "r_measure_ohm and v_ref_volt must be positive");
    if (!(response_time_s >= 0.0) || !(max_force_N > 0.0) || !(k_ohm > 0.0) || !(alpha > 0.0))
      throw Error(ErrorCode::InvalidInput, "sensor transfer parameters must be positive");
    if (std::abs(diameter_mm - nominal_diameter_mm(category)) > 1e-9)
      throw Error(ErrorCode::InvalidInput, "diameter does not match sensor category");
  }
};

/// Time-dependent artefacts. `ideal()` switches everything off.
struct ArtefactModel {
  bool response_lag = true;
  bool creep = true;
  bool hysteresis = true;
  double noise_sd_counts = 2.0;

  double creep_anchor_N = 2.0;
  double creep_anchor_s = 600.0;
  double creep_tau_s = 60.0;
  double static_tolerance = 0.05;
  double hysteresis_factor = 1.05;

  static ArtefactModel ideal() {
    ArtefactModel m;
    m.response_lag = false;
    m.creep = false;
    m.hysteresis = false;
    m.noise_sd_counts = 0.0;
    return m;
  }
};

enum class LoadDirection { Idle, Loading, Unloading };

struct SensorState {
  double clock_s = 0.0;
  double applied_force_N = 0.0;
  double filtered_force_N = 0.0;
  std::optional<double> static_load_start_s;
  double static_reference_N = 0.0;
  double hysteresis_excess = 0.0;
  double last_reading_N = 0.0;
  LoadDirection direction = LoadDirection::Idle;
  std::mt19937_64 rng{0};

  static SensorState seeded(std::uint64_t seed) {
    SensorState s;
    s.rng.seed(seed);
    return s;
  }
};

inline double resistance_of_force(double force_N, const SensorSpec& spec) {
  if (!(force_N > 0.0)) return std::numeric_limits<double>::infinity();
  return spec.k_ohm * std::pow(force_N, -spec.alpha);
}

// V_out = V_ref * R_M / (R_FSR + R_M)
inline double voltage_divider(double r_fsr_ohm, const SensorSpec& spec) {
  if (std::isinf(r_fsr_ohm)) return 0.0;
  return spec.v_ref_volt * spec.r_measure_ohm / (r_fsr_ohm + spec.r_measure_ohm);
}

struct AdcReading {
  int counts = 0;
  bool saturated = false;
};

inline AdcReading adc_quantize(double volts, const SensorSpec& spec) {
  AdcReading r;
  double v = volts;
  if (!(v >= 0.0)) {
    v = 0.0;
    r.saturated = true;
  } else if (v > spec.v_ref_volt) {
    v = spec.v_ref_volt;
    r.saturated = true;
  }
  r.counts = static_cast<int>(std::lround(v / spec.v_ref_volt * kAdcMaxCounts));
  r.counts = std::clamp(r.counts, 0, kAdcMaxCounts);
  return r;
}

/// Noise-free, artefact-free force to counts.
inline int ideal_counts(double force_N, const SensorSpec& spec) {
  return adc_quantize(voltage_divider(resistance_of_force(force_N, spec), spec), spec).counts;
}

/// Additive creep under a static load held for `held_s`; 0 at 0 s and
/// exactly `creep_anchor_N` at `creep_anchor_s`.
inline double creep_drift_N(double held_s, const ArtefactModel& m) {
  if (!(held_s > 0.0)) return 0.0;
  return m.creep_anchor_N * std::log1p(held_s / m.creep_tau_s) /
         std::log1p(m.creep_anchor_s / m.creep_tau_s);
}

inline bool presence_detected(int counts) { return counts >= kPresenceThresholdCounts; }

struct StepResult {
  SensorState state;
  int counts = 0;
  bool saturated = false;
};

inline StepResult step(const SensorSpec& spec, const ArtefactModel& model, SensorState state,
                       double applied_force_N, double dt_s) {
  if (!(dt_s > 0.0)) throw Error(ErrorCode::InvalidInput, "dt_s must be positive");
  const double force = std::max(0.0, applied_force_N);
  constexpr double kDirectionEps = 1e-9;

  if (force > state.applied_force_N + kDirectionEps)
    state.direction = LoadDirection::Loading;
  else if (force < state.applied_force_N - kDirectionEps)
    state.direction = LoadDirection::Unloading;
  else
    state.direction = LoadDirection::Idle;

  // Static window: nonzero force staying within +-tolerance of its reference.
  if (force <= 0.0) {
    state.static_load_start_s.reset();
  } else if (!state.static_load_start_s ||
             std::abs(force - state.static_reference_N) >
                 model.static_tolerance * state.static_reference_N) {
    state.static_load_start_s = state.clock_s;
    state.static_reference_N = force;
  }
  state.applied_force_N = force;
  state.clock_s += dt_s;

  const double tau = spec.response_time_s;
  const double relax = (model.response_lag && tau > 0.0) ? 1.0 - std::exp(-dt_s / tau) : 1.0;
  state.filtered_force_N += (force - state.filtered_force_N) * relax;
  if (force == 0.0 && state.filtered_force_N < 1e-9) state.filtered_force_N = 0.0;

  if (model.hysteresis && state.direction == LoadDirection::Unloading) {
    state.hysteresis_excess = model.hysteresis_factor - 1.0;
  } else {
    state.hysteresis_excess *= (1.0 - relax);
    if (state.hysteresis_excess < 1e-12) state.hysteresis_excess = 0.0;
  }

  double effective = state.filtered_force_N * (1.0 + state.hysteresis_excess);
  if (model.creep && state.static_load_start_s && effective > 0.0)
    effective += creep_drift_N(state.clock_s - *state.static_load_start_s, model);
  state.last_reading_N = effective;

  StepResult out;
  if (effective <= 0.0) {
    out.counts = 0;
  } else {
    const double volts = voltage_divider(resistance_of_force(effective, spec), spec);
    double exact = volts / spec.v_ref_volt * kAdcMaxCounts;
    if (model.noise_sd_counts > 0.0) {
      std::normal_distribution<double> noise(0.0, model.noise_sd_counts);
      exact += noise(state.rng);
    }
    const long rounded = std::lround(exact);
    out.saturated = rounded < 0 || rounded > kAdcMaxCounts;
    out.counts = static_cast<int>(std::clamp<long>(rounded, 0, kAdcMaxCounts));
  }
  out.state = std::move(state);
  return out;
}

/// Owning wrapper around one channel's spec, artefact model and state.
class FsrSensor {
 public:
  FsrSensor() : FsrSensor(SensorSpec::of(SensorCategory::Small), ArtefactModel{}, 0) {}
  FsrSensor(SensorSpec spec, ArtefactModel model, std::uint64_t seed)
      : spec_(spec), model_(model), state_(SensorState::seeded(seed)) {
    spec_.validate();
  }

  int step(double applied_force_N, double dt_s) {
    auto r = presstrain::step(spec_, model_, std::move(state_), applied_force_N, dt_s);
    state_ = std::move(r.state);
    last_saturated_ = r.saturated;
    return r.counts;
  }

  const SensorSpec& spec() const { return spec_; }
  const ArtefactModel& model() const { return model_; }
  const SensorState& state() const { return state_; }
  bool last_saturated() const { return last_saturated_; }

 private:
  SensorSpec spec_;
  ArtefactModel model_;
  SensorState state_;
  bool last_saturated_ = false;
};

}  // namespace presstrain
