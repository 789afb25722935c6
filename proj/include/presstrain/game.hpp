#pragma once

// Force-controlled infinite runner. The bird's altitude is the (smoothed)
// fingertip force on a 0..max_force_N screen; coins sit at fixed force
// levels and count when the bird passes them inside the collision band.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "presstrain/error.hpp"

namespace presstrain {

struct GameConfig {
  std::vector<double> force_levels_N{2.0, 3.0, 5.0};
  double collision_buffer_N = 0.25;
  double max_force_N = 10.0;
  int coins_min = 5;
  int coins_max = 15;
  int coin_value = 100;
  double base_speed_units_per_s = 1.5;
  double speed_ramp_per_s = 0.01;
  double speed_cap_factor = 2.0;
  int segments = 3;
  double segment_length_units = 70.0;
  double lead_in_units = 15.0;
  double min_coin_spacing_units = 3.0;
  double run_length_units = 225.0;
  int tick_hz = 60;
  double altitude_smoothing_tau_s = 0.1;

  double dt_s() const { return 1.0 / tick_hz; }

  void validate() const {
    if (force_levels_N.empty()) throw Error(ErrorCode::InvalidInput, "no force levels");
    for (double l : force_levels_N)
      if (!(l > 0.0 && l < max_force_N))
        throw Error(ErrorCode::InvalidInput, "force levels must lie strictly inside (0, max_force_N)");
    if (!(collision_buffer_N > 0.0) || !(max_force_N > 0.0) || !(base_speed_units_per_s > 0.0) ||
        !(speed_ramp_per_s >= 0.0) || !(speed_cap_factor >= 1.0) || tick_hz <= 0 ||
        !(altitude_smoothing_tau_s >= 0.0) || coin_value <= 0 || segments <= 0 ||
        !(segment_length_units > 0.0) || !(lead_in_units >= 0.0) || !(min_coin_spacing_units >= 0.0))
      throw Error(ErrorCode::InvalidInput, "game parameters must be positive");
    if (coins_min < 1 || coins_max < coins_min)
      throw Error(ErrorCode::InvalidInput, "invalid coin count range");
    if (coins_max * min_coin_spacing_units > segment_length_units)
      throw Error(ErrorCode::InvalidInput, "segment too short for the coin spacing");
    if (run_length_units < lead_in_units + segments * segment_length_units)
      throw Error(ErrorCode::InvalidInput, "run shorter than its coin segments");
  }
};

struct Coin {
  double x_units = 0.0;
  double level_N = 0.0;
  int segment = 0;
  bool collected = false;
};

struct GameState {
  std::uint64_t seed = 0;
  std::uint64_t ticks = 0;
  double t_s = 0.0;
  double bird_x_units = 0.0;
  double bird_force_alt_N = 0.0;
  double raw_force_N = 0.0;
  std::vector<Coin> coins;  // sorted by x
  std::size_t next_coin = 0;
  int collected = 0;
  int score = 0;
  double speed = 0.0;
  std::optional<double> next_coin_level_N;
  bool finished = false;
  double smoothing_alpha = 1.0;  // per-tick factor of the altitude low-pass
  std::mt19937_64 rng;
};

enum class GameEventKind { CoinCollected, Finished };

struct GameEvent {
  GameEventKind kind;
  double t_s = 0.0;
  std::size_t coin_index = 0;
  int score = 0;

  bool operator==(const GameEvent&) const = default;
};

inline bool in_collision_band(double altitude_N, double level_N, double buffer_N) {
  constexpr double kSlack = 1e-9;
  return std::abs(altitude_N - level_N) <= buffer_N + kSlack;
}

inline int score(const GameState& s, const GameConfig& cfg) { return cfg.coin_value * s.collected; }

/// Coin count per segment, uniform in [coins_min, coins_max].
inline std::vector<int> segment_coin_counts(const GameState& s) {
  std::vector<int> counts;
  for (const auto& c : s.coins) {
    if (static_cast<std::size_t>(c.segment) >= counts.size())
      counts.resize(static_cast<std::size_t>(c.segment) + 1, 0);
    ++counts[static_cast<std::size_t>(c.segment)];
  }
  return counts;
}

inline GameState new_game(std::uint64_t seed, const GameConfig& cfg) {
  cfg.validate();
  GameState s;
  s.seed = seed;
  s.rng.seed(seed);
  s.speed = cfg.base_speed_units_per_s;
  const double tau = cfg.altitude_smoothing_tau_s;
  s.smoothing_alpha = tau > 0.0 ? 1.0 - std::exp(-cfg.dt_s() / tau) : 1.0;

  std::uniform_int_distribution<int> count_dist(cfg.coins_min, cfg.coins_max);
  std::uniform_int_distribution<std::size_t> level_dist(0, cfg.force_levels_N.size() - 1);
  for (int seg = 0; seg < cfg.segments; ++seg) {
    const int n = count_dist(s.rng);
    // Uniform positions on the shortened interval, then re-spread by the
    // minimum spacing. Half a spacing of margin at each end keeps coins of
    // neighbouring segments apart too.
    const double slack = cfg.segment_length_units - n * cfg.min_coin_spacing_units;
    std::uniform_real_distribution<double> pos_dist(0.0, slack);
    std::vector<double> offsets(static_cast<std::size_t>(n));
    for (auto& o : offsets) o = pos_dist(s.rng);
    std::sort(offsets.begin(), offsets.end());
    const double seg_start = cfg.lead_in_units + seg * cfg.segment_length_units;
    for (int i = 0; i < n; ++i) {
      Coin c;
      // Strictly after the segment start so a coin never sits at x = 0.
      c.x_units = seg_start + 0.5 * cfg.min_coin_spacing_units + offsets[static_cast<std::size_t>(i)] +
                  i * cfg.min_coin_spacing_units;
      if (c.x_units <= 0.0) c.x_units = std::nextafter(0.0, 1.0);
      c.level_N = cfg.force_levels_N[level_dist(s.rng)];
      c.segment = seg;
      s.coins.push_back(c);
    }
  }
  s.next_coin_level_N = s.coins.empty() ? std::nullopt : std::optional<double>(s.coins.front().level_N);
  return s;
}

/// Advances one fixed timestep. `input_force_N` is sampled once per tick.
inline std::vector<GameEvent> tick(GameState& s, const GameConfig& cfg, double input_force_N) {
  std::vector<GameEvent> events;
  if (s.finished) return events;
  const double dt = cfg.dt_s();

  s.raw_force_N = std::clamp(std::isfinite(input_force_N) ? input_force_N : 0.0, 0.0, cfg.max_force_N);
  s.bird_force_alt_N += s.smoothing_alpha * (s.raw_force_N - s.bird_force_alt_N);
  s.bird_force_alt_N = std::clamp(s.bird_force_alt_N, 0.0, cfg.max_force_N);

  const double prev_x = s.bird_x_units;
  s.bird_x_units += s.speed * dt;
  ++s.ticks;
  s.t_s = static_cast<double>(s.ticks) * dt;

  while (s.next_coin < s.coins.size() && s.coins[s.next_coin].x_units <= s.bird_x_units) {
    auto& coin = s.coins[s.next_coin];
    if (coin.x_units > prev_x &&
        in_collision_band(s.bird_force_alt_N, coin.level_N, cfg.collision_buffer_N)) {
      coin.collected = true;
      ++s.collected;
      s.score = score(s, cfg);
      events.push_back({GameEventKind::CoinCollected, s.t_s, s.next_coin, s.score});
    }
    ++s.next_coin;
  }
  s.next_coin_level_N = s.next_coin < s.coins.size()
                            ? std::optional<double>(s.coins[s.next_coin].level_N)
                            : std::nullopt;

  s.speed = cfg.base_speed_units_per_s *
            std::min(cfg.speed_cap_factor, 1.0 + cfg.speed_ramp_per_s * s.t_s);

  if (s.bird_x_units >= cfg.run_length_units) {
    s.finished = true;
    events.push_back({GameEventKind::Finished, s.t_s, 0, s.score});
  }
  return events;
}

}  // namespace presstrain
