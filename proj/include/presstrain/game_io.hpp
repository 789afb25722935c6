#pragma once

#include <istream>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "presstrain/csv.hpp"
#include "presstrain/game.hpp"

namespace presstrain {

inline nlohmann::json to_json(const GameState& s) {
  nlohmann::json coins = nlohmann::json::array();
  for (const auto& c : s.coins)
    coins.push_back({{"x_units", c.x_units}, {"level_N", c.level_N}, {"collected", c.collected}});
  return {
      {"seed", s.seed},
      {"t_s", s.t_s},
      {"bird_x_units", s.bird_x_units},
      {"bird_force_alt_N", s.bird_force_alt_N},
      {"raw_force_N", s.raw_force_N},
      {"coins", std::move(coins)},
      {"score", s.score},
      {"collected", s.collected},
      {"speed", s.speed},
      {"next_coin_level_N", s.next_coin_level_N ? nlohmann::json(*s.next_coin_level_N) : nlohmann::json()},
      {"finished", s.finished},
  };
}

inline nlohmann::json to_json(const GameEvent& e) {
  return {{"event", e.kind == GameEventKind::CoinCollected ? "coin_collected" : "finished"},
          {"t_s", e.t_s},
          {"coin_index", e.coin_index},
          {"score", e.score}};
}

struct TraceSample {
  double t_s = 0.0;
  double force_N = 0.0;
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceSample>& trace) {
  os << "t_s,force_N\n";
  for (const auto& s : trace) os << format_real(s.t_s) << ',' << format_real(s.force_N) << '\n';
}

inline std::vector<TraceSample> read_trace_csv(std::istream& is) {
  const auto table = read_csv(is, {"t_s", "force_N"});
  std::vector<TraceSample> trace;
  trace.reserve(table.rows.size());
  const auto ct = table.column("t_s");
  const auto cf = table.column("force_N");
  for (const auto& row : table.rows)
    trace.push_back({parse_real(row[ct], "t_s"), parse_real(row[cf], "force_N")});
  return trace;
}

struct ReplayOutcome {
  GameState state;
  std::vector<GameEvent> events;
};

/// Re-runs a recorded input trace, one sample per tick.
inline ReplayOutcome replay(std::uint64_t seed, const GameConfig& cfg, const std::vector<TraceSample>& trace) {
  ReplayOutcome out{new_game(seed, cfg), {}};
  for (const auto& s : trace) {
    if (out.state.finished) break;
    auto ev = tick(out.state, cfg, s.force_N);
    out.events.insert(out.events.end(), ev.begin(), ev.end());
  }
  return out;
}

}  // namespace presstrain
