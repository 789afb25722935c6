#pragma once

// Plain-text `key = value` configuration. `#` starts a comment; blank
// lines are ignored; lists are comma separated. A ConfigSchema binds keys to
// fields, rejects unknown keys, and can print itself as documentation.

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "presstrain/csv.hpp"
#include "presstrain/error.hpp"
#include "presstrain/experiment.hpp"
#include "presstrain/game.hpp"
#include "presstrain/session.hpp"

namespace presstrain {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<ConfigEntry> parse_config(std::istream& is, const std::string& source = "config") {
  std::vector<ConfigEntry> out;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidInput, source + ":" + std::to_string(n) + ": expected key = value");
    ConfigEntry e{trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)), n};
    if (e.key.empty()) throw Error(ErrorCode::InvalidInput, source + ":" + std::to_string(n) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

class ConfigSchema {
 public:
  void add(std::string key, double& field, std::string doc) {
    bind(std::move(key), std::move(doc), [&field](const std::string& v) { field = parse_real(v, "value"); },
         [&field] { return format_real(field); });
  }
  void add(std::string key, int& field, std::string doc) {
    bind(std::move(key), std::move(doc),
         [&field](const std::string& v) { field = static_cast<int>(parse_int(v, "value")); },
         [&field] { return std::to_string(field); });
  }
  void add(std::string key, std::uint64_t& field, std::string doc) {
    bind(std::move(key), std::move(doc),
         [&field](const std::string& v) {
           std::uint64_t x = 0;
           auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
           if (ec != std::errc() || p != v.data() + v.size())
             throw Error(ErrorCode::InvalidInput, "expected an unsigned integer, got '" + v + "'");
           field = x;
         },
         [&field] { return std::to_string(field); });
  }
  void add(std::string key, bool& field, std::string doc) {
    bind(std::move(key), std::move(doc),
         [&field](const std::string& v) {
           if (v == "true" || v == "1" || v == "yes") field = true;
           else if (v == "false" || v == "0" || v == "no") field = false;
           else throw Error(ErrorCode::InvalidInput, "expected a boolean, got '" + v + "'");
         },
         [&field] { return std::string(field ? "true" : "false"); });
  }
  void add(std::string key, std::string& field, std::string doc) {
    bind(std::move(key), std::move(doc), [&field](const std::string& v) { field = v; },
         [&field] { return field; });
  }
  void add(std::string key, std::vector<double>& field, std::string doc) {
    bind(std::move(key), std::move(doc),
         [&field](const std::string& v) {
           std::vector<double> xs;
           for (const auto& part : split_csv_line(v)) xs.push_back(parse_real(trim(part), "list element"));
           if (xs.empty()) throw Error(ErrorCode::InvalidInput, "empty list");
           field = std::move(xs);
         },
         [&field] {
           std::string s;
           for (std::size_t i = 0; i < field.size(); ++i) s += (i ? "," : "") + format_real(field[i]);
           return s;
         });
  }

  bool has(const std::string& key) const { return entries_.contains(key); }

  void set(const std::string& key, const std::string& value) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error(ErrorCode::InvalidInput, "unknown config key '" + key + "'");
    try {
      it->second.set(value);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidInput, "config key '" + key + "': " + e.message());
    }
  }

  void apply(const std::vector<ConfigEntry>& entries, const std::string& source = "config") {
    for (const auto& e : entries) {
      try {
        set(e.key, e.value);
      } catch (const Error& err) {
        throw Error(ErrorCode::InvalidInput, source + ":" + std::to_string(e.line) + ": " + err.message());
      }
    }
  }

  void apply(std::istream& is, const std::string& source = "config") { apply(parse_config(is, source), source); }

  /// The schema as a commented config file holding the current values.
  std::string describe() const {
    std::ostringstream os;
    for (const auto& [key, e] : entries_) os << "# " << e.doc << '\n' << key << " = " << e.get() << "\n\n";
    return os.str();
  }

 private:
  struct Binding {
    std::string doc;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
  };

  void bind(std::string key, std::string doc, std::function<void(const std::string&)> set,
            std::function<std::string()> get) {
    entries_[std::move(key)] = Binding{std::move(doc), std::move(set), std::move(get)};
  }

  std::map<std::string, Binding> entries_;
};

inline void bind_game(ConfigSchema& s, GameConfig& g, const std::string& prefix = "game.") {
  s.add(prefix + "force_levels_N", g.force_levels_N, "coin force levels (N)");
  s.add(prefix + "collision_buffer_N", g.collision_buffer_N, "half-width of the coin collision band (N)");
  s.add(prefix + "max_force_N", g.max_force_N, "force at the top of the screen (N)");
  s.add(prefix + "coins_min", g.coins_min, "minimum coins per segment");
  s.add(prefix + "coins_max", g.coins_max, "maximum coins per segment");
  s.add(prefix + "coin_value", g.coin_value, "points per coin");
  s.add(prefix + "base_speed_units_per_s", g.base_speed_units_per_s, "initial scroll speed");
  s.add(prefix + "speed_ramp_per_s", g.speed_ramp_per_s, "speed increase per second, as a fraction of the base");
  s.add(prefix + "speed_cap_factor", g.speed_cap_factor, "maximum speed as a multiple of the base");
  s.add(prefix + "segments", g.segments, "coin segments per round");
  s.add(prefix + "segment_length_units", g.segment_length_units, "length of one segment");
  s.add(prefix + "lead_in_units", g.lead_in_units, "empty distance before the first segment");
  s.add(prefix + "run_length_units", g.run_length_units, "distance to the finish line");
  s.add(prefix + "tick_hz", g.tick_hz, "simulation rate (Hz)");
  s.add(prefix + "altitude_smoothing_tau_s", g.altitude_smoothing_tau_s, "altitude low-pass time constant (s)");
}

inline void bind_protocol(ConfigSchema& s, ProtocolConfig& p, const std::string& prefix = "protocol.") {
  s.add(prefix + "training_minutes", p.training_minutes, "training time per group (min)");
  s.add(prefix + "game_rounds", p.game_rounds, "game rounds for the game-trained group");
  s.add(prefix + "inter_round_rest_s", p.inter_round_rest_s, "rest between game rounds (s)");
  s.add(prefix + "rest_before_test_s", p.rest_before_test_s, "rest between familiarisation and test (s)");
  s.add(prefix + "targets_N", p.targets_N, "target forces, in trial order (N)");
  s.add(prefix + "familiarisation_trials_per_target", p.familiarisation_trials_per_target,
        "visual-feedback trials per target before the test");
  s.add(prefix + "test_trials_per_target", p.test_trials_per_target, "no-visual test trials per target");
  s.add(prefix + "trial_duration_s", p.trial_duration_s, "hold duration per trial (s)");
  s.add(prefix + "sample_interval_ms", p.sample_interval_ms, "trial sampling interval (ms)");
  bind_game(s, p.game, prefix + "game.");
}

inline void bind_population(ConfigSchema& s, Population& p, const std::string& prefix) {
  s.add(prefix + "bias_mean_N", p.bias_mean_N, "mean initial no-visual bias (N)");
  s.add(prefix + "bias_sd_N", p.bias_sd_N, "between-participant SD of the bias (N)");
  s.add(prefix + "gain_mean", p.gain_mean, "mean proportional gain");
  s.add(prefix + "gain_sd", p.gain_sd, "between-participant SD of the gain");
  s.add(prefix + "aim_error_sd_N", p.aim_error_sd_N, "per-trial aim error SD before training (N)");
  s.add(prefix + "motor_noise_sd_N", p.motor_noise_sd_N, "tremor SD before training (N)");
  s.add(prefix + "reaction_delay_s", p.reaction_delay_s, "reaction delay (s)");
  s.add(prefix + "pursuit_tau_s", p.pursuit_tau_s, "pursuit time constant (s)");
  s.add(prefix + "learning_rate_per_min", p.learning_rate_per_min, "error reduction rate per training minute");
}

inline void bind_cohort(ConfigSchema& s, CohortConfig& c) {
  bind_population(s, c.game, "cohort.game.");
  bind_population(s, c.app, "cohort.app.");
}

inline void bind_participant(ConfigSchema& s, ParticipantModel& m, const std::string& prefix = "bot.") {
  s.add(prefix + "reaction_delay_s", m.reaction_delay_s, "reaction delay (s)");
  s.add(prefix + "pursuit_tau_s", m.pursuit_tau_s, "pursuit time constant (s)");
  s.add(prefix + "proportional_gain", m.proportional_gain, "gain applied to the target without visual feedback");
  s.add(prefix + "motor_noise_sd_N", m.motor_noise_sd_N, "tremor SD (N)");
  s.add(prefix + "bias_N", m.bias_N, "no-visual bias (N)");
  s.add(prefix + "aim_error_sd_N", m.aim_error_sd_N, "per-trial aim error SD (N)");
  s.add(prefix + "learning_rate_per_min", m.learning_rate_per_min, "error reduction rate per training minute");
}

}  // namespace presstrain
