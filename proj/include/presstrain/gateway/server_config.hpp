#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "presstrain/config.hpp"
#include "presstrain/error.hpp"
#include "presstrain/session.hpp"
#include "presstrain/sim_glove.hpp"

namespace presstrain::gateway {

enum class SourceKind { Simulated, Serial, Tcp };

inline std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::Simulated: return "simulated";
    case SourceKind::Serial: return "serial";
    case SourceKind::Tcp: return "tcp";
  }
  return "simulated";
}

inline SourceKind source_kind_from_string(std::string_view s) {
  if (s == "simulated") return SourceKind::Simulated;
  if (s == "serial") return SourceKind::Serial;
  if (s == "tcp") return SourceKind::Tcp;
  throw Error(ErrorCode::InvalidInput, "unknown glove source '" + std::string(s) + "'");
}

struct SourceConfig {
  SourceKind kind = SourceKind::Simulated;
  std::uint64_t seed = 1;
  std::string device = "/dev/ttyUSB0";
  int baud = 115200;
  std::string tcp_host = "127.0.0.1";
  int tcp_port = 9000;
};

struct ServerConfig {
  std::string address = "127.0.0.1";
  int port = 8080;
  int tick_hz = 60;
  std::string data_dir = "data";
  SourceConfig source;
  ProtocolConfig protocol;
  std::string calibration_curve_path;  // empty: calibrate a simulated sensor at startup
  int force_channel = static_cast<int>(kIndexFingertipChannel);
  std::size_t subscriber_queue = 256;
  int stream_send_buffer_bytes = 0;  // per stream client; 0 keeps the OS default
  double source_timeout_s = kStallLimitS;

  void validate() const {
    if (tick_hz < 30 || tick_hz > 240) throw Error(ErrorCode::InvalidInput, "tick_hz must lie within [30, 240]");
    if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidInput, "port out of range");
    if (force_channel < 0 || force_channel >= static_cast<int>(kChannelCount))
      throw Error(ErrorCode::InvalidInput, "force_channel must be a channel index 0..11");
    if (subscriber_queue < 1) throw Error(ErrorCode::InvalidInput, "subscriber_queue must be positive");
    if (stream_send_buffer_bytes < 0) throw Error(ErrorCode::InvalidInput, "stream_send_buffer_bytes must be >= 0");
    if (!(source_timeout_s > 0.0)) throw Error(ErrorCode::InvalidInput, "source_timeout_s must be positive");
    protocol.validate();
    protocol.game.validate();
  }

  /// Creates data_dir if needed and checks that it accepts files.
  void prepare_data_dir() const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(data_dir, ec);
    const auto probe = fs::path(data_dir) / ".write-probe";
    {
      std::ofstream os(probe);
      if (!os || !(os << "ok")) throw Error(ErrorCode::InvalidInput, "data_dir '" + data_dir + "' is not writable");
    }
    fs::remove(probe, ec);
  }
};

inline void bind_server(ConfigSchema& s, ServerConfig& c) {
  s.add("server.address", c.address, "listen address");
  s.add("server.port", c.port, "listen port (0 picks a free port)");
  s.add("server.tick_hz", c.tick_hz, "driver loop rate, 30..240 Hz");
  s.add("server.data_dir", c.data_dir, "directory for session files");
  s.add("server.calibration_curve", c.calibration_curve_path, "curve JSON for the force channel");
  s.add("server.force_channel", c.force_channel, "glove channel used as the force input");
  s.add("server.stream_send_buffer_bytes", c.stream_send_buffer_bytes, "socket send buffer per stream client (0 = OS default)");
  s.add("server.source_timeout_s", c.source_timeout_s, "silence after which the glove counts as lost (s)");
  s.add("source.seed", c.source.seed, "seed of the simulated glove");
  s.add("source.device", c.source.device, "serial device path");
  s.add("source.baud", c.source.baud, "serial baud rate");
  s.add("source.tcp_host", c.source.tcp_host, "glove TCP host");
  s.add("source.tcp_port", c.source.tcp_port, "glove TCP port");
  bind_protocol(s, c.protocol);
}

inline nlohmann::json to_json(const ServerConfig& c) {
  return {
      {"v", 1},
      {"address", c.address},
      {"port", c.port},
      {"tick_hz", c.tick_hz},
      {"data_dir", c.data_dir},
      {"force_channel", c.force_channel},
      {"source",
       {{"kind", to_string(c.source.kind)},
        {"seed", c.source.seed},
        {"device", c.source.device},
        {"baud", c.source.baud},
        {"tcp_host", c.source.tcp_host},
        {"tcp_port", c.source.tcp_port}}},
      {"protocol",
       {{"training_minutes", c.protocol.training_minutes},
        {"game_rounds", c.protocol.game_rounds},
        {"inter_round_rest_s", c.protocol.inter_round_rest_s},
        {"rest_before_test_s", c.protocol.rest_before_test_s},
        {"targets_N", c.protocol.targets_N},
        {"familiarisation_trials_per_target", c.protocol.familiarisation_trials_per_target},
        {"test_trials_per_target", c.protocol.test_trials_per_target},
        {"trial_duration_s", c.protocol.trial_duration_s},
        {"sample_interval_ms", c.protocol.sample_interval_ms}}},
      {"game",
       {{"force_levels_N", c.protocol.game.force_levels_N},
        {"collision_buffer_N", c.protocol.game.collision_buffer_N},
        {"max_force_N", c.protocol.game.max_force_N},
        {"coin_value", c.protocol.game.coin_value},
        {"tick_hz", c.protocol.game.tick_hz}}},
  };
}

}  // namespace presstrain::gateway
