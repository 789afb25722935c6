#pragma once

// Stream message schema. Every message carries `v` and `type`.

#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "presstrain/error.hpp"
#include "presstrain/game_io.hpp"
#include "presstrain/session.hpp"

namespace presstrain::gateway {

inline constexpr int kSchemaVersion = 1;

/// Provenance of the glove frame a state message was computed from.
struct FrameStamp {
  std::uint64_t src_us = 0;  // steady clock when the frame was received
  int seq = -1;
};

struct ScaleView {
  std::string session_id;
  std::string phase = "idle";
  std::optional<double> target_N;
  bool visual_feedback = true;
  bool in_trial = false;
  double remaining_s = 0.0;
  double force_N = 0.0;
};

inline nlohmann::json envelope(std::string_view type) { return {{"v", kSchemaVersion}, {"type", type}}; }

inline void stamp(nlohmann::json& j, double t_s, const FrameStamp& f) {
  j["t_s"] = t_s;
  j["src_us"] = f.src_us;
  j["frame_seq"] = f.seq;
}

/// The live force is left out during trials without visual feedback.
inline std::string scale_state_message(const ScaleView& s, double t_s, const FrameStamp& f) {
  auto j = envelope("scale_state");
  stamp(j, t_s, f);
  j["session_id"] = s.session_id.empty() ? nlohmann::json() : nlohmann::json(s.session_id);
  j["phase"] = s.phase;
  j["target_N"] = s.target_N ? nlohmann::json(*s.target_N) : nlohmann::json();
  j["visual_feedback"] = s.visual_feedback;
  j["in_trial"] = s.in_trial;
  j["remaining_s"] = s.remaining_s;
  if (!s.in_trial || s.visual_feedback) j["force_N"] = s.force_N;
  return j.dump();
}

inline std::string game_state_message(const std::string& session_id, const GameState& g, double t_s,
                                      const FrameStamp& f) {
  auto j = envelope("game_state");
  stamp(j, t_s, f);
  j["session_id"] = session_id;
  j["state"] = to_json(g);
  return j.dump();
}

inline std::string score_message(const std::string& session_id, int score, int collected, bool final_score) {
  auto j = envelope("score");
  j["session_id"] = session_id;
  j["score"] = score;
  j["collected"] = collected;
  j["final"] = final_score;
  return j.dump();
}

inline std::string_view trial_event_name(TrialEventKind k) {
  switch (k) {
    case TrialEventKind::Started: return "trial_started";
    case TrialEventKind::Finished: return "trial_finished";
    case TrialEventKind::Aborted: return "trial_aborted";
  }
  return "trial_aborted";
}

inline std::string trial_event_message(const std::string& session_id, const TrialEvent& e) {
  auto j = envelope("trial_event");
  j["session_id"] = session_id;
  j["event"] = trial_event_name(e.kind);
  j["target_N"] = e.target_N;
  j["visual_feedback"] = e.visual_feedback;
  j["phase"] = to_string(e.phase);
  if (e.kind == TrialEventKind::Finished) {
    j["mu_N"] = e.mu_N;
    j["delta_N"] = e.delta_N;
  }
  return j.dump();
}

inline std::string session_event_message(const std::string& session_id, SessionStatus status,
                                         const std::string& detail) {
  auto j = envelope("trial_event");
  j["session_id"] = session_id;
  j["event"] = status == SessionStatus::Completed ? "session_completed" : "session_aborted";
  j["detail"] = detail;
  return j.dump();
}

inline std::string error_message(const std::string& what) {
  auto j = envelope("error");
  j["message"] = what;
  return j.dump();
}

inline std::string ack_message(const std::string& action) {
  auto j = envelope("ack");
  j["action"] = action;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Inbound

struct ForceInputMsg {
  double newtons = 0.0;
};

struct ControlMsg {
  std::string action;
  std::optional<double> target_N;
};

using InboundMessage = std::variant<ForceInputMsg, ControlMsg>;

inline InboundMessage parse_inbound(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::InvalidInput, "message is not valid JSON");
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "message must be a JSON object");
  if (j.value("v", kSchemaVersion) != kSchemaVersion)
    throw Error(ErrorCode::InvalidInput, "unsupported schema version");
  const auto type = j.value("type", std::string());
  if (type == "force_input") {
    const auto it = j.find("newtons");
    if (it == j.end() || !it->is_number()) throw Error(ErrorCode::InvalidInput, "force_input needs numeric newtons");
    const double n = it->get<double>();
    if (!std::isfinite(n) || n < 0.0) throw Error(ErrorCode::InvalidInput, "newtons must be finite and >= 0");
    return ForceInputMsg{n};
  }
  if (type == "control") {
    ControlMsg c;
    const auto it = j.find("action");
    if (it == j.end() || !it->is_string()) throw Error(ErrorCode::InvalidInput, "control needs a string action");
    c.action = it->get<std::string>();
    if (const auto t = j.find("target_N"); t != j.end()) {
      if (!t->is_number()) throw Error(ErrorCode::InvalidInput, "target_N must be a number");
      c.target_N = t->get<double>();
    }
    return c;
  }
  throw Error(ErrorCode::InvalidInput, "unknown message type '" + type + "'");
}

}  // namespace presstrain::gateway
