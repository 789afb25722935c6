#pragma once

// Session export: full JSON and the flat per-trial CSV.

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "presstrain/csv.hpp"
#include "presstrain/session.hpp"

namespace presstrain {

inline constexpr int kSessionSchemaVersion = 1;

inline PhaseKind phase_kind_from_string(std::string_view s) {
  for (PhaseKind k : {PhaseKind::GameRound, PhaseKind::AppPractice, PhaseKind::Rest, PhaseKind::Familiarisation,
                      PhaseKind::Test})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::InvalidData, "unknown phase kind '" + std::string(s) + "'");
}

inline SessionStatus session_status_from_string(std::string_view s) {
  for (SessionStatus k : {SessionStatus::Running, SessionStatus::Completed, SessionStatus::Aborted})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::InvalidData, "unknown session status '" + std::string(s) + "'");
}

inline nlohmann::json to_json(const TrialRecord& t) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : t.samples) samples.push_back({s.t_s, s.force_N});
  return {
      {"target_N", t.spec.target_N},
      {"duration_s", t.spec.duration_s},
      {"sample_interval_ms", t.spec.sample_interval_ms},
      {"visual_feedback", t.spec.visual_feedback},
      {"phase", to_string(t.spec.phase)},
      {"sample_count", t.sample_count},
      {"mu_N", t.mu_N},
      {"delta_N", t.delta_N},
      {"samples", std::move(samples)},
  };
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
  TrialRecord t;
  t.spec.target_N = j.at("target_N").get<double>();
  t.spec.duration_s = j.at("duration_s").get<double>();
  t.spec.sample_interval_ms = j.at("sample_interval_ms").get<double>();
  t.spec.visual_feedback = j.at("visual_feedback").get<bool>();
  t.spec.phase = trial_phase_from_string(j.at("phase").get<std::string>());
  t.sample_count = j.at("sample_count").get<std::size_t>();
  t.mu_N = j.at("mu_N").get<double>();
  t.delta_N = j.at("delta_N").get<double>();
  for (const auto& s : j.at("samples")) t.samples.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  return t;
}

inline nlohmann::json to_json(const SessionResult& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) trials.push_back(to_json(t));
  nlohmann::json timeline = nlohmann::json::array();
  for (const auto& p : r.timeline)
    timeline.push_back({{"kind", to_string(p.kind)},
                        {"start_s", p.start_s},
                        {"end_s", p.end_s},
                        {"round", p.round},
                        {"target_N", p.target_N}});
  return {
      {"v", kSessionSchemaVersion},
      {"participant_id", r.participant_id},
      {"group", to_string(r.group)},
      {"status", to_string(r.status)},
      {"status_detail", r.status_detail},
      {"sample_interval_ms", r.sample_interval_ms},
      {"training_s", r.training_s},
      {"game_scores", r.game_scores},
      {"mean_delta_N", r.mean_delta_N},
      {"timeline", std::move(timeline)},
      {"trials", std::move(trials)},
  };
}

inline SessionResult session_from_json(const nlohmann::json& j) {
  try {
    if (j.at("v").get<int>() != kSessionSchemaVersion)
      throw Error(ErrorCode::InvalidData, "unsupported session schema version");
    SessionResult r;
    r.participant_id = j.at("participant_id").get<std::string>();
    r.group = group_from_string(j.at("group").get<std::string>());
    r.status = session_status_from_string(j.at("status").get<std::string>());
    r.status_detail = j.value("status_detail", "");
    r.sample_interval_ms = j.at("sample_interval_ms").get<double>();
    r.training_s = j.at("training_s").get<double>();
    r.game_scores = j.at("game_scores").get<std::vector<int>>();
    r.mean_delta_N = j.at("mean_delta_N").get<double>();
    for (const auto& p : j.at("timeline"))
      r.timeline.push_back({phase_kind_from_string(p.at("kind").get<std::string>()), p.at("start_s").get<double>(),
                            p.at("end_s").get<double>(), p.at("round").get<int>(), p.at("target_N").get<double>()});
    for (const auto& t : j.at("trials")) r.trials.push_back(trial_from_json(t));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidData, std::string("malformed session JSON: ") + e.what());
  }
}

/// One row per no-visual test trial; header only when there are none.
inline void write_session_csv(std::ostream& os, const SessionResult& r) {
  os << "participant,group,target_N,mu_N,delta_N\n";
  for (const auto& t : r.trials) {
    if (t.spec.phase != TrialPhase::Test) continue;
    os << r.participant_id << ',' << to_string(r.group) << ',' << format_real(t.spec.target_N) << ','
       << format_real(t.mu_N) << ',' << format_real(t.delta_N) << '\n';
  }
}

}  // namespace presstrain
