#pragma once

// Target-hold trials, the training / familiarisation / test protocol, and
// the delta outcome metric.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "presstrain/error.hpp"
#include "presstrain/game.hpp"

namespace presstrain {

enum class Group { GameTrained, AppTrained };

inline std::string_view to_string(Group g) { return g == Group::GameTrained ? "game_trained" : "app_trained"; }

inline Group group_from_string(std::string_view s) {
  if (s == "game_trained" || s == "GameTrained" || s == "game") return Group::GameTrained;
  if (s == "app_trained" || s == "AppTrained" || s == "app") return Group::AppTrained;
  throw Error(ErrorCode::InvalidInput, "unknown group '" + std::string(s) + "'");
}

enum class TrialPhase { Training, Familiarisation, Test };

inline std::string_view to_string(TrialPhase p) {
  switch (p) {
    case TrialPhase::Training: return "training";
    case TrialPhase::Familiarisation: return "familiarisation";
    case TrialPhase::Test: return "test";
  }
  return "test";
}

inline TrialPhase trial_phase_from_string(std::string_view s) {
  if (s == "training") return TrialPhase::Training;
  if (s == "familiarisation") return TrialPhase::Familiarisation;
  if (s == "test") return TrialPhase::Test;
  throw Error(ErrorCode::InvalidData, "unknown trial phase '" + std::string(s) + "'");
}

struct TrialSpec {
  double target_N = 2.0;
  double duration_s = 10.0;
  double sample_interval_ms = 10.0;
  bool visual_feedback = true;
  TrialPhase phase = TrialPhase::Test;

  double interval_s() const { return sample_interval_ms / 1000.0; }
  std::size_t expected_samples() const {
    return static_cast<std::size_t>(std::llround(duration_s / interval_s()));
  }
  bool operator==(const TrialSpec&) const = default;

  void validate() const {
    if (!(duration_s > 0.0) || !(sample_interval_ms > 0.0))
      throw Error(ErrorCode::InvalidInput, "trial duration and interval must be positive");
    if (!(target_N > 0.0)) throw Error(ErrorCode::InvalidInput, "target force must be positive");
  }
};

struct ForceSample {
  double t_s = 0.0;
  double force_N = 0.0;

  bool operator==(const ForceSample&) const = default;
};

struct TrialRecord {
  TrialSpec spec;
  std::vector<ForceSample> samples;
  std::size_t sample_count = 0;
  double mu_N = 0.0;
  double delta_N = 0.0;

  bool operator==(const TrialRecord&) const = default;
};

/// |mu - f|
inline double trial_delta(double mu_N, double target_N) { return std::abs(mu_N - target_N); }
inline double trial_delta(const TrialRecord& r) { return trial_delta(r.mu_N, r.spec.target_N); }

enum class TrialEventKind { Started, Finished, Aborted };

struct TrialEvent {
  TrialEventKind kind;
  double target_N = 0.0;
  bool visual_feedback = true;
  TrialPhase phase = TrialPhase::Test;
  double mu_N = 0.0;
  double delta_N = 0.0;
};

/// Observer channel. `on_live_force` is only ever called for trials with
/// visual feedback.
struct TrialObserver {
  std::function<void(double t_s, double force_N)> on_live_force;
  std::function<void(const TrialEvent&)> on_event;
};

/// Running accumulation of one trial's samples.
class TrialAccumulator {
 public:
  explicit TrialAccumulator(TrialSpec spec, bool keep_samples = true)
      : spec_(spec), keep_(keep_samples) {
    spec_.validate();
    if (keep_) samples_.reserve(spec_.expected_samples());
  }

  void add(double t_s, double force_N) {
    if (keep_) samples_.push_back({t_s, force_N});
    sum_ += force_N;
    ++count_;
  }

  std::size_t count() const { return count_; }
  const TrialSpec& spec() const { return spec_; }

  TrialRecord finish() && {
    TrialRecord r;
    r.spec = spec_;
    r.samples = std::move(samples_);
    r.sample_count = count_;
    r.mu_N = count_ ? sum_ / static_cast<double>(count_) : 0.0;
    r.delta_N = trial_delta(r.mu_N, spec_.target_N);
    return r;
  }

 private:
  TrialSpec spec_;
  bool keep_;
  std::vector<ForceSample> samples_;
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

inline constexpr double kStallLimitS = 0.5;

/// Samples `source(t)` at every interval over the trial (t relative to
/// trial start). A source returning nullopt for longer than the stall limit
/// aborts the trial.
template <class Source>
  requires std::invocable<Source&, double>
TrialRecord run_trial(const TrialSpec& spec, Source&& source, const TrialObserver* observer = nullptr,
                      double stall_limit_s = kStallLimitS) {
  TrialAccumulator acc(spec);
  const std::size_t n = spec.expected_samples();
  const double dt = spec.interval_s();
  auto notify = [&](const TrialEvent& e) {
    if (observer && observer->on_event) observer->on_event(e);
  };
  notify({TrialEventKind::Started, spec.target_N, spec.visual_feedback, spec.phase});
  double last_ok = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const std::optional<double> f = source(t);
    if (!f) {
      if (t - last_ok > stall_limit_s) {
        notify({TrialEventKind::Aborted, spec.target_N, spec.visual_feedback, spec.phase});
        throw Error(ErrorCode::TrialAborted, "force source stalled for more than " +
                                                 std::to_string(stall_limit_s) + " s");
      }
      continue;
    }
    last_ok = t;
    acc.add(t, *f);
    if (spec.visual_feedback && observer && observer->on_live_force) observer->on_live_force(t, *f);
  }
  auto rec = std::move(acc).finish();
  notify({TrialEventKind::Finished, spec.target_N, spec.visual_feedback, spec.phase, rec.mu_N, rec.delta_N});
  return rec;
}

// ---------------------------------------------------------------------------
// Protocol

struct ProtocolConfig {
  double training_minutes = 5.0;
  int game_rounds = 3;
  double inter_round_rest_s = 60.0;
  double rest_before_test_s = 60.0;
  std::vector<double> targets_N{2.0, 3.0, 5.0};
  int familiarisation_trials_per_target = 1;
  int test_trials_per_target = 1;
  double trial_duration_s = 10.0;
  double sample_interval_ms = 10.0;
  bool keep_samples = true;
  GameConfig game{};

  /// 100 ms sampling so a 10 s trial yields 100 samples.
  void use_100ms_sampling() { sample_interval_ms = 100.0; }

  void validate() const {
    if (!(training_minutes > 0.0) || game_rounds < 1 || !(inter_round_rest_s >= 0.0) ||
        !(rest_before_test_s >= 0.0) || !(trial_duration_s > 0.0) || !(sample_interval_ms > 0.0))
      throw Error(ErrorCode::InvalidInput, "invalid protocol timing");
    if (targets_N.empty() || familiarisation_trials_per_target < 0 || test_trials_per_target < 1)
      throw Error(ErrorCode::InvalidInput, "invalid protocol trial counts");
    game.validate();
  }
};

enum class PhaseKind { GameRound, AppPractice, Rest, Familiarisation, Test };

inline std::string_view to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::GameRound: return "game_round";
    case PhaseKind::AppPractice: return "app_practice";
    case PhaseKind::Rest: return "rest";
    case PhaseKind::Familiarisation: return "familiarisation";
    case PhaseKind::Test: return "test";
  }
  return "rest";
}

struct PhaseStep {
  PhaseKind kind = PhaseKind::Rest;
  double planned_s = 0.0;
  int round = 0;
  double target_N = 0.0;
  bool visual_feedback = true;

  bool is_trial() const {
    return kind == PhaseKind::AppPractice || kind == PhaseKind::Familiarisation || kind == PhaseKind::Test;
  }
  bool is_training() const { return kind == PhaseKind::GameRound || kind == PhaseKind::AppPractice; }
};

/// Ordered phase list for one participant. Trials run in the configured
/// target order.
inline std::vector<PhaseStep> make_plan(Group group, const ProtocolConfig& cfg) {
  cfg.validate();
  std::vector<PhaseStep> plan;
  const double training_s = cfg.training_minutes * 60.0;
  if (group == Group::GameTrained) {
    for (int r = 0; r < cfg.game_rounds; ++r) {
      if (r > 0) plan.push_back({PhaseKind::Rest, cfg.inter_round_rest_s});
      plan.push_back({PhaseKind::GameRound, training_s / cfg.game_rounds, r});
    }
  } else {
    const auto trials = static_cast<int>(std::ceil(training_s / cfg.trial_duration_s - 1e-9));
    for (int i = 0; i < trials; ++i) {
      const double target = cfg.targets_N[static_cast<std::size_t>(i) % cfg.targets_N.size()];
      plan.push_back({PhaseKind::AppPractice, cfg.trial_duration_s, i, target, true});
    }
  }
  for (double target : cfg.targets_N)
    for (int i = 0; i < cfg.familiarisation_trials_per_target; ++i)
      plan.push_back({PhaseKind::Familiarisation, cfg.trial_duration_s, i, target, true});
  plan.push_back({PhaseKind::Rest, cfg.rest_before_test_s});
  for (double target : cfg.targets_N)
    for (int i = 0; i < cfg.test_trials_per_target; ++i)
      plan.push_back({PhaseKind::Test, cfg.trial_duration_s, i, target, false});
  return plan;
}

struct PhaseRecord {
  PhaseKind kind = PhaseKind::Rest;
  double start_s = 0.0;
  double end_s = 0.0;
  int round = 0;
  double target_N = 0.0;

  bool operator==(const PhaseRecord&) const = default;
};

enum class SessionStatus { Running, Completed, Aborted };

inline std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Running: return "running";
    case SessionStatus::Completed: return "completed";
    case SessionStatus::Aborted: return "aborted";
  }
  return "running";
}

struct SessionResult {
  std::string participant_id;
  Group group = Group::AppTrained;
  SessionStatus status = SessionStatus::Running;
  std::string status_detail;
  double sample_interval_ms = 10.0;
  std::vector<TrialRecord> trials;
  std::vector<PhaseRecord> timeline;
  std::vector<int> game_scores;
  double training_s = 0.0;
  double mean_delta_N = 0.0;

  bool operator==(const SessionResult&) const = default;
};

/// Mean over targets of the per-target delta in the no-visual test
/// (repeats of a target are averaged first).
inline double participant_score(const SessionResult& r) {
  std::map<double, std::pair<double, int>> per_target;
  for (const auto& t : r.trials) {
    if (t.spec.phase != TrialPhase::Test) continue;
    auto& acc = per_target[t.spec.target_N];
    acc.first += t.delta_N;
    ++acc.second;
  }
  if (per_target.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [target, acc] : per_target) sum += acc.first / acc.second;
  return sum / static_cast<double>(per_target.size());
}

/// What a participant (bot or UI) sees at a given instant.
struct RunnerView {
  const PhaseStep* phase = nullptr;
  const GameState* game = nullptr;
  const TrialSpec* trial = nullptr;
  std::size_t phase_index = 0;
  double phase_elapsed_s = 0.0;
  double training_s = 0.0;
};

enum class RunnerEventKind { PhaseStarted, PhaseEnded, Game, Trial, LiveForce, SessionEnded };

struct RunnerEvent {
  RunnerEventKind kind;
  double t_s = 0.0;
  std::size_t phase_index = 0;
  std::optional<GameEvent> game;
  std::optional<TrialEvent> trial;
  double force_N = 0.0;
};

/// Protocol state machine driven by timestamps on the session clock.
/// Headless drivers call `advance(next_due_s(), force)`; a real-time loop
/// calls `advance(now, latest_force)` and every due sample is taken with
/// that force (sample-and-hold).
class ProtocolRunner {
 public:
  ProtocolRunner(std::string participant_id, Group group, ProtocolConfig cfg, std::uint64_t game_seed)
      : cfg_(std::move(cfg)), plan_(make_plan(group, cfg_)), game_seed_(game_seed), game_dt_(cfg_.game.dt_s()) {
    result_.participant_id = std::move(participant_id);
    result_.group = group;
    result_.sample_interval_ms = cfg_.sample_interval_ms;
  }

  bool done() const { return result_.status != SessionStatus::Running; }
  const SessionResult& result() const { return result_; }
  SessionResult take_result() && { return std::move(result_); }
  const std::vector<PhaseStep>& plan() const { return plan_; }
  const ProtocolConfig& config() const { return cfg_; }
  double now_s() const { return now_; }

  /// Headless drivers that ignore per-sample force echoes can turn them off.
  void set_live_force_events(bool on) { live_force_events_ = on; }

  const PhaseStep* current_phase() const {
    return started_ && index_ < plan_.size() ? &plan_[index_] : nullptr;
  }
  const GameState* game() const { return game_ ? &*game_ : nullptr; }
  const TrialSpec* trial() const { return trial_ ? &trial_->spec() : nullptr; }
  std::size_t phase_index() const { return index_; }

  RunnerView view() const {
    RunnerView v;
    v.phase = current_phase();
    v.game = game();
    v.trial = trial();
    v.phase_index = index_;
    v.phase_elapsed_s = started_ ? now_ - phase_start_ : 0.0;
    v.training_s = result_.training_s;
    return v;
  }

  /// Session-clock time of the next sample, tick or phase boundary.
  double next_due_s() const {
    if (!started_) return now_;
    const auto& ph = plan_[index_];
    if (ph.kind == PhaseKind::Rest) return phase_start_ + ph.planned_s;
    if (ph.kind == PhaseKind::GameRound)
      return phase_start_ + static_cast<double>(game_->ticks + 1) * game_dt_;
    return phase_start_ + static_cast<double>(trial_samples_taken_) * trial_dt_;
  }

  std::vector<RunnerEvent> advance(double now_s, std::optional<double> force_N) {
    std::vector<RunnerEvent> events;
    advance(now_s, force_N, events);
    return events;
  }

  /// Appends to `events` instead of allocating a fresh vector.
  void advance(double now_s, std::optional<double> force_N, std::vector<RunnerEvent>& events) {
    if (done()) return;
    if (!started_) {
      started_ = true;
      enter_phase(now_, events);
    }
    now_ = std::max(now_, now_s);
    // Stops at a phase change so the caller can sample its input again for
    // the new phase; the remaining due samples are taken on the next call.
    const std::size_t entry_index = index_;
    while (!done() && index_ == entry_index) {
      const double due = next_due_s();
      if (due > now_ + 1e-9) break;
      const auto& ph = plan_[index_];
      if (ph.kind == PhaseKind::Rest) {
        end_phase(due, events);
      } else if (ph.kind == PhaseKind::GameRound) {
        for (const auto& ge : tick(*game_, cfg_.game, force_N.value_or(0.0))) {
          RunnerEvent e{RunnerEventKind::Game, due, index_, {}, {}, 0.0};
          e.game = ge;
          events.push_back(e);
        }
        if (game_->finished || due - phase_start_ >= 10.0 * ph.planned_s) {
          result_.game_scores.push_back(game_->score);
          end_phase(due, events);
        }
      } else {
        if (!step_trial(due, force_N, events)) break;
      }
    }
  }

  /// Ends the session early (e.g. participant disconnected). Completed
  /// trials are kept.
  std::vector<RunnerEvent> abort(std::string reason) {
    std::vector<RunnerEvent> events;
    if (done()) return events;
    if (trial_) {
      TrialEvent te{TrialEventKind::Aborted, trial_->spec().target_N, trial_->spec().visual_feedback,
                    trial_->spec().phase};
      RunnerEvent e{RunnerEventKind::Trial, now_, index_, {}, {}, 0.0};
      e.trial = te;
      events.push_back(e);
      trial_.reset();
    }
    result_.status = SessionStatus::Aborted;
    result_.status_detail = std::move(reason);
    result_.mean_delta_N = participant_score(result_);
    events.push_back({RunnerEventKind::SessionEnded, now_, index_, {}, {}, 0.0});
    return events;
  }

 private:
  static TrialPhase trial_phase_of(PhaseKind k) {
    if (k == PhaseKind::AppPractice) return TrialPhase::Training;
    if (k == PhaseKind::Familiarisation) return TrialPhase::Familiarisation;
    return TrialPhase::Test;
  }

  void enter_phase(double t, std::vector<RunnerEvent>& events) {
    phase_start_ = t;
    const auto& ph = plan_[index_];
    events.push_back({RunnerEventKind::PhaseStarted, t, index_, {}, {}, 0.0});
    if (ph.kind == PhaseKind::GameRound) {
      game_ = new_game(game_seed_ + static_cast<std::uint64_t>(ph.round), cfg_.game);
    } else if (ph.is_trial()) {
      TrialSpec spec;
      spec.target_N = ph.target_N;
      spec.duration_s = cfg_.trial_duration_s;
      spec.sample_interval_ms = cfg_.sample_interval_ms;
      spec.visual_feedback = ph.visual_feedback;
      spec.phase = trial_phase_of(ph.kind);
      trial_.emplace(spec, cfg_.keep_samples);
      trial_samples_taken_ = 0;
      trial_expected_ = spec.expected_samples();
      trial_dt_ = spec.interval_s();
      last_force_ok_s_ = t;
      RunnerEvent e{RunnerEventKind::Trial, t, index_, {}, {}, 0.0};
      e.trial = TrialEvent{TrialEventKind::Started, spec.target_N, spec.visual_feedback, spec.phase};
      events.push_back(e);
    }
  }

  void end_phase(double t, std::vector<RunnerEvent>& events) {
    const auto& ph = plan_[index_];
    result_.timeline.push_back({ph.kind, phase_start_, t, ph.round, ph.target_N});
    if (ph.is_training()) result_.training_s += t - phase_start_;
    events.push_back({RunnerEventKind::PhaseEnded, t, index_, {}, {}, 0.0});
    game_.reset();
    trial_.reset();
    ++index_;
    if (index_ >= plan_.size()) {
      result_.status = SessionStatus::Completed;
      result_.mean_delta_N = participant_score(result_);
      events.push_back({RunnerEventKind::SessionEnded, t, index_, {}, {}, 0.0});
      return;
    }
    enter_phase(t, events);
  }

  // Returns false when the runner must wait (stalled source).
  bool step_trial(double due, std::optional<double> force_N, std::vector<RunnerEvent>& events) {
    const auto& spec = trial_->spec();
    if (trial_samples_taken_ >= trial_expected_) {
      auto rec = std::move(*trial_).finish();
      RunnerEvent e{RunnerEventKind::Trial, due, index_, {}, {}, 0.0};
      e.trial = TrialEvent{TrialEventKind::Finished, spec.target_N, spec.visual_feedback, spec.phase,
                           rec.mu_N, rec.delta_N};
      result_.trials.push_back(std::move(rec));
      events.push_back(e);
      end_phase(due, events);
      return true;
    }
    const double rel = static_cast<double>(trial_samples_taken_) * trial_dt_;
    if (!force_N) {
      if (due - last_force_ok_s_ > kStallLimitS) {
        auto ev = abort("force source stalled for more than 0.5 s during a trial");
        events.insert(events.end(), ev.begin(), ev.end());
        return true;
      }
      ++trial_samples_taken_;
      return true;
    }
    last_force_ok_s_ = due;
    trial_->add(rel, *force_N);
    ++trial_samples_taken_;
    if (spec.visual_feedback && live_force_events_) {
      RunnerEvent e{RunnerEventKind::LiveForce, due, index_, {}, {}, 0.0};
      e.force_N = *force_N;
      events.push_back(e);
    }
    return true;
  }

  ProtocolConfig cfg_;
  std::vector<PhaseStep> plan_;
  std::uint64_t game_seed_;
  SessionResult result_;
  bool started_ = false;
  std::size_t index_ = 0;
  double now_ = 0.0;
  double phase_start_ = 0.0;
  std::optional<GameState> game_;
  std::optional<TrialAccumulator> trial_;
  std::size_t trial_samples_taken_ = 0;
  std::size_t trial_expected_ = 0;
  double trial_dt_ = 0.0;
  double game_dt_ = 0.0;
  double last_force_ok_s_ = 0.0;
  bool live_force_events_ = true;
};

}  // namespace presstrain
