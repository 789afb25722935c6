#pragma once

// The real-time loop. One thread owns the decoder, the calibration curve and
// the active session; every other thread talks to it through `post`.

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stop_token>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "presstrain/calib.hpp"
#include "presstrain/calib_io.hpp"
#include "presstrain/gateway/hub.hpp"
#include "presstrain/gateway/messages.hpp"
#include "presstrain/gateway/server_config.hpp"
#include "presstrain/gateway/sources.hpp"
#include "presstrain/gateway/store.hpp"
#include "presstrain/glovewire.hpp"
#include "presstrain/seeds.hpp"
#include "presstrain/session.hpp"

namespace presstrain::gateway {

enum class SessionMode { Protocol, Game };

inline SessionMode session_mode_from_string(std::string_view s) {
  if (s == "protocol") return SessionMode::Protocol;
  if (s == "game") return SessionMode::Game;
  throw Error(ErrorCode::InvalidInput, "mode must be 'protocol' or 'game'");
}

/// Session id or the error that prevented the start.
using StartReply = std::variant<std::string, Error>;

struct StartSession {
  Group group = Group::GameTrained;
  std::string participant_id;
  SessionMode mode = SessionMode::Protocol;
  std::function<void(StartReply)> done;
};

struct ForceInput {
  double newtons = 0.0;
};

struct Control {
  ControlMsg msg;
  std::function<void(std::string)> reply;  // one message back to the sender
};

struct ExportSession {
  std::string id;
  std::function<void(ExportReply)> done;
};

using Command = std::variant<StartSession, ForceInput, Control, ExportSession>;

/// Calibrates a copy of the source's modelled sensor on a simulated stand,
/// or a nominal sensor of the channel's category when there is no model.
inline CalibrationCurve default_curve(const GloveSource& source, std::size_t channel, std::uint64_t seed) {
  const auto category = kGloveLayout.at(channel);
  if (category == SensorCategory::Large)
    throw Error(ErrorCode::InvalidInput, "large sensors are presence indicators; pick a fingertip or pad channel");
  FsrSensor sensor = source.model_sensor(channel).value_or(FsrSensor(SensorSpec::of(category), ArtefactModel{}, seed));
  SimulatedRig rig(std::move(sensor));
  const auto schedule = run_schedule(rig, category);
  return fit_quintic(schedule.points, category);
}

inline CalibrationCurve load_curve(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::InvalidInput, "cannot open calibration curve '" + path + "'");
  try {
    return curve_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidData, "calibration curve '" + path + "': " + e.what());
  }
}

/// Counts below the calibrated range ramp linearly down to zero force;
/// above it the curve is held at its last value.
inline double counts_to_force(const CalibrationCurve& curve, int counts) {
  if (counts <= 0) return 0.0;
  if (counts < curve.domain_lo) {
    const double at_lo = estimate_force(curve, curve.domain_lo).force_N;
    return std::max(0.0, at_lo * counts / curve.domain_lo);
  }
  return std::max(0.0, estimate_force(curve, counts).force_N);
}

struct DriverStats {
  std::uint64_t ticks = 0;
  std::uint64_t frames = 0;
  std::uint64_t frame_errors = 0;
  std::uint64_t state_messages = 0;
  double max_tick_s = 0.0;
};

inline std::uint64_t steady_us() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

class Driver {
 public:
  Driver(ServerConfig cfg, std::shared_ptr<GloveSource> source, Hub& hub, SessionStore& store)
      : cfg_(std::move(cfg)), source_(std::move(source)), hub_(hub), store_(store) {
    cfg_.validate();
    channel_ = static_cast<std::size_t>(cfg_.force_channel);
    curve_ = cfg_.calibration_curve_path.empty() ? default_curve(*source_, channel_, cfg_.source.seed)
                                                 : load_curve(cfg_.calibration_curve_path);
    std::random_device rd;
    rng_.seed((std::uint64_t{rd()} << 32) ^ rd() ^ cfg_.source.seed);
  }

  const ServerConfig& config() const { return cfg_; }
  const CalibrationCurve& curve() const { return curve_; }

  /// Thread-safe.
  void post(Command c) {
    std::lock_guard lock(cmd_mu_);
    commands_.push_back(std::move(c));
  }

  DriverStats stats() const {
    std::lock_guard lock(stats_mu_);
    return stats_;
  }

  /// True while a session runs. Loop thread only.
  bool busy() const { return active_.has_value(); }

  /// One loop iteration at `now_s` on the driver clock. Loop thread only.
  void tick(double now_s) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!started_at_) started_at_ = now_s;
    now_ = now_s;
    drain_commands();
    read_source(now_s);

    const bool lost = !source_->healthy() || now_s - last_frame_at_.value_or(*started_at_) > cfg_.source_timeout_s;
    if (active_) {
      if (lost) abort_active("glove source lost");
      else step_active(now_s);
    }
    publish_state(now_s);

    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::lock_guard lock(stats_mu_);
    ++stats_.ticks;
    stats_.max_tick_s = std::max(stats_.max_tick_s, took);
  }

  /// Fixed-rate loop on the steady clock. Missed ticks are skipped rather
  /// than replayed in a burst.
  void run(std::stop_token stop) {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration<double>(1.0 / cfg_.tick_hz);
    const auto start = clock::now();
    std::uint64_t k = 0;
    while (!stop.stop_requested()) {
      const auto due = start + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(k));
      std::this_thread::sleep_until(due);
      tick(std::chrono::duration<double>(clock::now() - start).count());
      ++k;
      const double behind = std::chrono::duration<double>(clock::now() - start).count() / period.count();
      if (behind > static_cast<double>(k) + 1.0) k = static_cast<std::uint64_t>(behind);
    }
    if (active_) abort_active("server shutting down");
  }

 private:
  struct Active {
    std::string id;
    SessionMode mode = SessionMode::Protocol;
    double start_s = 0.0;
    std::optional<ProtocolRunner> runner;
    std::optional<GameState> game;  // game mode only
    SessionResult game_result;
  };

  void drain_commands() {
    std::deque<Command> cmds;
    {
      std::lock_guard lock(cmd_mu_);
      cmds.swap(commands_);
    }
    for (auto& c : cmds) std::visit([this](auto& cmd) { handle(cmd); }, c);
  }

  void handle(StartSession& c) {
    auto reply = [&](StartReply r) {
      if (c.done) c.done(std::move(r));
    };
    if (active_) return reply(Error(ErrorCode::Busy, "a session is already running"));
    try {
      Active a;
      a.id = new_session_id(c.participant_id);
      a.mode = c.mode;
      a.start_s = now_;
      const std::uint64_t game_seed = rng_();
      if (c.mode == SessionMode::Protocol) {
        a.runner.emplace(c.participant_id, c.group, cfg_.protocol, game_seed);
        a.runner->set_live_force_events(false);
      } else {
        a.game = new_game(game_seed, cfg_.protocol.game);
        a.game_result.participant_id = c.participant_id;
        a.game_result.group = c.group;
        a.game_result.sample_interval_ms = cfg_.protocol.sample_interval_ms;
      }
      active_ = std::move(a);
      reply(active_->id);
    } catch (const Error& e) {
      reply(e);
    }
  }

  void handle(ForceInput& c) { source_->set_pressed_force(c.newtons); }

  void handle(Control& c) {
    auto reply = [&](std::string m) {
      if (c.reply) c.reply(std::move(m));
    };
    if (c.msg.action == "abort") {
      if (!active_) return reply(error_message("no session is running"));
      abort_active("aborted by investigator");
      return reply(ack_message("abort"));
    }
    if (c.msg.action == "set_target") {
      if (!c.msg.target_N || !(*c.msg.target_N > 0.0)) return reply(error_message("set_target needs target_N > 0"));
      idle_target_ = *c.msg.target_N;
      return reply(ack_message("set_target"));
    }
    if (c.msg.action == "clear_target") {
      idle_target_.reset();
      return reply(ack_message("clear_target"));
    }
    reply(error_message("unknown control action '" + c.msg.action + "'"));
  }

  void handle(ExportSession& c) {
    if (active_ && active_->id == c.id) {
      store_.save(c.id, snapshot(), std::move(c.done));
      return;
    }
    store_.load(c.id, std::move(c.done));
  }

  std::string new_session_id(const std::string& participant) {
    std::string base;
    for (char ch : participant)
      base += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
    if (base.empty() || base.size() > 64) throw Error(ErrorCode::InvalidInput, "participant_id must be 1..64 chars");
    while (true) {
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(rng_()));
      std::string id = base + "-" + std::string(hex, 8);
      if (!std::filesystem::exists(store_.json_path(id))) return id;
    }
  }

  void read_source(double now_s) {
    const auto bytes = source_->read(now_s);
    if (bytes.empty()) return;
    auto batch = decoder_.push(bytes);
    if (!batch.frames.empty()) {
      const auto& f = batch.frames.back();
      force_N_ = counts_to_force(curve_, f.channels[channel_]);
      last_frame_at_ = now_s;
      stamp_ = {steady_us(), f.seq};
    }
    std::lock_guard lock(stats_mu_);
    stats_.frames += batch.frames.size();
    stats_.frame_errors += batch.errors.size();
  }

  SessionResult snapshot() const {
    if (active_->runner) return active_->runner->result();
    auto r = active_->game_result;
    if (active_->game) r.game_scores = {active_->game->score};
    return r;
  }

  void step_active(double now_s) {
    const double t = now_s - active_->start_s;
    if (active_->runner) {
      auto& runner = *active_->runner;
      events_.clear();
      while (!runner.done()) {
        const auto index = runner.phase_index();
        runner.advance(t, force_N_, events_);
        if (runner.phase_index() == index) break;
      }
      publish_events(events_);
      if (runner.done()) finish_active();
      return;
    }
    auto& g = *active_->game;
    const auto& gc = cfg_.protocol.game;
    const double dt = gc.dt_s();
    while (!g.finished && static_cast<double>(g.ticks + 1) * dt <= t + 1e-9) {
      for (const auto& e : presstrain::tick(g, gc, force_N_))
        if (e.kind == GameEventKind::CoinCollected)
          hub_.publish(Delivery::Control, score_message(active_->id, e.score, g.collected, false));
    }
    if (g.finished) {
      auto& r = active_->game_result;
      r.game_scores = {g.score};
      r.timeline.push_back({PhaseKind::GameRound, 0.0, g.t_s, 0, 0.0});
      r.training_s = g.t_s;
      r.status = SessionStatus::Completed;
      hub_.publish(Delivery::Control, score_message(active_->id, g.score, g.collected, true));
      hub_.publish(Delivery::Control, session_event_message(active_->id, r.status, r.status_detail));
      finish_active();
    }
  }

  void publish_events(const std::vector<RunnerEvent>& events) {
    const auto& id = active_->id;
    for (const auto& e : events) {
      if (e.kind == RunnerEventKind::Trial && e.trial) {
        hub_.publish(Delivery::Control, trial_event_message(id, *e.trial));
      } else if (e.kind == RunnerEventKind::Game && e.game) {
        const auto* g = active_->runner->game();
        const int collected = g ? g->collected : 0;
        hub_.publish(Delivery::Control,
                     score_message(id, e.game->score, collected, e.game->kind == GameEventKind::Finished));
      } else if (e.kind == RunnerEventKind::SessionEnded) {
        const auto& r = active_->runner->result();
        hub_.publish(Delivery::Control, session_event_message(id, r.status, r.status_detail));
      }
    }
  }

  void abort_active(const std::string& reason) {
    if (active_->runner) {
      publish_events(active_->runner->abort(reason));
    } else {
      auto& r = active_->game_result;
      r.status = SessionStatus::Aborted;
      r.status_detail = reason;
      hub_.publish(Delivery::Control, session_event_message(active_->id, r.status, reason));
    }
    finish_active();
  }

  void finish_active() {
    auto result = snapshot();
    store_.save(active_->id, std::move(result));
    active_.reset();
  }

  void publish_state(double now_s) {
    std::string msg;
    const GameState* game = nullptr;
    double t = now_s;
    if (active_) {
      t = now_s - active_->start_s;
      game = active_->runner ? active_->runner->game() : (active_->game ? &*active_->game : nullptr);
    }
    if (game) {
      msg = game_state_message(active_->id, *game, t, stamp_);
    } else {
      ScaleView v;
      v.force_N = force_N_;
      v.target_N = idle_target_;
      if (active_ && active_->runner) {
        v.session_id = active_->id;
        const auto view = active_->runner->view();
        if (view.phase) {
          v.phase = std::string(to_string(view.phase->kind));
          v.remaining_s = std::max(0.0, view.phase->planned_s - view.phase_elapsed_s);
        }
        if (view.trial) {
          v.in_trial = true;
          v.target_N = view.trial->target_N;
          v.visual_feedback = view.trial->visual_feedback;
        }
      }
      msg = scale_state_message(v, t, stamp_);
    }
    hub_.publish(Delivery::State, std::move(msg));
    std::lock_guard lock(stats_mu_);
    ++stats_.state_messages;
  }

  ServerConfig cfg_;
  std::shared_ptr<GloveSource> source_;
  Hub& hub_;
  SessionStore& store_;
  std::size_t channel_ = 0;
  CalibrationCurve curve_;
  StreamDecoder decoder_;
  std::mt19937_64 rng_;

  std::mutex cmd_mu_;
  std::deque<Command> commands_;

  mutable std::mutex stats_mu_;
  DriverStats stats_;

  std::optional<double> started_at_;
  double now_ = 0.0;
  std::optional<double> last_frame_at_;
  double force_N_ = 0.0;
  FrameStamp stamp_;
  std::optional<double> idle_target_;
  std::optional<Active> active_;
  std::vector<RunnerEvent> events_;
};

}  // namespace presstrain::gateway
