#pragma once

// Simulated participant ("bot") and the headless protocol driver.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "presstrain/error.hpp"
#include "presstrain/seeds.hpp"
#include "presstrain/session.hpp"

namespace presstrain {

/// Control law: first-order pursuit of an aim point after a reaction delay,
/// plus Gaussian tremor. Without visual feedback the aim is
/// gain * target + bias + a per-trial aim error. Bias, aim error and tremor
/// shrink by exp(-learning_rate * training minutes).
struct ParticipantModel {
  double reaction_delay_s = 0.25;
  double pursuit_tau_s = 0.15;
  double proportional_gain = 1.0;
  double motor_noise_sd_N = 0.05;
  double bias_N = 0.0;
  double aim_error_sd_N = 0.0;
  double learning_rate_per_min = 0.0;

  void validate() const {
    if (!(proportional_gain > 0.0)) throw Error(ErrorCode::InvalidInput, "gain must be positive");
    if (!(motor_noise_sd_N >= 0.0) || !(aim_error_sd_N >= 0.0))
      throw Error(ErrorCode::InvalidInput, "noise sd must be non-negative");
    if (!(reaction_delay_s >= 0.0) || !(pursuit_tau_s >= 0.0) || !(learning_rate_per_min >= 0.0))
      throw Error(ErrorCode::InvalidInput, "timing and learning parameters must be non-negative");
  }

  double learning_factor(double training_minutes) const {
    return std::exp(-learning_rate_per_min * training_minutes);
  }
};

class BotParticipant {
 public:
  BotParticipant(ParticipantModel model, std::uint64_t seed) : model_(model), rng_(seed) { model_.validate(); }

  const ParticipantModel& model() const { return model_; }

  std::optional<double> force(const RunnerView& v, double t_s) {
    if (!v.phase || v.phase->kind == PhaseKind::Rest) {
      reset_motion(t_s);
      return 0.0;
    }
    if (v.training_s != factor_training_s_) {
      factor_training_s_ = v.training_s;
      factor_ = model_.learning_factor(v.training_s / 60.0);
    }
    const double k = factor_;
    const double tremor_sd = model_.motor_noise_sd_N * k;

    if (v.phase->kind == PhaseKind::GameRound && v.game) {
      const double wanted = v.game->next_coin_level_N.value_or(aim_);
      if (wanted != pending_aim_) {
        pending_aim_ = wanted;
        pending_since_ = t_s;
      }
      if (t_s - pending_since_ >= model_.reaction_delay_s) aim_ = pending_aim_;
      const double dt = std::max(0.0, t_s - last_t_);
      if (dt != relax_dt_) {
        relax_dt_ = dt;
        relax_ = model_.pursuit_tau_s > 0.0 ? 1.0 - std::exp(-dt / model_.pursuit_tau_s) : 1.0;
      }
      position_ += (aim_ - position_) * relax_;
      last_t_ = t_s;
      return std::max(0.0, position_ + draw(tremor_sd));
    }

    if (v.trial) {
      if (!trial_aim_ || trial_phase_index_ != v.phase_index) {
        trial_phase_index_ = v.phase_index;
        // Reach phase happens before recording starts.
        const double target = v.trial->target_N;
        trial_aim_ = v.trial->visual_feedback
                         ? target
                         : model_.proportional_gain * target + model_.bias_N * k + draw(model_.aim_error_sd_N * k);
      }
      return std::max(0.0, *trial_aim_ + draw(tremor_sd));
    }
    return 0.0;
  }

 private:
  double draw(double sd) {
    if (!(sd > 0.0)) return 0.0;
    return sd * unit_normal_(rng_);
  }

  void reset_motion(double t_s) {
    position_ = 0.0;
    aim_ = 0.0;
    pending_aim_ = 0.0;
    pending_since_ = t_s;
    last_t_ = t_s;
    trial_aim_.reset();
  }

  ParticipantModel model_;
  std::mt19937_64 rng_;
  boost::random::normal_distribution<double> unit_normal_{0.0, 1.0};
  double factor_training_s_ = 0.0;
  double factor_ = 1.0;
  double relax_dt_ = -1.0;
  double relax_ = 1.0;
  double position_ = 0.0;
  double aim_ = 0.0;
  double pending_aim_ = 0.0;
  double pending_since_ = 0.0;
  double last_t_ = 0.0;
  std::optional<double> trial_aim_;
  std::size_t trial_phase_index_ = 0;
};

/// Runs the full protocol for a bot on the simulated clock.
inline SessionResult run_protocol(Group group, BotParticipant& bot, std::uint64_t seed,
                                  const ProtocolConfig& cfg, std::string participant_id = "bot") {
  ProtocolRunner runner(std::move(participant_id), group, cfg, derive_seed(seed, 0x67616d65));
  runner.set_live_force_events(false);
  std::vector<RunnerEvent> events;
  while (!runner.done()) {
    const double t = runner.next_due_s();
    events.clear();
    runner.advance(t, bot.force(runner.view(), t), events);
  }
  return std::move(runner).take_result();
}

}  // namespace presstrain
