#pragma once

// Between-participants experiment with bot cohorts: draw participants,
// run each through the protocol, compare group mean deltas.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "presstrain/participant.hpp"
#include "presstrain/seeds.hpp"
#include "presstrain/session.hpp"
#include "presstrain/stats.hpp"

namespace presstrain {

/// Population each group's bots are drawn from. `bias_N` is drawn per
/// participant from N(bias_mean_N, bias_sd_N); the gain from N(gain_mean, gain_sd).
struct Population {
  double bias_mean_N = 2.0;
  double bias_sd_N = 0.6;
  double gain_mean = 1.0;
  double gain_sd = 0.0;
  double aim_error_sd_N = 0.3;
  double motor_noise_sd_N = 0.05;
  double reaction_delay_s = 0.25;
  double pursuit_tau_s = 0.15;
  double learning_rate_per_min = 0.02;
};

/// Defaults give the game group a faster learning rate; the resulting
/// standardized difference in participant mean delta is about 0.85.
struct CohortConfig {
  Population game{.learning_rate_per_min = 0.073};
  Population app{.learning_rate_per_min = 0.02};

  static CohortConfig identical() {
    CohortConfig c;
    c.game = c.app;
    return c;
  }
};

inline ParticipantModel draw_participant(const Population& pop, std::mt19937_64& rng) {
  ParticipantModel m;
  m.bias_N = pop.bias_sd_N > 0.0 ? std::normal_distribution<double>(pop.bias_mean_N, pop.bias_sd_N)(rng)
                                 : pop.bias_mean_N;
  m.proportional_gain = pop.gain_sd > 0.0 ? std::normal_distribution<double>(pop.gain_mean, pop.gain_sd)(rng)
                                          : pop.gain_mean;
  m.proportional_gain = std::max(0.05, m.proportional_gain);
  m.aim_error_sd_N = pop.aim_error_sd_N;
  m.motor_noise_sd_N = pop.motor_noise_sd_N;
  m.reaction_delay_s = pop.reaction_delay_s;
  m.pursuit_tau_s = pop.pursuit_tau_s;
  m.learning_rate_per_min = pop.learning_rate_per_min;
  return m;
}

struct ExperimentResult {
  std::vector<SessionResult> sessions;  // game group first
  std::vector<double> game_scores;      // participant mean deltas
  std::vector<double> app_scores;
  stats::StatsReport report;
};

inline std::string participant_label(Group g, int i) {
  return std::string(g == Group::GameTrained ? "G" : "A") + (i + 1 < 10 ? "0" : "") + std::to_string(i + 1);
}

/// One experiment: n bots per group, each an isolated deterministic unit
/// seeded from (seed, group, index).
inline ExperimentResult simulate_experiment(int n_per_group, std::uint64_t seed, const CohortConfig& cohort,
                                            const ProtocolConfig& protocol,
                                            const stats::MannWhitneyOptions& mw = {}, bool keep_sessions = true) {
  if (n_per_group < 2) throw Error(ErrorCode::InvalidInput, "need at least 2 participants per group");
  ExperimentResult out;
  for (Group g : {Group::GameTrained, Group::AppTrained}) {
    const Population& pop = g == Group::GameTrained ? cohort.game : cohort.app;
    for (int i = 0; i < n_per_group; ++i) {
      const std::uint64_t unit = derive_seed(seed, {static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(i)});
      std::mt19937_64 draw_rng(unit);
      BotParticipant bot(draw_participant(pop, draw_rng), derive_seed(unit, 1));
      auto session = run_protocol(g, bot, derive_seed(unit, 2), protocol, participant_label(g, i));
      (g == Group::GameTrained ? out.game_scores : out.app_scores).push_back(session.mean_delta_N);
      if (keep_sessions) out.sessions.push_back(std::move(session));
    }
  }
  out.report = stats::mann_whitney(out.game_scores, out.app_scores, mw);
  if (out.report.degenerate_variance || out.report.effect_size_degenerate)
    throw Error(ErrorCode::DegenerateVariance, "participant outcomes have zero variance within both groups");
  return out;
}

struct MonteCarloResult {
  int replications = 0;
  int rejections = 0;
  double rejection_rate = 0.0;
  double mean_cohens_d = 0.0;  // game minus app, sign flipped so a benefit is positive
  double pooled_cohens_d = 0.0;  // same sign, over every participant of every replication
};

/// Replicates the experiment and counts one-tailed rejections at alpha
/// (game group mean delta smaller).
inline MonteCarloResult monte_carlo(int n_per_group, int replications, std::uint64_t seed,
                                    const CohortConfig& cohort, ProtocolConfig protocol, double alpha = 0.05) {
  if (replications <= 0) throw Error(ErrorCode::InvalidInput, "replications must be positive");
  protocol.keep_samples = false;
  stats::MannWhitneyOptions mw;
  mw.exact = false;
  mw.alternative = stats::Alternative::Less;
  mw.power.alpha = alpha;
  MonteCarloResult mc;
  mc.replications = replications;
  double d_sum = 0.0;
  std::vector<double> all_game, all_app;
  for (int r = 0; r < replications; ++r) {
    const auto exp = simulate_experiment(n_per_group, derive_seed(seed, {0x6d63, static_cast<std::uint64_t>(r)}),
                                         cohort, protocol, mw, false);
    if (exp.report.p_one_tailed < alpha) ++mc.rejections;
    if (std::isfinite(exp.report.cohens_d)) d_sum += -exp.report.cohens_d;
    all_game.insert(all_game.end(), exp.game_scores.begin(), exp.game_scores.end());
    all_app.insert(all_app.end(), exp.app_scores.begin(), exp.app_scores.end());
  }
  mc.rejection_rate = static_cast<double>(mc.rejections) / replications;
  mc.mean_cohens_d = d_sum / replications;
  mc.pooled_cohens_d = stats::cohens_d(all_app, all_game);
  return mc;
}

/// Large-sample estimate of the cohort's true standardized effect
/// (app mean minus game mean over the pooled SD of participant scores).
inline double population_effect_size(const CohortConfig& cohort, ProtocolConfig protocol, int n_per_group,
                                     std::uint64_t seed) {
  protocol.keep_samples = false;
  stats::MannWhitneyOptions mw;
  mw.exact = false;
  const auto exp = simulate_experiment(n_per_group, seed, cohort, protocol, mw, false);
  return stats::cohens_d(exp.app_scores, exp.game_scores);
}

}  // namespace presstrain
