#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "presstrain/calib.hpp"
#include "presstrain/calib_io.hpp"
#include "presstrain/config.hpp"
#include "presstrain/experiment.hpp"
#include "presstrain/game.hpp"
#include "presstrain/game_io.hpp"
#include "presstrain/gateway/server.hpp"
#include "presstrain/participant.hpp"
#include "presstrain/seeds.hpp"
#include "presstrain/session_io.hpp"
#include "presstrain/stats.hpp"
#include "presstrain/stats_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace presstrain;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitAbort = 3;

/// Everything a config file can set.
struct Settings {
  gateway::ServerConfig server;
  CohortConfig cohort;
  ParticipantModel bot;
  ScheduleConfig schedule;

  ConfigSchema schema() {
    ConfigSchema s;
    gateway::bind_server(s, server);
    bind_cohort(s, cohort);
    bind_participant(s, bot);
    s.add("calibrate.step_counts", schedule.step_counts, "counts between calibration levels");
    s.add("calibrate.repeats", schedule.repeats, "presses per calibration level");
    s.add("calibrate.hold_s", schedule.hold_s, "hold time per press (s)");
    s.add("calibrate.rest_s", schedule.rest_s, "rest between presses (s)");
    return s;
  }
};

struct Globals {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string out_dir = ".";
  bool json_output = false;
};

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::InvalidInput, "cannot open '" + path + "'");
  return is;
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw Error(ErrorCode::InvalidInput, "cannot write '" + p.string() + "'");
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void emit(const Globals& g, const json& j, const std::string& text) {
  if (g.json_output) std::cout << j.dump(2) << '\n';
  else std::cout << text;
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const Globals& g, Settings& s, const std::string& category_name) {
  const auto category = category_from_string(category_name);
  SimulatedRig rig(FsrSensor(SensorSpec::of(category), ArtefactModel{}, derive_seed(g.seed, 0x63616c)));
  const auto schedule = run_schedule(rig, category, s.schedule);
  const auto curve = fit_quintic(schedule.points, category);
  std::ostringstream points;
  write_points_csv(points, schedule.points, category);
  const auto points_path = out_path(g, "points.csv");
  const auto curve_path = out_path(g, "curve.json");
  write_text(points_path, points.str());
  write_text(curve_path, to_json(curve).dump(2) + "\n");

  json j{{"category", to_string(category)},
         {"points", schedule.points.size()},
         {"truncated", schedule.truncated},
         {"warnings", schedule.warnings},
         {"curve", to_json(curve)},
         {"files", {points_path.string(), curve_path.string()}}};
  std::ostringstream t;
  t << "calibrated " << to_string(category) << " sensor: " << schedule.points.size() << " points\n"
    << "rms residual " << fixed(curve.rms_residual_N) << " N, max " << fixed(curve.max_residual_N) << " N\n"
    << "wrote " << points_path.string() << " and " << curve_path.string() << '\n';
  for (const auto& w : schedule.warnings) t << "warning: " << w << '\n';
  emit(g, j, t.str());
  return kExitOk;
}

int cmd_fit(const Globals& g, const std::string& in, int degree) {
  auto is = open_in(in);
  const auto set = read_points_csv(is);
  const auto curve = fit_polynomial(set.points, degree, set.category);
  const auto curve_path = out_path(g, "curve.json");
  write_text(curve_path, to_json(curve).dump(2) + "\n");
  json j = to_json(curve);
  j["file"] = curve_path.string();
  std::ostringstream t;
  t << "degree " << degree << " fit over " << set.points.size() << " points, counts " << curve.domain_lo << ".."
    << curve.domain_hi << '\n'
    << "rms residual " << fixed(curve.rms_residual_N) << " N, max " << fixed(curve.max_residual_N) << " N\n"
    << "wrote " << curve_path.string() << '\n';
  emit(g, j, t.str());
  return kExitOk;
}

std::string stats_text(const stats::StatsReport& r) {
  std::ostringstream t;
  t << "Mann-Whitney U (" << to_string(r.method) << "), n1=" << r.n1 << " n2=" << r.n2 << '\n'
    << "U = " << format_real(r.U) << ", z = " << fixed(r.z) << '\n'
    << "p two-tailed = " << fixed(r.p_two_tailed) << ", p one-tailed (" << to_string(r.alternative)
    << ") = " << fixed(r.p_one_tailed) << '\n'
    << "r = " << fixed(r.r_effect, 3) << ", medians " << fixed(r.median1_N) << " / " << fixed(r.median2_N) << " N\n"
    << "cohen's d = " << (std::isfinite(r.cohens_d) ? fixed(r.cohens_d, 3) : "n/a") << ", power = "
    << (std::isfinite(r.power) ? fixed(r.power, 3) : "n/a") << " (alpha " << r.alpha << ", " << r.power_tails
    << "-tailed)\n";
  return t.str();
}

int cmd_stats(const Globals& g, const std::string& a_path, const std::string& b_path,
              const stats::MannWhitneyOptions& opt) {
  auto a_in = open_in(a_path);
  auto b_in = open_in(b_path);
  const auto a = stats::read_sample_csv(a_in);
  const auto b = stats::read_sample_csv(b_in);
  const auto report = stats::mann_whitney(a, b, opt);
  emit(g, stats::to_json(report), stats_text(report));
  return kExitOk;
}

enum class Controller { Perfect, Zero, Bot };

int cmd_play_bot(const Globals& g, Settings& s, const std::string& controller_name) {
  Controller controller;
  if (controller_name == "perfect") controller = Controller::Perfect;
  else if (controller_name == "zero") controller = Controller::Zero;
  else if (controller_name == "bot") controller = Controller::Bot;
  else throw Error(ErrorCode::InvalidInput, "controller must be perfect, zero or bot");

  const auto& cfg = s.server.protocol.game;
  const std::uint64_t game_seed = derive_seed(g.seed, 0x67616d65);
  auto state = new_game(game_seed, cfg);
  BotParticipant bot(s.bot, derive_seed(g.seed, 0x626f74));
  const PhaseStep round{PhaseKind::GameRound, 0.0, 0, 0.0, true};
  std::vector<TraceSample> trace;
  const std::uint64_t max_ticks = static_cast<std::uint64_t>(cfg.tick_hz) * 3600;
  while (!state.finished && state.ticks < max_ticks) {
    double force = 0.0;
    if (controller == Controller::Perfect) {
      force = state.next_coin_level_N.value_or(0.0);
    } else if (controller == Controller::Bot) {
      RunnerView v;
      v.phase = &round;
      v.game = &state;
      force = bot.force(v, state.t_s).value_or(0.0);
    }
    trace.push_back({state.t_s, force});
    tick(state, cfg, force);
  }
  std::ostringstream csv;
  write_trace_csv(csv, trace);
  const auto trace_path = out_path(g, "trace.csv");
  write_text(trace_path, csv.str());

  json j{{"controller", controller_name}, {"game_seed", game_seed}, {"score", state.score},
         {"collected", state.collected},  {"coins", state.coins.size()}, {"duration_s", state.t_s},
         {"trace", trace_path.string()}};
  std::ostringstream t;
  t << controller_name << " controller: score " << state.score << " (" << state.collected << "/" << state.coins.size()
    << " coins) in " << fixed(state.t_s, 2) << " s\n"
    << "game seed " << game_seed << ", trace " << trace_path.string() << '\n';
  emit(g, j, t.str());
  return kExitOk;
}

int cmd_replay(const Globals& g, Settings& s, const std::string& trace_path, std::uint64_t game_seed) {
  auto is = open_in(trace_path);
  const auto trace = read_trace_csv(is);
  const auto out = replay(game_seed, s.server.protocol.game, trace);
  json j{{"game_seed", game_seed},
         {"score", out.state.score},
         {"collected", out.state.collected},
         {"finished", out.state.finished},
         {"ticks", out.state.ticks}};
  std::ostringstream t;
  t << "replayed " << trace.size() << " samples: score " << out.state.score << " (" << out.state.collected
    << " coins)" << (out.state.finished ? "" : ", run not finished") << '\n';
  emit(g, j, t.str());
  return kExitOk;
}

int cmd_simulate(const Globals& g, Settings& s, int n, int reps, bool identical, bool write_sessions) {
  const CohortConfig cohort = identical ? CohortConfig{s.cohort.app, s.cohort.app} : s.cohort;
  const auto& protocol = s.server.protocol;
  if (reps > 1) {
    const auto mc = monte_carlo(n, reps, g.seed, cohort, protocol);
    const double analytic = stats::power_two_sample(std::max(0.0, mc.mean_cohens_d), n);
    json j{{"n_per_group", n},
           {"replications", mc.replications},
           {"rejections", mc.rejections},
           {"rejection_rate", mc.rejection_rate},
           {"mean_cohens_d", mc.mean_cohens_d},
           {"analytic_power_at_mean_d", analytic}};
    std::ostringstream t;
    t << reps << " experiments, n=" << n << " per group: rejected H0 in " << mc.rejections << " ("
      << fixed(mc.rejection_rate, 3) << ")\n"
      << "mean d = " << fixed(mc.mean_cohens_d, 3) << ", analytic power at that d = " << fixed(analytic, 3) << '\n';
    emit(g, j, t.str());
    return kExitOk;
  }

  stats::MannWhitneyOptions mw;
  const auto exp = simulate_experiment(n, g.seed, cohort, protocol, mw, true);
  std::vector<std::string> files;
  if (write_sessions) {
    std::ostringstream all;
    all << "participant,group,target_N,mu_N,delta_N\n";
    for (const auto& session : exp.sessions) {
      const auto p = out_path(g, session.participant_id + ".json");
      write_text(p, to_json(session).dump() + "\n");
      files.push_back(p.string());
      std::ostringstream one;
      write_session_csv(one, session);
      const auto rows = one.str();
      all << rows.substr(rows.find('\n') + 1);
    }
    const auto p = out_path(g, "sessions.csv");
    write_text(p, all.str());
    files.push_back(p.string());
  }
  json j{{"n_per_group", n},
         {"seed", g.seed},
         {"game_scores", exp.game_scores},
         {"app_scores", exp.app_scores},
         {"report", stats::to_json(exp.report)},
         {"files", files}};
  emit(g, j, stats_text(exp.report) + (write_sessions ? "wrote " + std::to_string(files.size()) + " files\n" : ""));
  return kExitOk;
}

int cmd_serve(Settings& s) {
  gateway::Server server(s.server);
  server.start();
  std::cout << "listening on " << s.server.address << ":" << server.port() << " (" << s.server.tick_hz
            << " Hz, data in " << s.server.data_dir << ")" << std::endl;
  boost::asio::io_context signals_io;
  boost::asio::signal_set signals(signals_io, SIGINT, SIGTERM);
  signals.async_wait([](const boost::system::error_code&, int) {});
  signals_io.run();
  server.stop();
  std::cout << "stopped" << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Force-training toolkit: sensor calibration, game and session bots, statistics, gateway"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--config", g.config_path, "key = value config file");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
  app.add_flag("--json", g.json_output, "machine-readable output");

  std::string category = "small";
  auto* calibrate = app.add_subcommand("calibrate", "run the stepped-load schedule on a simulated rig and fit");
  calibrate->add_option("--category", category, "small or medium")->capture_default_str();

  std::string points_in;
  int degree = 5;
  auto* fit = app.add_subcommand("fit", "fit a polynomial to calibration points");
  fit->add_option("--in", points_in, "points CSV (counts,force_N[,repeat,category])")->required();
  fit->add_option("--degree", degree, "polynomial degree")->capture_default_str();

  std::string a_path, b_path;
  stats::MannWhitneyOptions mw;
  bool approx = false;
  bool greater = false;
  auto* st = app.add_subcommand("stats", "Mann-Whitney U test and power for two samples");
  st->add_option("--a", a_path, "first sample CSV")->required();
  st->add_option("--b", b_path, "second sample CSV")->required();
  st->add_flag("--approx", approx, "always use the normal approximation");
  st->add_flag("--continuity", mw.continuity_correction, "continuity correction");
  st->add_flag("--tie-exact", mw.tie_aware_exact, "exact p with ties");
  st->add_flag("--greater", greater, "one-tailed alternative: a tends to be larger");
  st->add_option("--alpha", mw.power.alpha, "significance level")->capture_default_str();
  st->add_option("--tails", mw.power.tails, "tails for the power analysis")->capture_default_str();

  std::string controller = "perfect";
  auto* play = app.add_subcommand("play-bot", "play one game round with a scripted controller");
  play->add_option("--controller", controller, "perfect, zero or bot")->capture_default_str();

  std::string trace_path;
  std::uint64_t game_seed = 0;
  auto* rep = app.add_subcommand("replay", "re-run a recorded input trace");
  rep->add_option("--trace", trace_path, "trace CSV (t_s,force_N)")->required();
  rep->add_option("--game-seed", game_seed, "seed of the recorded round")->required();

  int n = 15;
  int reps = 1;
  bool identical = false;
  bool no_sessions = false;
  auto* sim = app.add_subcommand("simulate-experiment", "bot cohorts through the protocol, then the statistics");
  sim->add_option("--n", n, "participants per group")->capture_default_str();
  sim->add_option("--reps", reps, "replications; more than one runs a Monte-Carlo power check")
      ->capture_default_str();
  sim->add_flag("--identical", identical, "give both groups the app-trained population");
  sim->add_flag("--no-sessions", no_sessions, "skip writing session files");

  int port = -1;
  auto* serve = app.add_subcommand("serve", "run the gateway until interrupted");
  serve->add_option("--port", port, "listen port");

  auto* print_config = app.add_subcommand("print-config", "print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    Settings s;
    auto schema = s.schema();
    if (!g.config_path.empty()) {
      auto is = open_in(g.config_path);
      schema.apply(is, g.config_path);
    }
    // Flags override the config file.
    if (app.get_option("--seed")->count()) s.server.source.seed = g.seed;
    if (app.get_option("--out")->count() && serve->parsed()) s.server.data_dir = g.out_dir;
    if (port >= 0) s.server.port = port;
    mw.exact = !approx;
    mw.alternative = greater ? stats::Alternative::Greater : stats::Alternative::Less;

    if (calibrate->parsed()) return cmd_calibrate(g, s, category);
    if (fit->parsed()) return cmd_fit(g, points_in, degree);
    if (st->parsed()) return cmd_stats(g, a_path, b_path, mw);
    if (play->parsed()) return cmd_play_bot(g, s, controller);
    if (rep->parsed()) return cmd_replay(g, s, trace_path, game_seed);
    if (sim->parsed()) return cmd_simulate(g, s, n, reps, identical, !no_sessions);
    if (serve->parsed()) return cmd_serve(s);
    if (print_config->parsed()) {
      std::cout << schema.describe();
      return kExitOk;
    }
    return kExitInvalid;
  } catch (const Error& e) {
    const bool runtime = e.code() == ErrorCode::TrialAborted || e.code() == ErrorCode::SourceFailure;
    if (g.json_output)
      std::cout << json{{"error", to_string(e.code())}, {"message", e.message()}}.dump() << '\n';
    std::cerr << "error: " << e.what() << '\n';
    return runtime ? kExitAbort : kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAbort;
  }
}
