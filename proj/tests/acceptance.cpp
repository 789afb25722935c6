// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "oracles.hpp"
#include "presstrain/calib.hpp"
#include "presstrain/experiment.hpp"
#include "presstrain/fsr_model.hpp"
#include "presstrain/game.hpp"
#include "presstrain/game_io.hpp"
#include "presstrain/glovewire.hpp"
#include "presstrain/stats.hpp"

using namespace presstrain;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome voltage_divider_values() {
  Outcome o;
  auto spec = SensorSpec::of(SensorCategory::Small);
  const double inf = std::numeric_limits<double>::infinity();
  const double v_inf = voltage_divider(inf, spec);
  const double v_half = voltage_divider(spec.r_measure_ohm, spec);
  spec.r_measure_ohm = 10000.0;
  spec.v_ref_volt = 5.0;
  const double v_30k = voltage_divider(30000.0, spec);
  o.require(std::abs(v_inf) <= 1e-12, "0 V at infinite resistance");
  o.require(std::abs(v_half - 2.5) <= 1e-12, "V_ref/2 at R_FSR = R_M");
  o.require(std::abs(v_30k - 1.25) <= 1e-12, "1.25 V for 30k/10k/5 V");
  o.note("V(inf)=" + fmt("%.3g", v_inf) + " V(R_M)=" + fmt("%.15g", v_half) + " V(30k)=" + fmt("%.15g", v_30k));
  return o;
}

Outcome quintic_fit() {
  Outcome o;
  const std::vector<double> gen{2.0, 8.0, -3.0, 4.5, -2.5, 1.2};
  const auto g = [&](double x) {
    double acc = 0.0;
    for (std::size_t j = gen.size(); j-- > 0;) acc = acc * x + gen[j];
    return acc;
  };
  std::vector<CalibrationPoint> exact;
  for (int i = 0; i < 30; ++i) {
    const int c = 10 + 33 * i;
    exact.push_back({c, g(c / 1023.0), 0});
  }
  const auto curve = fit_quintic(exact);
  double worst_rel = 0.0;
  for (std::size_t j = 0; j < gen.size(); ++j)
    worst_rel = std::max(worst_rel, std::abs(curve.scaled_coefficients[j] - gen[j]) / std::abs(gen[j]));
  o.require(worst_rel <= 1e-6, "generator recovery within 1e-6 relative");

  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<CalibrationPoint> noisy;
  std::vector<std::pair<long double, long double>> xy;
  for (int rep = 0; rep < 3; ++rep)
    for (int i = 0; i < 30; ++i) {
      const int c = 10 + 33 * i;
      const double f = g(c / 1023.0) + noise(rng);
      noisy.push_back({c, f, rep});
      xy.emplace_back(static_cast<long double>(c) / 1023.0L, f);
    }
  const auto lib = fit_quintic(noisy);
  const auto ref = oracle::normal_equations_fit(xy, 5);
  double worst_resid = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double x = noisy[i].counts / 1023.0;
    const double r_lib = noisy[i].force_N - evaluate_scaled(lib, x);
    const auto r_ref = static_cast<double>(xy[i].second - oracle::poly(ref, xy[i].first));
    worst_resid = std::max(worst_resid, std::abs(r_lib - r_ref));
  }
  o.require(worst_resid <= 1e-8, "residuals agree with the oracle within 1e-8");
  o.note("max coefficient rel err " + fmt("%.2e", worst_rel) + ", max residual diff " + fmt("%.2e", worst_resid));
  return o;
}

// Two samples of 15 with no ties whose U for the first sample is `u`.
std::pair<std::vector<double>, std::vector<double>> samples_with_u(int u) {
  std::vector<int> ranks(15);
  std::iota(ranks.begin(), ranks.end(), 1);
  int need = u;
  for (int i = 14; i >= 0 && need > 0; --i) {
    const int ceiling = 30 - (14 - i);
    const int step = std::min(need, ceiling - ranks[static_cast<std::size_t>(i)]);
    ranks[static_cast<std::size_t>(i)] += step;
    need -= step;
  }
  std::vector<double> a, b;
  for (int r = 1; r <= 30; ++r) {
    const bool in_a = std::find(ranks.begin(), ranks.end(), r) != ranks.end();
    (in_a ? a : b).push_back(0.1 * r + 0.5);
  }
  return {a, b};
}

Outcome mann_whitney_reported_value() {
  Outcome o;
  const auto [a, b] = samples_with_u(61);
  const auto r = stats::mann_whitney(a, b);
  o.require(r.U == 61.0, "U = 61");
  o.require(!r.tie_correction_applied && !r.continuity_correction, "no ties and no continuity correction");
  o.require(std::abs(r.z - (-2.136)) <= 0.005, "z = -2.136 +- 0.005");
  o.require(std::abs(r.p_two_tailed - 0.0327) <= 5e-4 && r.p_two_tailed < 0.05, "two-tailed p = 0.0327 < 0.05");
  o.note("U=" + fmt("%.0f", r.U) + " z=" + fmt("%.4f", r.z) + " p=" + fmt("%.4f", r.p_two_tailed));
  return o;
}

Outcome exact_vs_enumeration() {
  Outcome o;
  double worst = 0.0;
  int cases = 0;
  for (int n1 = 1; n1 <= 6; ++n1)
    for (int n2 = 1; n2 <= 6; ++n2)
      for (int u = 0; u <= n1 * n2; ++u) {
        worst = std::max(worst, std::abs(stats::exact_mw_p(u, n1, n2) - oracle::enumerate_mw_lower_tail(n1, n2, u)));
        ++cases;
      }
  o.require(worst <= 1e-12, "exact p equals enumeration");
  o.note(std::to_string(cases) + " (n1, n2, U) cases, max diff " + fmt("%.1e", worst));
  return o;
}

Outcome power_reproduction() {
  Outcome o;
  const double p15 = stats::power_two_sample(0.85, 15);
  const double p18 = stats::power_two_sample(0.85, 18);
  o.require(std::abs(p15 - 0.74) <= 0.03, "power at n=15 is 0.74 +- 0.03");
  o.require(p18 >= 0.80, "power at n=18 reaches 0.80");
  o.note("n=15: " + fmt("%.4f", p15) + ", n=18: " + fmt("%.4f", p18));
  return o;
}

bool steady_hit(double force, double level) {
  GameConfig cfg;
  auto s = new_game(1, cfg);
  s.coins = {Coin{20.0, level, 0, false}};
  s.next_coin_level_N = level;
  while (!s.finished) tick(s, cfg, force);
  return s.collected == 1;
}

Outcome game_mechanics() {
  Outcome o;
  const GameConfig cfg;

  bool band_ok = true;
  for (double level : cfg.force_levels_N) {
    band_ok = band_ok && in_collision_band(level + 0.25, level, 0.25) && in_collision_band(level - 0.25, level, 0.25);
    band_ok = band_ok && !in_collision_band(level + 0.2501, level, 0.25) && !in_collision_band(level - 0.2501, level, 0.25);
    band_ok = band_ok && steady_hit(level + 0.25, level) && steady_hit(level - 0.25, level);
    band_ok = band_ok && !steady_hit(level + 0.26, level) && !steady_hit(level - 0.26, level);
  }
  o.require(band_ok, "collision iff |alt - level| <= 0.25 N");

  const std::set<double> allowed(cfg.force_levels_N.begin(), cfg.force_levels_N.end());
  int lo = 1 << 30, hi = 0;
  bool levels_ok = true, counts_ok = true;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto s = new_game(seed, cfg);
    const auto counts = segment_coin_counts(s);
    counts_ok = counts_ok && counts.size() == static_cast<std::size_t>(cfg.segments);
    for (int c : counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    for (const auto& c : s.coins) levels_ok = levels_ok && allowed.count(c.level_N) == 1;
  }
  o.require(counts_ok && lo >= 5 && hi <= 15, "coin counts within [5, 15]");
  o.require(levels_ok, "levels drawn from {2, 3, 5} N");

  bool clamp_ok = true;
  {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> f(-50.0, 500.0);
    auto s = new_game(3, cfg);
    while (!s.finished) {
      tick(s, cfg, f(rng));
      clamp_ok = clamp_ok && s.bird_force_alt_N >= 0.0 && s.bird_force_alt_N <= 10.0 && s.raw_force_N <= 10.0;
    }
    auto t = new_game(3, cfg);
    tick(t, cfg, 1e9);
    clamp_ok = clamp_ok && t.raw_force_N == 10.0;
  }
  o.require(clamp_ok, "altitude clamped at 10 N");

  bool score_ok = true, replay_ok = true;
  std::mt19937_64 rng(8);
  for (int round = 0; round < 200; ++round) {
    const std::uint64_t seed = rng();
    auto s = new_game(seed, cfg);
    std::vector<TraceSample> trace;
    std::vector<GameEvent> events;
    std::normal_distribution<double> noise(0.0, 0.2);
    while (!s.finished) {
      const double f = s.next_coin_level_N.value_or(0.0) + noise(rng);
      trace.push_back({s.t_s, f});
      auto ev = tick(s, cfg, f);
      events.insert(events.end(), ev.begin(), ev.end());
    }
    score_ok = score_ok && s.score == 100 * s.collected && score(s, cfg) == s.score;
    std::stringstream csv;
    write_trace_csv(csv, trace);
    const auto r = replay(seed, cfg, read_trace_csv(csv));
    replay_ok = replay_ok && r.events == events && r.state.score == s.score &&
                r.state.bird_force_alt_N == s.bird_force_alt_N && r.state.bird_x_units == s.bird_x_units;
  }
  o.require(score_ok, "score = 100 x coins");
  o.require(replay_ok, "seed + trace replay bit-exact");
  o.note("coin counts seen in [" + std::to_string(lo) + ", " + std::to_string(hi) + "] over 10000 seeds, 200 replays");
  return o;
}

Outcome creep_anchor() {
  Outcome o;
  auto model = ArtefactModel::ideal();
  model.creep = true;
  const auto spec = SensorSpec::of(SensorCategory::Small);
  const double dt = 0.1;
  StepResult r{SensorState::seeded(0)};
  std::vector<double> readings;  // readings[k] at t = (k + 1) * dt
  for (int i = 0; i < 6000; ++i) {
    r = step(spec, model, r.state, 5.0, dt);
    readings.push_back(r.state.last_reading_N);
  }
  const double drift_600 = readings.back() - 5.0;
  double worst_window = 0.0;
  const std::size_t window = 100;  // 10 s
  for (std::size_t k = 0; k + window < readings.size(); ++k)
    worst_window = std::max(worst_window, readings[k + window] - readings[k]);
  o.require(std::abs(drift_600 - 2.0) <= 0.05, "drift +2.0 +- 0.05 N at 600 s");
  o.require(worst_window < 0.15, "drift < 0.15 N in any 10 s window");
  o.note("drift at 600 s " + fmt("%.4f", drift_600) + " N, worst 10 s window " + fmt("%.4f", worst_window) + " N");
  return o;
}

Outcome wire_protocol() {
  Outcome o;
  std::mt19937_64 rng(21);
  bool round_ok = true;
  for (int i = 0; i < 10000; ++i) {
    const auto f = gen::frame(rng);
    const auto bytes = encode_frame(f);
    const auto d = decode_stream(bytes);
    round_ok = round_ok && d.frames.size() == 1 && d.frames[0] == f && d.errors.empty() && d.remainder.empty();
  }
  o.require(round_ok, "10^4 round trips exact");

  int flips = 0, detected = 0;
  for (int i = 0; i < 100; ++i) {
    const auto bytes = encode_frame(gen::frame(rng));
    for (std::size_t bit = 0; bit < bytes.size() * 8; ++bit) {
      auto bad = bytes;
      bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      const auto d = decode_stream(bad);
      ++flips;
      if (d.frames.empty() && !d.errors.empty()) ++detected;
    }
  }
  o.require(detected == flips, "every single-bit corruption detected");

  const auto junk = gen::bytes(rng, 1 << 20);
  const auto d = decode_stream(junk);
  o.require(d.consumed + d.remainder.size() == junk.size(), "fuzz consumed + remainder = input length");
  o.note(std::to_string(detected) + "/" + std::to_string(flips) + " flips detected, fuzz yielded " +
         std::to_string(d.frames.size()) + " frames and " + std::to_string(d.errors.size()) + " errors");
  return o;
}

template <class F>
auto timed(F f, double& secs) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = f();
  secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Each 1000-replication run has its own 60 s budget. The true effect is
// estimated from every participant simulated in the effect run.
Outcome monte_carlo_power() {
  Outcome o;
  const ProtocolConfig protocol;
  double effect_s = 0.0, null_s = 0.0;
  const auto effect = timed([&] { return monte_carlo(15, 1000, 202, CohortConfig{}, protocol); }, effect_s);
  const auto null = timed([&] { return monte_carlo(15, 1000, 303, CohortConfig::identical(), protocol); }, null_s);
  const double d = effect.pooled_cohens_d;
  const double analytic = stats::power_two_sample(d, 15);
  o.require(std::abs(effect.rejection_rate - analytic) <= 0.05, "effect rejection rate within 0.05 of analytic power");
  o.require(std::abs(null.rejection_rate - 0.05) <= 0.02, "null rejection rate 0.05 +- 0.02");
  o.require(effect_s < 60.0 && null_s < 60.0, "each 1000-replication run under 60 s");
  o.note("population d " + fmt("%.3f", d) + ", analytic power " + fmt("%.3f", analytic) + ", rejection rate " +
         fmt("%.3f", effect.rejection_rate) + " (" + fmt("%.1f", effect_s) + " s), null rate " +
         fmt("%.3f", null.rejection_rate) + " (" + fmt("%.1f", null_s) + " s)");
  return o;
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"voltage divider", 1.0, voltage_divider_values},
      {"quintic fit", 1.0, quintic_fit},
      {"Mann-Whitney U=61", 1.0, mann_whitney_reported_value},
      {"exact vs enumeration", 10.0, exact_vs_enumeration},
      {"power reproduction", 1.0, power_reproduction},
      {"game mechanics", 30.0, game_mechanics},
      {"creep anchor", 1.0, creep_anchor},
      {"wire protocol", 30.0, wire_protocol},
      {"monte carlo", 120.0, monte_carlo_power},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.limit_s, "runtime under " + fmt("%.0f", c.limit_s) + " s");
    if (!o.pass) ++failures;
    std::printf("%s  %-22s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
