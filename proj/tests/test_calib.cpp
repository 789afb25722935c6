#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "presstrain/calib.hpp"
#include "presstrain/calib_io.hpp"

using namespace presstrain;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const std::vector<double> kGenerator{1.0, 0.5, 0.0, 0.3, -0.2, 0.1};

double generator(double x) {
  double acc = 0.0;
  for (auto it = kGenerator.rbegin(); it != kGenerator.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<CalibrationPoint> generator_points(int n) {
  std::vector<CalibrationPoint> pts;
  for (int i = 0; i < n; ++i) {
    const int counts = 10 + i * 33;
    pts.push_back({counts, generator(counts / 1023.0), 0});
  }
  return pts;
}

std::vector<CalibrationPoint> noisy_points(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::vector<CalibrationPoint> pts;
  for (int step = 50; step <= 750; step += 50)
    for (int rep = 0; rep < 5; ++rep) {
      const int counts = step + static_cast<int>(rng() % 7) - 3;
      const double x = counts / 1023.0;
      pts.push_back({counts, std::max(0.0, 20.0 * x + 15.0 * x * x * x + noise(rng)), rep});
    }
  return pts;
}

double sse(const std::vector<CalibrationPoint>& pts, const std::vector<double>& scaled) {
  CalibrationCurve c;
  c.scaled_coefficients = scaled;
  double s = 0.0;
  for (const auto& p : pts) {
    const double r = evaluate_scaled(c, p.counts / 1023.0) - p.force_N;
    s += r * r;
  }
  return s;
}

}  // namespace

TEST_CASE("exact linear data fits a pure linear term", "[calib]") {
  std::vector<CalibrationPoint> pts;
  for (int i = 0; i < 20; ++i) {
    const int counts = 20 + 50 * i;
    pts.push_back({counts, 4.0 * counts / 1023.0, 0});
  }
  const auto c = fit_quintic(pts);
  REQUIRE(c.scaled_coefficients.size() == 6);
  CHECK_THAT(c.scaled_coefficients[1], WithinAbs(4.0, 1e-9));
  for (std::size_t j : {0u, 2u, 3u, 4u, 5u}) CHECK(std::abs(c.scaled_coefficients[j]) < 1e-9);
  CHECK(c.rms_residual_N < 1e-12);
}

TEST_CASE("known quintic is recovered from 30 exact samples", "[calib]") {
  const auto pts = generator_points(30);
  const auto c = fit_quintic(pts);
  for (std::size_t j = 0; j < kGenerator.size(); ++j) {
    INFO("coefficient " << j);
    if (kGenerator[j] == 0.0)
      CHECK(std::abs(c.scaled_coefficients[j]) < 1e-6);
    else
      CHECK_THAT(c.scaled_coefficients[j], WithinRel(kGenerator[j], 1e-6));
  }
  for (int counts = c.domain_lo; counts <= c.domain_hi; ++counts)
    REQUIRE_THAT(estimate_force(c, counts).force_N, WithinAbs(generator(counts / 1023.0), 1e-6));
}

TEST_CASE("noisy fit agrees with the long-double normal-equations oracle", "[calib][oracle]") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto pts = noisy_points(seed);
    const auto c = fit_quintic(pts, SensorCategory::Medium);
    std::vector<std::pair<long double, long double>> xy;
    for (const auto& p : pts) xy.emplace_back(p.counts / 1023.0L, p.force_N);
    const auto ref = oracle::normal_equations_fit(xy, 5);
    for (const auto& p : pts) {
      const long double ref_resid = oracle::poly(ref, p.counts / 1023.0L) - p.force_N;
      const double resid = estimate_force(c, p.counts).force_N - p.force_N;
      REQUIRE(std::abs(resid - static_cast<double>(ref_resid)) < 1e-8);
    }
  }
}

TEST_CASE("raw and scaled coefficients describe the same polynomial", "[calib]") {
  const auto c = fit_quintic(noisy_points(7));
  for (int counts = 0; counts <= 1023; counts += 31) {
    double raw = 0.0;
    for (std::size_t j = c.coefficients.size(); j-- > 0;) raw = raw * counts + c.coefficients[j];
    CHECK_THAT(raw, WithinAbs(evaluate_scaled(c, counts / 1023.0), 1e-9));
  }
}

TEST_CASE("fit errors", "[calib]") {
  std::vector<CalibrationPoint> five;
  for (int i = 0; i < 25; ++i) five.push_back({100 * (i % 5 + 1), 1.0 * i, 0});
  try {
    fit_quintic(five);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
  auto bad = generator_points(10);
  bad[3].force_N = std::nan("");
  try {
    fit_quintic(bad);
    FAIL("expected InvalidData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidData);
  }
  bad = generator_points(10);
  bad[0].counts = 2000;
  CHECK_THROWS_AS(fit_quintic(bad), Error);
}

TEST_CASE("estimate_force clamps outside the domain", "[calib]") {
  auto c = fit_quintic(generator_points(30));
  const auto inside = estimate_force(c, 500);
  CHECK_FALSE(inside.out_of_domain);
  const auto below = estimate_force(c, 0);
  CHECK(below.out_of_domain);
  CHECK(below.force_N == estimate_force(c, c.domain_lo).force_N);
  const auto above = estimate_force(c, 1023);
  CHECK(above.out_of_domain);
  CHECK(above.force_N == estimate_force(c, c.domain_hi).force_N);

  CalibrationCurve zero;
  zero.scaled_coefficients = {0.0, 3.0, 1.0, 0.0, 0.0, 0.0};
  zero.domain_lo = 0;
  CHECK(estimate_force(zero, 0).force_N == 0.0);
}

TEST_CASE("exact data interpolates its calibration points", "[calib]") {
  const auto pts = generator_points(30);
  const auto c = fit_quintic(pts);
  for (const auto& p : pts) CHECK_THAT(estimate_force(c, p.counts).force_N, WithinAbs(p.force_N, 1e-9));
  CHECK(c.rms_residual_N < 1e-9);
}

TEST_CASE("residual report", "[calib]") {
  auto pts = generator_points(30);
  const auto clean = fit_quintic(pts);
  auto with_outlier = pts;
  with_outlier[12].force_N += 1.0;
  const auto rep = residual_report(clean, with_outlier);
  CHECK_THAT(rep.max_N, WithinAbs(1.0, 1e-9));

  const auto c = fit_quintic(noisy_points(5));
  const auto pts2 = noisy_points(5);
  const auto r = residual_report(c, pts2);
  double sq = 0.0, mx = 0.0;
  for (const auto& p : pts2) {
    double v = 0.0;
    for (std::size_t j = c.scaled_coefficients.size(); j-- > 0;) v = v * (p.counts / 1023.0) + c.scaled_coefficients[j];
    sq += (v - p.force_N) * (v - p.force_N);
    mx = std::max(mx, std::abs(v - p.force_N));
  }
  CHECK_THAT(r.rms_N, WithinRel(std::sqrt(sq / pts2.size()), 1e-12));
  CHECK_THAT(r.max_N, WithinRel(mx, 1e-12));
  CHECK(c.rms_residual_N <= c.max_residual_N);
}

TEST_CASE("least-squares optimality against random candidates", "[calib][property]") {
  const auto pts = noisy_points(11);
  const auto c = fit_quintic(pts);
  const double best = sse(pts, c.scaled_coefficients);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    auto cand = c.scaled_coefficients;
    const double scale = std::pow(10.0, -static_cast<double>(rng() % 6));
    for (auto& x : cand) x += scale * d(rng);
    REQUIRE(sse(pts, cand) >= best * (1.0 - 1e-12));
  }
}

TEST_CASE("fit is invariant under point reordering", "[calib][property]") {
  auto pts = noisy_points(13);
  const auto a = fit_quintic(pts);
  std::mt19937_64 rng(14);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto b = fit_quintic(pts);
    for (int counts = a.domain_lo; counts <= a.domain_hi; counts += 17)
      REQUIRE_THAT(estimate_force(b, counts).force_N,
                   WithinRel(estimate_force(a, counts).force_N, 1e-9) || WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("schedule levels per category", "[calib][schedule]") {
  CHECK(schedule_steps(SensorCategory::Small).size() == 11);
  CHECK(schedule_steps(SensorCategory::Small).back() == 550);
  CHECK(schedule_steps(SensorCategory::Medium).size() == 15);
  CHECK(schedule_steps(SensorCategory::Medium).back() == 750);
  CHECK_THROWS_AS(schedule_steps(SensorCategory::Large), Error);
}

TEST_CASE("simulated schedule reaches every level and fits well", "[calib][schedule]") {
  for (auto cat : {SensorCategory::Small, SensorCategory::Medium}) {
    SimulatedRig rig(FsrSensor(SensorSpec::of(cat), ArtefactModel{}, 21));
    const auto res = run_schedule(rig, cat);
    INFO(to_string(cat));
    CHECK_FALSE(res.truncated);
    REQUIRE(res.points.size() == schedule_steps(cat).size() * 5);
    for (std::size_t i = 0; i < res.points.size(); ++i) {
      const int target = schedule_steps(cat)[i / 5];
      CHECK(std::abs(res.points[i].counts - target) <= 5);
      CHECK(res.points[i].repeat == static_cast<int>(i % 5));
    }
    const auto curve = fit_quintic(res.points, cat);
    CHECK(curve.rms_residual_N < 0.1);
  }
}

TEST_CASE("schedule truncates when the rig cannot reach a level", "[calib][schedule]") {
  SimulatedRig rig(FsrSensor(SensorSpec::of(SensorCategory::Small), ArtefactModel::ideal(), 1), 3.0);
  const auto res = run_schedule(rig, SensorCategory::Small);
  CHECK(res.truncated);
  CHECK_FALSE(res.warnings.empty());
  CHECK(res.points.size() < 55);
  for (const auto& p : res.points) CHECK(p.force_N <= 3.0);
}

TEST_CASE("points csv and curve json round trip", "[calib][io]") {
  const auto pts = noisy_points(31);
  std::stringstream ss;
  write_points_csv(ss, pts, SensorCategory::Medium);
  CHECK(ss.str().rfind("counts,force_N,repeat,category\n", 0) == 0);
  const auto back = read_points_csv(ss);
  CHECK(back.category == SensorCategory::Medium);
  REQUIRE(back.points.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(back.points[i].counts == pts[i].counts);
    CHECK(back.points[i].force_N == pts[i].force_N);
    CHECK(back.points[i].repeat == pts[i].repeat);
  }

  const auto c = fit_quintic(pts, SensorCategory::Medium);
  const auto c2 = curve_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(c2.scaled_coefficients == c.scaled_coefficients);
  CHECK(c2.domain_lo == c.domain_lo);
  CHECK(c2.domain_hi == c.domain_hi);
  CHECK(c2.category == c.category);
  CHECK_THROWS_AS(curve_from_json(nlohmann::json::parse(R"({"category":"small"})")), Error);
}
