#pragma once

// Stepped-load calibration and the counts -> Newtons polynomial fit.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "presstrain/error.hpp"
#include "presstrain/fsr_model.hpp"

namespace presstrain {

struct CalibrationPoint {
  int counts = 0;
  double force_N = 0.0;
  int repeat = 0;
};

/// Polynomial F(counts). Evaluated in the scaled variable x = counts / scale;
/// `coefficients` is the same polynomial expressed in raw counts.
struct CalibrationCurve {
  SensorCategory category = SensorCategory::Small;
  int degree = 5;
  double scale = kAdcMaxCounts;
  std::vector<double> scaled_coefficients;  // s0..sN, ascending powers of x
  std::vector<double> coefficients;         // c0..cN, ascending powers of counts
  int domain_lo = 0;
  int domain_hi = kAdcMaxCounts;
  double rms_residual_N = 0.0;
  double max_residual_N = 0.0;
};

struct ForceEstimate {
  double force_N = 0.0;
  bool out_of_domain = false;
};

inline double evaluate_scaled(const CalibrationCurve& curve, double x) {
  double acc = 0.0;
  for (auto it = curve.scaled_coefficients.rbegin(); it != curve.scaled_coefficients.rend(); ++it)
    acc = acc * x + *it;
  return acc;
}

inline ForceEstimate estimate_force(const CalibrationCurve& curve, double counts) {
  ForceEstimate e;
  double c = counts;
  if (c < curve.domain_lo) {
    c = curve.domain_lo;
    e.out_of_domain = true;
  } else if (c > curve.domain_hi) {
    c = curve.domain_hi;
    e.out_of_domain = true;
  }
  e.force_N = evaluate_scaled(curve, c / curve.scale);
  return e;
}

inline ForceEstimate estimate_force(const CalibrationCurve& curve, int counts) {
  return estimate_force(curve, static_cast<double>(counts));
}

struct ResidualReport {
  double rms_N = 0.0;
  double max_N = 0.0;
  std::vector<double> per_point;  // estimate - reference
};

inline ResidualReport residual_report(const CalibrationCurve& curve,
                                      std::span<const CalibrationPoint> points) {
  ResidualReport r;
  r.per_point.reserve(points.size());
  double sq = 0.0;
  for (const auto& p : points) {
    const double res = estimate_force(curve, p.counts).force_N - p.force_N;
    r.per_point.push_back(res);
    sq += res * res;
    r.max_N = std::max(r.max_N, std::abs(res));
  }
  if (!points.empty()) r.rms_N = std::sqrt(sq / static_cast<double>(points.size()));
  return r;
}

inline void validate_points(std::span<const CalibrationPoint> points) {
  for (const auto& p : points) {
    if (p.counts < 0 || p.counts > kAdcMaxCounts)
      throw Error(ErrorCode::InvalidData, "counts " + std::to_string(p.counts) + " outside 0..1023");
    if (!std::isfinite(p.force_N) || p.force_N < 0.0)
      throw Error(ErrorCode::InvalidData, "reference force must be finite and non-negative");
  }
}

/// Least-squares polynomial fit on the monomial basis of counts / 1023,
/// solved by column-pivoted Householder QR.
inline CalibrationCurve fit_polynomial(std::span<const CalibrationPoint> points, int degree,
                                       SensorCategory category = SensorCategory::Small) {
  if (degree < 1 || degree > 9)
    throw Error(ErrorCode::InvalidInput, "degree must be within 1..9");
  validate_points(points);
  const auto terms = static_cast<std::size_t>(degree) + 1;
  std::set<int> distinct;
  for (const auto& p : points) distinct.insert(p.counts);
  if (distinct.size() < terms)
    throw Error(ErrorCode::RankDeficient, "need at least " + std::to_string(terms) +
                                              " distinct counts values, got " +
                                              std::to_string(distinct.size()));

  CalibrationCurve curve;
  curve.category = category;
  curve.degree = degree;
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto m = static_cast<Eigen::Index>(terms);
  Eigen::MatrixXd design(n, m);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    const double x = p.counts / curve.scale;
    double power = 1.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      design(i, j) = power;
      power *= x;
    }
    rhs(i) = p.force_N;
  }
  const Eigen::VectorXd solution = design.colPivHouseholderQr().solve(rhs);

  curve.scaled_coefficients.resize(terms);
  curve.coefficients.resize(terms);
  for (std::size_t j = 0; j < terms; ++j) {
    curve.scaled_coefficients[j] = solution(static_cast<Eigen::Index>(j));
    curve.coefficients[j] = curve.scaled_coefficients[j] / std::pow(curve.scale, static_cast<double>(j));
  }
  curve.domain_lo = *distinct.begin();
  curve.domain_hi = *distinct.rbegin();
  const auto report = residual_report(curve, points);
  curve.rms_residual_N = report.rms_N;
  curve.max_residual_N = report.max_N;
  return curve;
}

inline CalibrationCurve fit_quintic(std::span<const CalibrationPoint> points,
                                    SensorCategory category = SensorCategory::Small) {
  return fit_polynomial(points, 5, category);
}

// ---------------------------------------------------------------------------
// Stepped-load schedule.

/// Anything that can press a sensor with a commanded force and report both
/// the sensor's counts and the reference gauge.
template <class R>
concept CalibrationRig = requires(R rig, double force, double dt) {
  { rig.apply(force, dt) } -> std::convertible_to<int>;
  { rig.reference_force_N() } -> std::convertible_to<double>;
  { rig.max_force_N() } -> std::convertible_to<double>;
};

struct ScheduleConfig {
  int step_counts = 50;
  int repeats = 5;
  double hold_s = 5.0;
  double rest_s = 2.0;
  double dt_s = 0.01;
  double record_from_s = 1.0;
  double record_to_s = 2.0;
  double integral_gain = 0.15;  // N per (count * s)
  int settle_tolerance_counts = 5;
};

inline int schedule_top_counts(SensorCategory c) {
  switch (c) {
    case SensorCategory::Small: return 550;
    case SensorCategory::Medium: return 750;
    case SensorCategory::Large: break;
  }
  throw Error(ErrorCode::InvalidInput, "large sensors are presence indicators and are not calibrated");
}

inline std::vector<int> schedule_steps(SensorCategory c, int step_counts = 50) {
  const int top = schedule_top_counts(c);
  std::vector<int> steps;
  for (int t = step_counts; t <= top; t += step_counts) steps.push_back(t);
  return steps;
}

struct ScheduleResult {
  std::vector<CalibrationPoint> points;
  bool truncated = false;
  std::vector<std::string> warnings;
};

/// Drives the rig through press/release cycles at each target level. During
/// a press an integral controller on the counts error moves the load; the
/// pair is averaged over [record_from_s, record_to_s) of the hold.
template <CalibrationRig Rig>
ScheduleResult run_schedule(Rig& rig, SensorCategory category, const ScheduleConfig& cfg = {}) {
  const auto steps = schedule_steps(category, cfg.step_counts);
  ScheduleResult result;
  const auto ticks = static_cast<int>(std::lround(cfg.hold_s / cfg.dt_s));
  const auto rest_ticks = static_cast<int>(std::lround(cfg.rest_s / cfg.dt_s));
  const auto rec_from = static_cast<int>(std::lround(cfg.record_from_s / cfg.dt_s));
  const auto rec_to = static_cast<int>(std::lround(cfg.record_to_s / cfg.dt_s));
  const double max_force = rig.max_force_N();

  double last_force = 0.0;
  int last_counts = 0;
  for (int target : steps) {
    for (int rep = 0; rep < cfg.repeats; ++rep) {
      double force = last_counts > 0 ? last_force * target / last_counts : 0.0;
      force = std::clamp(force, 0.0, max_force);
      double sum_counts = 0.0;
      double sum_ref = 0.0;
      int recorded = 0;
      for (int k = 0; k < ticks; ++k) {
        const int counts = rig.apply(force, cfg.dt_s);
        if (k >= rec_from && k < rec_to) {
          sum_counts += counts;
          sum_ref += rig.reference_force_N();
          ++recorded;
        }
        force = std::clamp(force + cfg.integral_gain * (target - counts) * cfg.dt_s, 0.0, max_force);
      }
      for (int k = 0; k < rest_ticks; ++k) rig.apply(0.0, cfg.dt_s);

      const double mean_counts = recorded ? sum_counts / recorded : 0.0;
      const double mean_ref = recorded ? sum_ref / recorded : 0.0;
      if (force >= max_force && mean_counts < target - cfg.settle_tolerance_counts) {
        result.truncated = true;
        result.warnings.push_back("sensor saturated before reaching " + std::to_string(target) +
                                  " counts; schedule truncated");
        return result;
      }
      CalibrationPoint p;
      p.counts = static_cast<int>(std::lround(mean_counts));
      p.force_N = mean_ref;
      p.repeat = rep;
      result.points.push_back(p);
      last_force = mean_ref;
      last_counts = p.counts;
    }
  }
  return result;
}

/// Simulated stand: an FSR channel under an ideal reference gauge.
class SimulatedRig {
 public:
  explicit SimulatedRig(FsrSensor sensor, double max_force_N = 100.0)
      : sensor_(std::move(sensor)), max_force_(max_force_N) {}

  int apply(double force_N, double dt_s) {
    reference_ = force_N;
    return sensor_.step(force_N, dt_s);
  }
  double reference_force_N() const { return reference_; }
  double max_force_N() const { return max_force_; }
  FsrSensor& sensor() { return sensor_; }

 private:
  FsrSensor sensor_;
  double max_force_;
  double reference_ = 0.0;
};

static_assert(CalibrationRig<SimulatedRig>);

}  // namespace presstrain
