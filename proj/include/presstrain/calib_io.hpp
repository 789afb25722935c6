#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "presstrain/calib.hpp"
#include "presstrain/csv.hpp"

namespace presstrain {

inline void write_points_csv(std::ostream& os, std::span<const CalibrationPoint> points,
                             SensorCategory category) {
  os << "counts,force_N,repeat,category\n";
  for (const auto& p : points)
    os << p.counts << ',' << format_real(p.force_N) << ',' << p.repeat << ',' << to_string(category)
       << '\n';
}

struct PointSet {
  std::vector<CalibrationPoint> points;
  SensorCategory category = SensorCategory::Small;
};

inline PointSet read_points_csv(std::istream& is) {
  PointSet set;
  const auto rows = read_csv(is, {"counts", "force_N"});
  bool have_category = false;
  for (const auto& row : rows.rows) {
    CalibrationPoint p;
    p.counts = parse_int(row.at(rows.column("counts")), "counts");
    p.force_N = parse_real(row.at(rows.column("force_N")), "force_N");
    if (auto c = rows.find_column("repeat")) p.repeat = parse_int(row.at(*c), "repeat");
    if (auto c = rows.find_column("category"); c && !have_category) {
      set.category = category_from_string(row.at(*c));
      have_category = true;
    }
    set.points.push_back(p);
  }
  return set;
}

inline nlohmann::json to_json(const CalibrationCurve& c) {
  return {
      {"category", to_string(c.category)},
      {"degree", c.degree},
      {"scale", c.scale},
      {"coefficients", c.coefficients},
      {"scaled_coefficients", c.scaled_coefficients},
      {"domain_counts", {c.domain_lo, c.domain_hi}},
      {"rms_residual_N", c.rms_residual_N},
      {"max_residual_N", c.max_residual_N},
  };
}

inline CalibrationCurve curve_from_json(const nlohmann::json& j) {
  try {
    CalibrationCurve c;
    c.category = category_from_string(j.at("category").get<std::string>());
    c.degree = j.at("degree").get<int>();
    c.scale = j.value("scale", static_cast<double>(kAdcMaxCounts));
    c.scaled_coefficients = j.at("scaled_coefficients").get<std::vector<double>>();
    c.coefficients = j.value("coefficients", std::vector<double>{});
    c.domain_lo = j.at("domain_counts").at(0).get<int>();
    c.domain_hi = j.at("domain_counts").at(1).get<int>();
    c.rms_residual_N = j.value("rms_residual_N", 0.0);
    c.max_residual_N = j.value("max_residual_N", 0.0);
    if (c.scaled_coefficients.size() != static_cast<std::size_t>(c.degree) + 1)
      throw Error(ErrorCode::InvalidData, "coefficient count does not match degree");
    if (c.domain_lo > c.domain_hi) throw Error(ErrorCode::InvalidData, "empty domain");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidData, std::string("calibration curve: ") + e.what());
  }
}

}  // namespace presstrain
