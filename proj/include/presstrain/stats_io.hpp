#pragma once

#include <cmath>
#include <istream>
#include <map>
#include <vector>

#include <json.hpp>

#include "presstrain/csv.hpp"
#include "presstrain/stats.hpp"

namespace presstrain::stats {

namespace detail {
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
}  // namespace detail

inline nlohmann::json to_json(const StatsReport& r) {
  using detail::finite_or_null;
  return {
      {"n1", r.n1},
      {"n2", r.n2},
      {"U", r.U},
      {"U_b", r.U_b},
      {"z", finite_or_null(r.z)},
      {"p_two_tailed", r.p_two_tailed},
      {"p_one_tailed", r.p_one_tailed},
      {"one_tailed_alternative", to_string(r.alternative)},
      {"r_effect", finite_or_null(r.r_effect)},
      {"median1_N", r.median1_N},
      {"median2_N", r.median2_N},
      {"cohens_d", finite_or_null(r.cohens_d)},
      {"power", finite_or_null(r.power)},
      {"alpha", r.alpha},
      {"power_tails", r.power_tails},
      {"power_are_correction", r.power_are_correction},
      {"method", to_string(r.method)},
      {"tie_correction_applied", r.tie_correction_applied},
      {"continuity_correction", r.continuity_correction},
      {"degenerate_variance", r.degenerate_variance},
      {"effect_size_degenerate", r.effect_size_degenerate},
  };
}

/// Reads one sample from CSV. Accepts either a `value` column (or a
/// single unnamed column), or a session export
/// (`participant,...,delta_N`), which is reduced to one mean delta per
/// participant.
inline std::vector<double> read_sample_csv(std::istream& is) {
  const auto table = read_csv(is);
  std::vector<double> out;
  if (auto part = table.find_column("participant"); part && table.find_column("delta_N")) {
    const auto cd = table.column("delta_N");
    std::map<std::string, std::pair<double, int>> acc;
    std::vector<std::string> order;
    for (const auto& row : table.rows) {
      auto [it, inserted] = acc.try_emplace(row[*part], 0.0, 0);
      if (inserted) order.push_back(row[*part]);
      it->second.first += parse_real(row[cd], "delta_N");
      ++it->second.second;
    }
    for (const auto& id : order) out.push_back(acc[id].first / acc[id].second);
    return out;
  }
  std::size_t col = 0;
  if (auto c = table.find_column("value")) {
    col = *c;
  } else if (table.header.size() != 1) {
    throw Error(ErrorCode::InvalidData, "sample CSV needs a 'value' column");
  } else {
    // Single column: the first line is data unless it is a name.
    try {
      out.push_back(parse_real(table.header[0], "value"));
    } catch (const Error&) {
    }
  }
  for (const auto& row : table.rows) out.push_back(parse_real(row[col], "value"));
  return out;
}

}  // namespace presstrain::stats
