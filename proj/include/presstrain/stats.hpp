#pragma once

// Two-sample nonparametric analysis: Mann-Whitney U with midranks, its exact
// null distribution, effect sizes and post-hoc power.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "presstrain/error.hpp"

namespace presstrain::stats {

inline constexpr int kExactThreshold = 12;
inline constexpr double kMannWhitneyAre = 0.955;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorCode::InvalidInput, "mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw Error(ErrorCode::InvalidInput, "variance needs at least two values");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

inline double median(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorCode::InvalidInput, "median of empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// (mean_a - mean_b) / pooled sd, n-1 denominators.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorCode::InvalidInput, "Cohen's d needs at least two values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled = ((na - 1) * variance(a) + (nb - 1) * variance(b)) / (na + nb - 2);
  if (!(pooled > 0.0)) throw Error(ErrorCode::DegenerateVariance, "pooled standard deviation is zero");
  return (mean(a) - mean(b)) / std::sqrt(pooled);
}

// ---------------------------------------------------------------------------
// Ranks

struct RankResult {
  std::vector<double> ranks;  // midranks, pooled order
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
  bool has_ties = false;
};

inline RankResult midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  RankResult r;
  r.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && pooled[order[j]] == pooled[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) r.ranks[order[k]] = avg;
    const double t = static_cast<double>(j - i);
    if (j - i > 1) {
      r.has_ties = true;
      r.tie_term += t * t * t - t;
    }
    i = j;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Exact null distribution

/// P(U = u) for u = 0..n1*n2 with no ties, from the recurrence
///   p(m, n, u) = m/(m+n) p(m-1, n, u-n) + n/(m+n) p(m, n-1, u).
inline std::vector<double> exact_mw_distribution(int n1, int n2) {
  if (n1 < 1 || n2 < 1) throw Error(ErrorCode::InvalidInput, "sample sizes must be positive");
  if (std::min(n1, n2) > kExactThreshold)
    throw Error(ErrorCode::UseApproximation, "exact distribution limited to min(n1, n2) <= 12");
  const int m = std::min(n1, n2);
  const int n = std::max(n1, n2);
  // rows[k] = distribution for (k, current n'), length k*n'+1
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m) + 1, std::vector<double>{1.0});
  for (int np = 1; np <= n; ++np) {
    std::vector<std::vector<double>> next(static_cast<std::size_t>(m) + 1);
    next[0] = {1.0};
    for (int k = 1; k <= m; ++k) {
      auto& out = next[static_cast<std::size_t>(k)];
      out.assign(static_cast<std::size_t>(k * np) + 1, 0.0);
      const double wa = static_cast<double>(k) / (k + np);
      const double wb = static_cast<double>(np) / (k + np);
      const auto& left = next[static_cast<std::size_t>(k - 1)];  // (k-1, np), shift by np
      for (std::size_t u = 0; u < left.size(); ++u) out[u + static_cast<std::size_t>(np)] += wa * left[u];
      const auto& prev = rows[static_cast<std::size_t>(k)];  // (k, np-1)
      for (std::size_t u = 0; u < prev.size(); ++u) out[u] += wb * prev[u];
    }
    rows = std::move(next);
  }
  return rows[static_cast<std::size_t>(m)];
}

/// Lower-tail exact p-value P(U <= u) under H0, no ties.
inline double exact_mw_p(double u, int n1, int n2) {
  const auto dist = exact_mw_distribution(n1, n2);
  const double top = static_cast<double>(n1) * n2;
  if (u < 0.0 || u > top) throw Error(ErrorCode::InvalidInput, "U outside [0, n1*n2]");
  const auto k = static_cast<std::size_t>(std::floor(u + 1e-9));
  double p = 0.0;
  for (std::size_t i = 0; i <= k && i < dist.size(); ++i) p += dist[i];
  return std::min(1.0, p);
}

/// Exact distribution of 2U given midranks (ties allowed): subset-sum DP over
/// doubled ranks of every way to choose n1 of the pooled values.
inline std::vector<double> exact_tied_distribution(std::span<const double> ranks, int n1) {
  const int total = static_cast<int>(ranks.size());
  const int n2 = total - n1;
  if (n1 < 1 || n2 < 1) throw Error(ErrorCode::InvalidInput, "sample sizes must be positive");
  if (std::min(n1, n2) > kExactThreshold)
    throw Error(ErrorCode::UseApproximation, "exact distribution limited to min(n1, n2) <= 12");
  std::vector<int> doubled(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
  const int max_sum = std::accumulate(doubled.begin(), doubled.end(), 0);
  // ways[k][s]: probability-weighted count of k-subsets with doubled sum s
  std::vector<std::vector<long double>> ways(static_cast<std::size_t>(n1) + 1,
                                             std::vector<long double>(static_cast<std::size_t>(max_sum) + 1, 0.0L));
  ways[0][0] = 1.0L;
  for (int item = 0; item < total; ++item) {
    const int w = doubled[static_cast<std::size_t>(item)];
    for (int k = std::min(n1, item + 1); k >= 1; --k) {
      auto& dst = ways[static_cast<std::size_t>(k)];
      const auto& src = ways[static_cast<std::size_t>(k - 1)];
      for (int s = max_sum; s >= w; --s) dst[static_cast<std::size_t>(s)] += src[static_cast<std::size_t>(s - w)];
    }
  }
  // 2U = 2R - n1(n1+1)
  const int offset = n1 * (n1 + 1);
  std::vector<double> dist(static_cast<std::size_t>(2 * n1 * n2) + 1, 0.0);
  long double norm = 0.0L;
  for (int s = 0; s <= max_sum; ++s) norm += ways[static_cast<std::size_t>(n1)][static_cast<std::size_t>(s)];
  for (int s = 0; s <= max_sum; ++s) {
    const long double c = ways[static_cast<std::size_t>(n1)][static_cast<std::size_t>(s)];
    if (c == 0.0L) continue;
    const int two_u = s - offset;
    if (two_u >= 0 && two_u < static_cast<int>(dist.size()))
      dist[static_cast<std::size_t>(two_u)] += static_cast<double>(c / norm);
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Power

enum class PowerMethod { Normal, NoncentralT };

struct PowerOptions {
  double alpha = 0.05;
  int tails = 1;
  bool are_correction = true;
  PowerMethod method = PowerMethod::Normal;
};

/// Power of a two-sample location test at standardized effect d.
/// Normal form: Phi(d * sqrt(n_eff / 2) - z_crit), n_eff = 0.955 n under ARE.
inline double power_two_sample(double d, double n1, double n2, const PowerOptions& opt = {}) {
  if (!(d >= 0.0)) throw Error(ErrorCode::InvalidInput, "effect size must be non-negative");
  if (!(n1 >= 2.0) || !(n2 >= 2.0)) throw Error(ErrorCode::InvalidInput, "need n >= 2 per group");
  if (!(opt.alpha > 0.0 && opt.alpha <= 0.5)) throw Error(ErrorCode::InvalidInput, "alpha must lie in (0, 0.5]");
  if (opt.tails != 1 && opt.tails != 2) throw Error(ErrorCode::InvalidInput, "tails must be 1 or 2");
  const double eff = opt.are_correction ? kMannWhitneyAre : 1.0;
  const double ncp = d * std::sqrt(eff * n1 * n2 / (n1 + n2));
  const double tail_alpha = opt.alpha / opt.tails;

  if (opt.method == PowerMethod::Normal) {
    const double z_crit = normal_quantile(1.0 - tail_alpha);
    double p = normal_cdf(ncp - z_crit);
    if (opt.tails == 2) p += normal_cdf(-ncp - z_crit);
    return p;
  }
  const double df = eff * (n1 + n2) - 2.0;
  const double t_crit = boost::math::quantile(boost::math::students_t_distribution<double>(df), 1.0 - tail_alpha);
  if (ncp == 0.0) return opt.alpha;
  boost::math::non_central_t_distribution<double> nct(df, ncp);
  double p = boost::math::cdf(boost::math::complement(nct, t_crit));
  if (opt.tails == 2) p += boost::math::cdf(nct, -t_crit);
  return p;
}

inline double power_two_sample(double d, int n_per_group, const PowerOptions& opt = {}) {
  return power_two_sample(d, static_cast<double>(n_per_group), static_cast<double>(n_per_group), opt);
}

// ---------------------------------------------------------------------------
// Mann-Whitney

enum class TestMethod { Exact, NormalApprox };
enum class Alternative { Less, Greater };  // direction of the one-tailed test for sample a

struct MannWhitneyOptions {
  bool continuity_correction = false;
  bool exact = true;              // use the exact distribution when allowed
  bool tie_aware_exact = false;   // permit exact p with ties (subset-sum DP)
  int exact_threshold = kExactThreshold;
  Alternative alternative = Alternative::Less;
  PowerOptions power{};
};

struct StatsReport {
  int n1 = 0;
  int n2 = 0;
  double U = 0.0;  // U of sample a
  double U_b = 0.0;
  double z = 0.0;
  double p_two_tailed = 1.0;
  double p_one_tailed = 1.0;
  double r_effect = 0.0;
  double median1_N = 0.0;
  double median2_N = 0.0;
  double cohens_d = std::numeric_limits<double>::quiet_NaN();
  double power = std::numeric_limits<double>::quiet_NaN();
  TestMethod method = TestMethod::NormalApprox;
  Alternative alternative = Alternative::Less;
  bool tie_correction_applied = false;
  bool continuity_correction = false;
  bool degenerate_variance = false;
  bool effect_size_degenerate = false;
  double alpha = 0.05;
  int power_tails = 1;
  bool power_are_correction = true;
};

inline StatsReport mann_whitney(std::span<const double> a, std::span<const double> b,
                                const MannWhitneyOptions& opt = {}) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidInput, "both samples must be non-empty");
  for (double x : a)
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidInput, "non-finite value in sample a");
  for (double x : b)
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidInput, "non-finite value in sample b");

  StatsReport r;
  r.n1 = static_cast<int>(a.size());
  r.n2 = static_cast<int>(b.size());
  r.alternative = opt.alternative;
  r.continuity_correction = opt.continuity_correction;
  r.alpha = opt.power.alpha;
  r.power_tails = opt.power.tails;
  r.power_are_correction = opt.power.are_correction;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const double n1 = r.n1;
  const double n2 = r.n2;
  const double big_n = n1 + n2;
  const double rank_sum_a = std::accumulate(ranks.ranks.begin(), ranks.ranks.begin() + r.n1, 0.0);
  r.U = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
  r.U_b = n1 * n2 - r.U;
  r.tie_correction_applied = ranks.has_ties;

  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((big_n + 1.0) - ranks.tie_term / (big_n * (big_n - 1.0)));
  if (!(var > 0.0)) {
    r.degenerate_variance = true;
    r.z = std::numeric_limits<double>::quiet_NaN();
    r.r_effect = std::numeric_limits<double>::quiet_NaN();
    r.p_two_tailed = 1.0;
    r.p_one_tailed = 1.0;
  } else {
    double diff = r.U - mu;
    if (opt.continuity_correction) diff = diff > 0 ? std::max(0.0, diff - 0.5) : std::min(0.0, diff + 0.5);
    r.z = diff / std::sqrt(var);
    r.r_effect = r.z / std::sqrt(big_n);
    r.p_two_tailed = std::min(1.0, 2.0 * normal_cdf(-std::abs(r.z)));
    r.p_one_tailed = opt.alternative == Alternative::Less ? normal_cdf(r.z) : normal_cdf(-r.z);
  }

  const bool small = std::min(r.n1, r.n2) <= std::min(opt.exact_threshold, kExactThreshold);
  if (opt.exact && small && !r.degenerate_variance && (!ranks.has_ties || opt.tie_aware_exact)) {
    double lower = 0.0;
    double upper = 0.0;
    if (!ranks.has_ties) {
      const auto dist = exact_mw_distribution(r.n1, r.n2);
      const auto u = static_cast<std::size_t>(std::lround(r.U));
      for (std::size_t i = 0; i < dist.size(); ++i) {
        if (i <= u) lower += dist[i];
        if (i >= u) upper += dist[i];
      }
    } else {
      const auto dist = exact_tied_distribution(ranks.ranks, r.n1);
      const auto two_u = static_cast<std::size_t>(std::lround(2.0 * r.U));
      for (std::size_t i = 0; i < dist.size(); ++i) {
        if (i <= two_u) lower += dist[i];
        if (i >= two_u) upper += dist[i];
      }
    }
    r.method = TestMethod::Exact;
    r.p_one_tailed = std::min(1.0, opt.alternative == Alternative::Less ? lower : upper);
    r.p_two_tailed = std::min(1.0, 2.0 * std::min(lower, upper));
  }

  r.median1_N = median(a);
  r.median2_N = median(b);
  if (a.size() >= 2 && b.size() >= 2) {
    try {
      r.cohens_d = cohens_d(a, b);
      r.power = power_two_sample(std::abs(r.cohens_d), n1, n2, opt.power);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateVariance) throw;
      r.effect_size_degenerate = true;
    }
  }
  return r;
}

inline std::string_view to_string(TestMethod m) { return m == TestMethod::Exact ? "Exact" : "NormalApprox"; }
inline std::string_view to_string(Alternative a) { return a == Alternative::Less ? "less" : "greater"; }

}  // namespace presstrain::stats
