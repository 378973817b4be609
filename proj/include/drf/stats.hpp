#pragma once

#include <optional>
#include <span>
#include <vector>

#include "drf/error.hpp"

namespace drf::stats {

struct SurvivalSample {
  double time = 0.0;  // days
  bool event = false;  // true = death observed, false = censored
};

struct HazardRatio {
  double hr = 1.0;
  double ci_low = 1.0;
  double ci_high = 1.0;
};

struct TestResult {
  double statistic = 0.0;  // rho, U, or chi-square depending on the test
  double p_raw = 1.0;
  std::optional<double> p_corrected;
  std::optional<HazardRatio> hazard;  // log-rank only; empty when a group has no events
};

/// Mid-ranks (1-based, ties averaged).
std::vector<double> midranks(std::span<const double> x);

/// Spearman rho with a two-sided t-approximation p-value.
TestResult spearman(std::span<const double> x, std::span<const double> y);

/// Two-sided Mann-Whitney U (statistic = U of group a), normal approximation with tie-corrected
/// variance and continuity correction 0.5.
TestResult wilcoxon_ranksum(std::span<const double> a, std::span<const double> b);

/// Holm step-down correction for a family of `m` hypotheses, of which `p` may be a subset
/// (the smallest ones). Returned in input order.
std::vector<double> holm_bonferroni(std::span<const double> p, std::size_t m);
inline std::vector<double> holm_bonferroni(std::span<const double> p) { return holm_bonferroni(p, p.size()); }

struct MedianSplit {
  double median = 0.0;
  std::vector<int> labels;  // 1 iff value >= median
  bool degenerate = false;  // one side empty
};
MedianSplit median_split(std::span<const double> values);
double median(std::span<const double> values);

struct KmPoint {
  double time = 0.0;
  double survival = 1.0;
  std::size_t at_risk = 0;
  std::size_t events = 0;
  std::size_t censored = 0;
};

/// Kaplan-Meier steps at every distinct observed time (event or censor), in ascending order.
std::vector<KmPoint> kaplan_meier(std::span<const SurvivalSample> s);

/// Smallest time at which the KM curve drops to <= 0.5, if it does.
std::optional<double> km_median(std::span<const KmPoint> curve);

/// Two-group log-rank (1 df) with Mantel-Haenszel hazard ratio (g1 relative to g2) and 95% CI.
TestResult logrank(std::span<const SurvivalSample> g1, std::span<const SurvivalSample> g2);

double normal_two_sided_p(double z);
double chi2_1df_sf(double x);
double student_t_two_sided_p(double t, double df);

}  // namespace drf::stats
