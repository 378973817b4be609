#include "drf/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

namespace drf::stats {

namespace bm = boost::math;

double normal_two_sided_p(double z) {
  const double p = 2.0 * bm::cdf(bm::complement(bm::normal_distribution<double>(), std::fabs(z)));
  return std::clamp(p, 0.0, 1.0);
}

double chi2_1df_sf(double x) {
  if (!(x > 0.0)) return 1.0;
  return bm::cdf(bm::complement(bm::chi_squared_distribution<double>(1.0), x));
}

double student_t_two_sided_p(double t, double df) {
  const double p = 2.0 * bm::cdf(bm::complement(bm::students_t_distribution<double>(df), std::fabs(t)));
  return std::clamp(p, 0.0, 1.0);
}

std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
    i = j + 1;
  }
  return r;
}

TestResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("spearman: vectors differ in length");
  if (x.size() < 3) throw Error("spearman: need at least 3 paired observations");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("spearman: constant input vector");
  const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);

  TestResult r;
  r.statistic = rho;
  const double one_minus = 1.0 - rho * rho;
  if (one_minus <= 0.0) {
    r.p_raw = 0.0;
  } else {
    const double t = rho * std::sqrt((n - 2.0) / one_minus);
    r.p_raw = student_t_two_sided_p(t, n - 2.0);
  }
  return r;
}

TestResult wilcoxon_ranksum(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty() || a.size() + b.size() < 4)
    throw Error("wilcoxon: need both groups nonempty and at least 4 observations in total");
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  const auto r = midranks(all);

  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  double r1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r1 += r[i];
  const double u = r1 - n1 * (n1 + 1.0) / 2.0;

  // Tie correction: sum over tie groups of t^3 - t.
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (!(var > 0.0)) throw UndefinedTest("wilcoxon: all observations are identical");

  const double mean = n1 * n2 / 2.0;
  const double z = std::max(0.0, std::fabs(u - mean) - 0.5) / std::sqrt(var);
  return TestResult{u, normal_two_sided_p(z), std::nullopt, std::nullopt};
}

std::vector<double> holm_bonferroni(std::span<const double> p, std::size_t m) {
  if (m < p.size()) throw Error("holm_bonferroni: family size smaller than the number of p-values");
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw Error("holm_bonferroni: p-values must lie in [0, 1]");
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  std::vector<double> out(p.size());
  double running = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double factor = static_cast<double>(m - k);
    running = std::max(running, std::min(1.0, factor * p[order[k]]));
    out[order[k]] = running;
  }
  return out;
}

double median(std::span<const double> values) {
  if (values.empty()) throw Error("median of an empty vector");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MedianSplit median_split(std::span<const double> values) {
  if (values.size() < 2) throw Error("median_split: need at least 2 values");
  MedianSplit s;
  s.median = median(values);
  s.labels.resize(values.size());
  std::size_t high = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.labels[i] = values[i] >= s.median ? 1 : 0;
    high += static_cast<std::size_t>(s.labels[i]);
  }
  s.degenerate = high == 0 || high == values.size();
  return s;
}

std::vector<KmPoint> kaplan_meier(std::span<const SurvivalSample> s) {
  if (s.empty()) throw Error("kaplan_meier: no samples");
  std::vector<SurvivalSample> v(s.begin(), s.end());
  std::sort(v.begin(), v.end(), [](const SurvivalSample& a, const SurvivalSample& b) { return a.time < b.time; });

  std::vector<KmPoint> curve;
  double surv = 1.0;
  std::size_t at_risk = v.size();
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    std::size_t events = 0, censored = 0;
    while (j < v.size() && v[j].time == v[i].time) {
      (v[j].event ? events : censored) += 1;
      ++j;
    }
    if (events > 0) surv *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
    curve.push_back({v[i].time, surv, at_risk, events, censored});
    at_risk -= events + censored;
    i = j;
  }
  return curve;
}

std::optional<double> km_median(std::span<const KmPoint> curve) {
  for (const auto& p : curve)
    if (p.events > 0 && p.survival <= 0.5) return p.time;
  return std::nullopt;
}

TestResult logrank(std::span<const SurvivalSample> g1, std::span<const SurvivalSample> g2) {
  if (g1.empty() || g2.empty()) throw UndefinedTest("logrank: both groups must be nonempty");

  struct Tagged {
    double time;
    bool event;
    int group;
  };
  std::vector<Tagged> all;
  for (const auto& s : g1) all.push_back({s.time, s.event, 0});
  for (const auto& s : g2) all.push_back({s.time, s.event, 1});
  std::sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) { return a.time < b.time; });

  double n1 = static_cast<double>(g1.size()), n2 = static_cast<double>(g2.size());
  double o1 = 0.0, o2 = 0.0, e1 = 0.0, e2 = 0.0, var = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    double d1 = 0.0, d2 = 0.0, c1 = 0.0, c2 = 0.0;
    while (j < all.size() && all[j].time == all[i].time) {
      const bool first = all[j].group == 0;
      if (all[j].event)
        (first ? d1 : d2) += 1.0;
      else
        (first ? c1 : c2) += 1.0;
      ++j;
    }
    const double d = d1 + d2;
    const double n = n1 + n2;
    if (d > 0.0) {
      o1 += d1;
      o2 += d2;
      e1 += d * n1 / n;
      e2 += d * n2 / n;
      if (n > 1.0) var += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1.0);
    }
    n1 -= d1 + c1;
    n2 -= d2 + c2;
    i = j;
  }
  if (o1 + o2 == 0.0) throw UndefinedTest("logrank: no events observed");

  TestResult r;
  const double diff = o1 - e1;
  r.statistic = var > 0.0 ? diff * diff / var : 0.0;
  r.p_raw = chi2_1df_sf(r.statistic);
  if (o1 > 0.0 && o2 > 0.0 && e1 > 0.0 && e2 > 0.0) {
    HazardRatio h;
    h.hr = (o1 / e1) / (o2 / e2);
    const double half = 1.96 * std::sqrt(1.0 / e1 + 1.0 / e2);
    h.ci_low = std::exp(std::log(h.hr) - half);
    h.ci_high = std::exp(std::log(h.hr) + half);
    r.hazard = h;
  }
  return r;
}

}  // namespace drf::stats
