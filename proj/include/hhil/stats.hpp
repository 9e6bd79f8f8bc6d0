#pragma once

// Distribution summaries, Shapiro-Wilk normality test and the two-sided
// Mann-Whitney U test.

#include <span>
#include <string>
#include <vector>

namespace hhil::stats {

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // n - 1 denominator, 0 for n == 1
  double min = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double max = 0.0;
  double iqr = 0.0;
};

/// Quantile by linear interpolation between order statistics at (n-1)*p.
double quantile_sorted(std::span<const double> sorted, double p);

/// Throws ValidationError on an empty sample.
SummaryStats summarize(std::span<const double> sample);

struct TestResult {
  std::string test;
  double statistic = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// W statistic and Royston's p-value approximation. 3 <= n <= 5000, nonzero
/// variance; otherwise ValidationError.
TestResult shapiro_wilk(std::span<const double> sample);

/// U for `a` with half credit for ties. Two-sided p: exact over all
/// relabelings of the pooled (mid-ranked) sample when both sizes are <= 8,
/// otherwise the normal approximation with tie and continuity corrections.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Normal approximation only, regardless of sample size.
TestResult mann_whitney_u_normal(std::span<const double> a, std::span<const double> b);

}  // namespace hhil::stats
