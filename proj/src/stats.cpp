#include "hhil/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "hhil/error.hpp"

namespace hhil::stats {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

SummaryStats summarize(std::span<const double> sample) {
  if (sample.empty()) throw ValidationError("summarize: empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  SummaryStats s;
  s.n = x.size();
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  s.min = x.front();
  s.max = x.back();
  s.q25 = quantile_sorted(x, 0.25);
  s.q50 = quantile_sorted(x, 0.50);
  s.q75 = quantile_sorted(x, 0.75);
  s.iqr = s.q75 - s.q25;
  return s;
}

namespace {

double poly(const double* cc, int nord, double x) {
  double ret = cc[0];
  if (nord > 1) {
    double p = x * cc[nord - 1];
    for (int j = nord - 2; j > 0; --j) p = (p + cc[j]) * x;
    ret += p;
  }
  return ret;
}

double qnorm(double p) { return boost::math::quantile(boost::math::normal(), p); }

// Upper tail of N(mean, sd) at x.
double upper_tail(double x, double mean, double sd) {
  return 0.5 * std::erfc((x - mean) / (sd * std::sqrt(2.0)));
}

}  // namespace

TestResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000) throw ValidationError("shapiro_wilk: sample size must be in [3, 5000]");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw ValidationError("shapiro_wilk: sample has zero variance");

  static const double g[2] = {-2.273, 0.459};
  static const double c1[6] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static const double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static const double c3[4] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static const double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static const double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static const double c6[3] = {-0.4803, -0.082676, 0.0030302};

  const double an = static_cast<double>(n);
  const std::size_t nn2 = n / 2;
  std::vector<double> a(nn2 + 1, 0.0);  // 1-based
  if (n == 3) {
    a[1] = std::sqrt(0.5);
  } else {
    std::vector<double> m(nn2 + 1);
    double summ2 = 0.0;
    for (std::size_t i = 1; i <= nn2; ++i) {
      m[i] = qnorm((static_cast<double>(i) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, 6, rsn) - m[1] / ssumm2;
    std::size_t i1;
    double fac;
    if (n > 5) {
      i1 = 3;
      const double a2 = -m[2] / ssumm2 + poly(c2, 6, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[2] = a2;
    } else {
      i1 = 2;
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1));
    }
    a[1] = a1;
    for (std::size_t i = i1; i <= nn2; ++i) a[i] = -m[i] / fac;
  }

  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / an;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  double num = 0.0;
  for (std::size_t i = 1; i <= nn2; ++i) num += a[i] * (x[n - i] - x[i - 1]);
  double w = std::min(1.0, num * num / ss);

  TestResult r{"shapiro-wilk", w, 1.0, n, 0};
  if (n == 3) {
    constexpr double kSixOverPi = 1.90985931710274;
    constexpr double kPiOverThree = 1.04719755119660;
    r.p = std::clamp(kSixOverPi * (std::asin(std::sqrt(w)) - kPiOverThree), 0.0, 1.0);
    return r;
  }
  double y = std::log1p(-w);
  double mu, sigma;
  if (n <= 11) {
    const double gamma = poly(g, 2, an);
    if (y >= gamma) {
      r.p = 1e-99;
      return r;
    }
    y = -std::log(gamma - y);
    mu = poly(c3, 4, an);
    sigma = std::exp(poly(c4, 4, an));
  } else {
    const double xx = std::log(an);
    mu = poly(c5, 4, xx);
    sigma = std::exp(poly(c6, 3, xx));
  }
  r.p = std::clamp(upper_tail(y, mu, sigma), 0.0, 1.0);
  return r;
}

namespace {

struct Ranked {
  std::vector<std::int64_t> doubled_ranks;  // 2 * midrank, pooled order
  double tie_term = 0.0;                    // sum over tie groups of t^3 - t
  double u_a = 0.0;
};

Ranked rank(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t N = n + b.size();
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(N);
  for (std::size_t i = 0; i < n; ++i) pooled.emplace_back(a[i], i);
  for (std::size_t j = 0; j < b.size(); ++j) pooled.emplace_back(b[j], n + j);
  std::sort(pooled.begin(), pooled.end());
  Ranked r;
  r.doubled_ranks.resize(N);
  std::int64_t sum_a = 0;
  for (std::size_t i = 0; i < N;) {
    std::size_t j = i;
    while (j < N && pooled[j].first == pooled[i].first) ++j;
    // Ranks i+1..j share the midrank (i+1+j)/2.
    const auto doubled = static_cast<std::int64_t>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    r.tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      r.doubled_ranks[k] = doubled;
      if (pooled[k].second < n) sum_a += doubled;
    }
    i = j;
  }
  const auto nn = static_cast<std::int64_t>(n);
  r.u_a = static_cast<double>(sum_a - nn * (nn + 1)) / 2.0;
  return r;
}

void check_inputs(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("mann_whitney_u: empty sample");
  for (double v : a) {
    if (std::isnan(v)) throw ValidationError("mann_whitney_u: NaN in sample");
  }
  for (double v : b) {
    if (std::isnan(v)) throw ValidationError("mann_whitney_u: NaN in sample");
  }
}

double normal_p(const Ranked& r, std::size_t n, std::size_t m) {
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double N = nd + md;
  const double mu = nd * md / 2.0;
  const double var = nd * md / 12.0 * ((N + 1.0) - r.tie_term / (N * (N - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(r.u_a - mu) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double exact_p(const Ranked& r, std::size_t n, std::size_t m) {
  // counts[k][s]: subsets of size k with doubled rank sum s.
  std::int64_t max_sum = 0;
  for (auto v : r.doubled_ranks) max_sum += v;
  std::vector<std::vector<double>> counts(n + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  counts[0][0] = 1.0;
  for (auto v : r.doubled_ranks) {
    for (std::size_t k = n; k >= 1; --k) {
      auto& dst = counts[k];
      const auto& src = counts[k - 1];
      for (std::int64_t s = max_sum; s >= v; --s) dst[s] += src[s - v];
    }
  }
  const auto nn = static_cast<std::int64_t>(n);
  const auto nm = static_cast<std::int64_t>(n * m);
  // 2U - nm = S2 - n(n+1) - nm, an integer.
  const auto observed = std::llabs(static_cast<std::int64_t>(2.0 * r.u_a) - nm);
  double extreme = 0.0;
  double total = 0.0;
  for (std::int64_t s = 0; s <= max_sum; ++s) {
    const double c = counts[n][s];
    if (c == 0.0) continue;
    total += c;
    if (std::llabs(s - nn * (nn + 1) - nm) >= observed) extreme += c;
  }
  return std::min(1.0, extreme / total);
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const auto r = rank(a, b);
  TestResult out{"mann-whitney", r.u_a, 1.0, a.size(), b.size()};
  out.p = (a.size() <= 8 && b.size() <= 8) ? exact_p(r, a.size(), b.size()) : normal_p(r, a.size(), b.size());
  return out;
}

TestResult mann_whitney_u_normal(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const auto r = rank(a, b);
  return {"mann-whitney", r.u_a, normal_p(r, a.size(), b.size()), a.size(), b.size()};
}

}  // namespace hhil::stats
