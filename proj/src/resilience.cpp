#include "hhil/resilience.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hhil::resilience {

std::vector<double> trim_cyclic(std::span<const double> nominal, std::size_t target_len) {
  if (nominal.empty()) throw ValidationError("trim_cyclic: empty nominal series");
  std::vector<double> out(target_len);
  for (std::size_t k = 0; k < target_len; ++k) out[k] = nominal[k % nominal.size()];
  return out;
}

namespace {

constexpr std::uint8_t kDiag = 0;
constexpr std::uint8_t kUp = 1;
constexpr std::uint8_t kLeft = 2;

inline double sq(double v) { return v * v; }

}  // namespace

WarpPath dtw(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ValidationError("dtw: empty input series");
  const std::size_t A = x.size();
  const std::size_t B = y.size();
  // Back-pointers for the whole matrix, costs for two rows only.
  std::vector<std::uint8_t> dir(A * B);
  std::vector<double> prev(B), cur(B);

  prev[0] = sq(x[0] - y[0]);
  for (std::size_t b = 1; b < B; ++b) {
    prev[b] = sq(x[0] - y[b]) + prev[b - 1];
    dir[b] = kLeft;
  }
  for (std::size_t a = 1; a < A; ++a) {
    std::uint8_t* row = dir.data() + a * B;
    const double xa = x[a];
    cur[0] = sq(xa - y[0]) + prev[0];
    row[0] = kUp;
    for (std::size_t b = 1; b < B; ++b) {
      const double diag = prev[b - 1];
      const double up = prev[b];
      const double left = cur[b - 1];
      double best = diag;
      std::uint8_t d = kDiag;
      const bool take_up = up < best;
      best = take_up ? up : best;
      d = take_up ? kUp : d;
      const bool take_left = left < best;
      best = take_left ? left : best;
      d = take_left ? kLeft : d;
      cur[b] = sq(xa - y[b]) + best;
      row[b] = d;
    }
    std::swap(prev, cur);
  }

  WarpPath path;
  path.cost = prev[B - 1];
  std::size_t a = A - 1;
  std::size_t b = B - 1;
  path.pairs.reserve(A + B);
  while (true) {
    path.pairs.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
    if (a == 0 && b == 0) break;
    switch (dir[a * B + b]) {
      case kDiag: --a; --b; break;
      case kUp: --a; break;
      default: --b; break;
    }
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

std::vector<double> align(std::span<const double> nominal, std::span<const double> disrupted,
                          const WarpPath& path) {
  if (path.pairs.empty() || path.pairs.front() != std::pair<std::uint32_t, std::uint32_t>{0, 0} ||
      path.pairs.back().first + 1 != nominal.size() || path.pairs.back().second + 1 != disrupted.size()) {
    throw ValidationError("align: warp path does not match the series lengths");
  }
  std::vector<double> sum(nominal.size(), 0.0);
  std::vector<std::size_t> count(nominal.size(), 0);
  for (const auto& [a, b] : path.pairs) {
    sum[a] += disrupted[b];
    ++count[a];
  }
  for (std::size_t a = 0; a < sum.size(); ++a) {
    if (count[a] == 0) throw ValidationError("align: warp path skips a nominal index");
    sum[a] /= static_cast<double>(count[a]);
  }
  return sum;
}

std::vector<double> relative_deviation(std::span<const double> nominal, std::span<const double> aligned,
                                       double scale, double floor) {
  if (nominal.size() != aligned.size()) throw ValidationError("relative_deviation: length mismatch");
  const double eps = floor * scale;
  std::vector<double> d(nominal.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    d[k] = std::abs(aligned[k] - nominal[k]) / std::max(std::abs(nominal[k]), eps);
  }
  return d;
}

std::vector<AnomalySegment> detect_anomalies(std::span<const double> nominal, std::span<const double> aligned,
                                             const AnomalyConfig& cfg, double scale) {
  if (nominal.size() != aligned.size()) throw ValidationError("detect_anomalies: length mismatch");
  const auto d = relative_deviation(nominal, aligned, scale, cfg.floor);
  const std::size_t min_run = std::max<std::size_t>(cfg.min_run, 1);

  std::vector<AnomalySegment> out;
  bool open = false;
  std::size_t run = 0;    // current run of above-threshold samples (closed state)
  std::size_t quiet = 0;  // quiet samples since the last above-threshold one (open state)
  AnomalySegment seg;
  auto peak_of = [&](AnomalySegment s) {
    s.peak = *std::max_element(d.begin() + static_cast<std::ptrdiff_t>(s.start),
                               d.begin() + static_cast<std::ptrdiff_t>(s.end) + 1);
    return s;
  };
  for (std::size_t k = 0; k < d.size(); ++k) {
    const bool above = d[k] >= cfg.threshold;
    if (!open) {
      run = above ? run + 1 : 0;
      if (run >= min_run) {
        open = true;
        seg.start = k + 1 - run;
        seg.end = k;
        quiet = 0;
      }
    } else if (above) {
      seg.end = k;
      quiet = 0;
    } else if (++quiet >= cfg.quiet_run) {
      out.push_back(peak_of(seg));
      open = false;
      run = 0;
    }
  }
  if (open) out.push_back(peak_of(seg));
  return out;
}

ResilienceResult mask_and_score(std::span<const double> nominal, std::span<const double> aligned,
                                const std::vector<AnomalySegment>& segments, double dt) {
  if (nominal.size() != aligned.size()) throw ValidationError("mask_and_score: length mismatch");
  if (!(dt > 0.0)) throw ValidationError("mask_and_score: dt must be positive");
  std::vector<bool> inside(nominal.size(), false);
  std::size_t last_end = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.start > s.end || s.end >= nominal.size() || (i > 0 && s.start <= last_end)) {
      throw ValidationError("mask_and_score: segments must be ordered, disjoint and in range");
    }
    last_end = s.end;
    std::fill(inside.begin() + static_cast<std::ptrdiff_t>(s.start),
              inside.begin() + static_cast<std::ptrdiff_t>(s.end) + 1, true);
  }
  auto masked = [&](std::span<const double> v, std::size_t k) { return inside[k] ? v[k] : 0.0; };
  ResilienceResult r;
  r.segments = segments;
  for (std::size_t k = 0; k + 1 < nominal.size(); ++k) {
    r.As += 0.5 * dt * (masked(nominal, k) + masked(nominal, k + 1));
    r.Ad += 0.5 * dt * (masked(aligned, k) + masked(aligned, k + 1));
  }
  if (segments.empty()) {
    r.R = 1.0;
    return r;
  }
  if (r.As == 0.0) throw DegenerateNominal("nominal area is zero over the anomaly segments");
  r.R = (r.As - std::abs(r.As - r.Ad)) / r.As;
  r.negative = r.R < 0.0;
  return r;
}

ResilienceResult resilience_index(std::span<const double> nominal, std::span<const double> disrupted,
                                  ChannelId channel, double dt, const AnomalyConfig& cfg, double scale,
                                  bool keep_curves) {
  if (disrupted.empty()) throw ValidationError("resilience_index: empty disrupted series");
  auto trimmed = trim_cyclic(nominal, disrupted.size());
  const auto path = dtw(trimmed, disrupted);
  auto aligned = align(trimmed, disrupted, path);
  const auto segments = detect_anomalies(trimmed, aligned, cfg, scale);
  auto r = mask_and_score(trimmed, aligned, segments, dt);
  r.channel = channel;
  if (keep_curves) {
    r.nominal = std::move(trimmed);
    r.aligned = std::move(aligned);
  }
  return r;
}

std::string results_csv_header() { return "channel,R,As,Ad,n_segments,first_start,last_end\n"; }

std::string results_csv_row(const ResilienceResult& r) {
  std::string out(plant::to_string(r.channel));
  out += ',' + plant::format_fixed(r.R) + ',' + plant::format_fixed(r.As) + ',' + plant::format_fixed(r.Ad) +
         ',' + std::to_string(r.segments.size()) + ',';
  if (!r.segments.empty()) {
    out += std::to_string(r.segments.front().start) + ',' + std::to_string(r.segments.back().end);
  } else {
    out += ',';
  }
  out += '\n';
  return out;
}

std::string to_csv(const std::vector<ResilienceResult>& results) {
  std::string out = results_csv_header();
  for (const auto& r : results) out += results_csv_row(r);
  return out;
}

std::string stage_dump_csv(const ResilienceResult& r) {
  if (r.nominal.size() != r.aligned.size() || r.nominal.empty()) {
    throw ValidationError("stage_dump_csv: result carries no curve snapshots");
  }
  std::vector<bool> inside(r.nominal.size(), false);
  for (const auto& s : r.segments) {
    for (std::size_t k = s.start; k <= s.end; ++k) inside[k] = true;
  }
  std::string out = "k,nominal,aligned,masked_nominal,masked_aligned,in_segment\n";
  for (std::size_t k = 0; k < r.nominal.size(); ++k) {
    out += std::to_string(k) + ',' + plant::format_fixed(r.nominal[k]) + ',' + plant::format_fixed(r.aligned[k]) +
           ',' + plant::format_fixed(inside[k] ? r.nominal[k] : 0.0) + ',' +
           plant::format_fixed(inside[k] ? r.aligned[k] : 0.0) + ',' + (inside[k] ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace hhil::resilience
