#pragma once

// Area-under-curve resilience index with cyclic trimming, DTW alignment and
// anomaly masking.
//
//   R = (As - |As - Ad|) / As
//
// As and Ad are trapezoid areas of the nominal and aligned disrupted curves
// after both are zeroed outside the detected anomaly segments.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hhil/error.hpp"
#include "hhil/plant.hpp"

namespace hhil::resilience {

using plant::ChannelId;

struct WarpPath {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // 0-based (a, b)
  double cost = 0.0;
};

/// Element k of the result is nominal[k mod len(nominal)].
std::vector<double> trim_cyclic(std::span<const double> nominal, std::size_t target_len);

/// Minimum-cost warping path with D(a,b) = (x_a - y_b)^2 and steps
/// (1,0), (0,1), (1,1). Ties prefer the diagonal, then (a-1, b), then (a, b-1).
WarpPath dtw(std::span<const double> x, std::span<const double> y);

/// aligned[a] = mean of disrupted[b] over all (a, b) on the path.
std::vector<double> align(std::span<const double> nominal, std::span<const double> disrupted,
                          const WarpPath& path);

struct AnomalyConfig {
  double threshold = 0.05;      // relative deviation
  std::size_t min_run = 50;     // samples above threshold to open a segment
  std::size_t quiet_run = 500;  // samples below threshold to close it
  double floor = 1e-6;          // denominator floor, times the channel scale
};

struct AnomalySegment {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive, last above-threshold index
  double peak = 0.0;    // largest relative deviation inside the segment

  friend bool operator==(const AnomalySegment&, const AnomalySegment&) = default;
};

/// d_k = |aligned_k - nominal_k| / max(|nominal_k|, floor * scale).
std::vector<double> relative_deviation(std::span<const double> nominal, std::span<const double> aligned,
                                       double scale = 1.0, double floor = 1e-6);

/// A segment opens at the first index of a run of >= min_run deviations at or
/// above threshold and closes at the last above-threshold index once quiet_run
/// consecutive quiet samples follow. Shorter quiet gaps are absorbed. A
/// segment still open at the end of the series closes at its last
/// above-threshold index.
std::vector<AnomalySegment> detect_anomalies(std::span<const double> nominal, std::span<const double> aligned,
                                             const AnomalyConfig& cfg = {}, double scale = 1.0);

/// As = 0 while segments exist.
class DegenerateNominal : public Error {
 public:
  using Error::Error;
};

struct ResilienceResult {
  ChannelId channel = ChannelId::S1;
  double R = 1.0;
  double As = 0.0;
  double Ad = 0.0;
  std::vector<AnomalySegment> segments;
  bool negative = false;  // R < 0 is reported as-is
  // Stage snapshots, filled only when requested.
  std::vector<double> nominal;
  std::vector<double> aligned;
};

/// Trapezoid areas of both curves zeroed outside the segments. R = 1 when
/// there are no segments.
ResilienceResult mask_and_score(std::span<const double> nominal, std::span<const double> aligned,
                                const std::vector<AnomalySegment>& segments, double dt);

/// trim_cyclic -> dtw -> align -> detect_anomalies -> mask_and_score.
ResilienceResult resilience_index(std::span<const double> nominal, std::span<const double> disrupted,
                                  ChannelId channel, double dt, const AnomalyConfig& cfg = {},
                                  double scale = 1.0, bool keep_curves = false);

/// `channel,R,As,Ad,n_segments,first_start,last_end`
std::string results_csv_header();
std::string results_csv_row(const ResilienceResult& r);
std::string to_csv(const std::vector<ResilienceResult>& results);

/// Per-stage dump: `k,nominal,aligned,masked_nominal,masked_aligned,in_segment`.
/// Requires a result computed with keep_curves.
std::string stage_dump_csv(const ResilienceResult& r);

}  // namespace hhil::resilience
