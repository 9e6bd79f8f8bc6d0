#pragma once

// Five-phase episodes (steady, under attack, shutdown, plant off, start-up),
// disrupted-curve splicing, Monte Carlo campaigns and report generation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hhil/attacks.hpp"
#include "hhil/config.hpp"
#include "hhil/operators.hpp"
#include "hhil/resilience.hpp"
#include "hhil/stats.hpp"

namespace hhil::runner {

using operators::OperatorTimes;
using plant::ChannelId;
using plant::Trace;

/// t0 < t1 < t2 < t3 < t4 < t_end. Discrete operator actions take effect at
/// the first 1 s sample boundary at or after their instant: shutdown starts
/// at ceil(t2), restart at ceil(t4).
struct EpisodeTimeline {
  double t0 = 0.0;
  double t1 = 0.0;           // attack start
  double detection = 0.0;    // t2 - t1
  double t3 = 0.0;           // end of shutdown (plant off)
  double restoration = 0.0;  // t4 - t3
  double t_end = 0.0;        // re-settled

  double t2() const { return t1 + detection; }
  double t4() const { return t3 + restoration; }
  std::size_t shutdown_sample() const;  // ceil(t2)
  std::size_t restart_sample() const;   // ceil(t4)
  bool ordered() const;

  friend bool operator==(const EpisodeTimeline&, const EpisodeTimeline&) = default;
};

/// Performance levels per channel: P_s at t1, P_d the largest excursion from
/// P_s while under attack, P_0 at t3.
struct PhaseMarkers {
  std::array<double, plant::kChannelCount> steady{};
  std::array<double, plant::kChannelCount> degraded{};
  std::array<double, plant::kChannelCount> off{};
};

struct EpisodeResult {
  Trace trace;  // true values, 1 Hz from t0
  EpisodeTimeline timeline;
  PhaseMarkers markers;
  bool overflow = false;
};

/// Everything an episode needs that does not change between iterations.
struct EpisodeSetup {
  WorkbenchConfig config;
  plant::SettledState settled;
  attacks::AttackScenario attack;
  Trace nominal;  // quantized steady recording

  static EpisodeSetup prepare(const WorkbenchConfig& cfg, int scenario);
  static EpisodeSetup prepare(const WorkbenchConfig& cfg, const attacks::AttackScenario& attack);
};

/// Steady recording of `seconds` samples from the settled state.
Trace record_nominal(const plant::LoopConfig& loop, const plant::SettledState& settled, std::size_t seconds);

/// Generative episode. Throws ValidationError for non-positive operator times.
EpisodeResult run_episode(const EpisodeSetup& setup, const OperatorTimes& times);

/// Phase-labeled recorded segments used to splice disrupted curves.
struct SegmentLibrary {
  double t1 = 0.0;
  OperatorTimes reference;                    // times of the full recording
  Trace steady;                               // [t0, t1]
  Trace under_attack;                         // [t1, t1 + reference.detection rounded up]
  std::vector<plant::PlantState> attack_states;  // parallel to under_attack, may be empty
  Trace startup;                              // from the restart sample to re-settled
  Trace recorded;                             // the full reference episode
};

/// Records a library with the plant model: the under-attack segment covers
/// `max_detection` seconds and the reference restoration is `restoration`.
SegmentLibrary record_library(const EpisodeSetup& setup, double max_detection, double restoration);

void save_library(const SegmentLibrary& lib, const std::string& dir);
/// Loads steady.csv, under_attack.csv, startup.csv, recorded.csv and
/// library.ini. Throws Error naming any missing phase segment.
SegmentLibrary load_library(const std::string& dir);

class ContinuityError : public Error {
 public:
  using Error::Error;
};

/// Splice: under-attack segment truncated at ceil(t2), shutdown re-simulated
/// from that state, plant off held for the restoration time, recorded start-up
/// appended. Throws ContinuityError when a junction jumps by more than 1% of
/// the channel scale.
EpisodeResult assemble_disrupted_curve(const SegmentLibrary& lib, const OperatorTimes& times,
                                       const WorkbenchConfig& cfg);

/// Quantizes both traces to their CSV form and scores all nine channels.
std::vector<resilience::ResilienceResult> score(const Trace& nominal, const Trace& disrupted,
                                                const WorkbenchConfig& cfg);

enum class CampaignMode { Generative, Splice };
std::string_view to_string(CampaignMode m);
CampaignMode parse_campaign_mode(std::string_view s);

struct MonteCarloConfig {
  std::size_t iterations = 500;
  std::uint64_t seed = 0;
  int scenario = 1;
  operators::Persona persona = operators::Persona::Expert;
  CampaignMode mode = CampaignMode::Generative;
  unsigned workers = 1;
  bool keep_traces = true;
};

struct IterationResult {
  std::size_t index = 0;
  bool ok = false;
  std::string error;
  OperatorTimes times;
  EpisodeTimeline timeline;
  Trace trace;
  std::vector<resilience::ResilienceResult> resilience;  // kAllChannels order

  double R(ChannelId c) const;
};

struct CampaignInputs {
  const EpisodeSetup* setup = nullptr;
  operators::PersonaSampler detection;
  operators::PersonaSampler restoration;
  std::vector<SegmentLibrary> libraries;  // splice mode only
};

/// Iteration k draws from mt19937_64(seed + k): detection, then restoration,
/// then a library index in splice mode. Failed iterations are kept and marked.
/// Result order is the iteration order for any worker count.
std::vector<IterationResult> monte_carlo(const MonteCarloConfig& mc, const CampaignInputs& inputs);

struct Group {
  std::string label;
  std::vector<IterationResult> results;
};

struct ReportBundle {
  std::string summary_csv;  // group,metric,n,mean,sd,min,q25,q50,q75,max,iqr
  std::string tests_csv;    // group_a,group_b,metric,test,statistic,p,n,m
  std::string scatter_csv;  // group,iteration,detection,restoration,R_water_output,R_air_input
  std::string text;
};

/// Metrics: detection, restoration, R per channel, water_output (= R of QOUT)
/// and air_input (= R of S7). Shapiro-Wilk per group and metric, Mann-Whitney
/// between every pair of groups. Failed iterations are excluded.
ReportBundle report(const std::vector<Group>& groups);

/// Values of one metric over the successful iterations of a group.
std::vector<double> metric_values(const Group& g, const std::string& metric);
std::vector<std::string> metric_names();

/// Writes iterations/NNN/{trace,resilience}.csv, iterations.csv,
/// resilience.csv, nominal.csv, config.ini, campaign.ini and the report files.
void write_campaign(const std::string& dir, const MonteCarloConfig& mc, const EpisodeSetup& setup,
                    const std::vector<IterationResult>& results);

/// Reads iterations.csv and resilience.csv back (traces are not loaded).
Group load_campaign(const std::string& dir);

/// Recomputes resilience from the stored traces and nominal, rewrites the
/// resilience and report files and returns the refreshed group.
Group analyze(const std::string& dir);

void write_report(const std::string& dir, const ReportBundle& bundle, const std::string& format);

/// Shortest decimal text that parses back to the same double.
std::string exact_text(double v);

}  // namespace hhil::runner
