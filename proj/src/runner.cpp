#include "hhil/runner.hpp"

#include <algorithm>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace hhil::runner {

namespace fs = std::filesystem;
using plant::LoopConfig;
using plant::LoopState;
using plant::PlantState;

namespace {

std::size_t ceil_sample(double t) {
  if (!(t >= 0.0)) throw ValidationError("episode instants must be non-negative");
  return static_cast<std::size_t>(std::ceil(t));
}

const plant::ValveVector kShutdownCommands{0.0, 1.0, 1.0};

LoopConfig loop_config(const WorkbenchConfig& cfg) { return {cfg.params, cfg.setpoints, cfg.gains}; }

// Closed loop on the reporting path, sampled at 1 Hz from t0 = 0.
struct AttackRun {
  Trace trace{0.0, 1.0};
  LoopState state;
  std::vector<PlantState> states;  // one per sample from t1, when kept
};

AttackRun run_attack(const EpisodeSetup& setup, std::size_t until_sample, bool keep_states) {
  const auto loop = loop_config(setup.config);
  const std::size_t steps = plant::steps_per_sample(setup.config.params);
  const double dt = setup.config.params.time_step;
  const std::size_t t1_sample = ceil_sample(setup.attack.start);
  AttackRun run;
  run.state = {setup.settled.plant, setup.settled.controller, automation::ControlMode::Monitoring};
  run.state.plant.t = 0.0;
  attacks::ReportingPath path(setup.attack);
  run.trace.append(run.state.plant);
  if (keep_states && t1_sample == 0) run.states.push_back(run.state.plant);
  for (std::size_t sample = 0; sample < until_sample; ++sample) {
    for (std::size_t i = 0; i < steps; ++i) {
      const double t = static_cast<double>(sample) + static_cast<double>(i) * dt;
      run.state = plant::tick(run.state, path.report(run.state.plant, t), loop);
    }
    run.trace.append(run.state.plant);
    if (keep_states && sample + 1 >= t1_sample) run.states.push_back(run.state.plant);
  }
  return run;
}

struct Tail {
  Trace shutdown;
  Trace off;
  Trace startup;
  double t3 = 0.0;
};

// Shutdown from the state at the shutdown sample, plant off for the
// restoration time, then start-up (simulated, or the recorded one).
Tail finish(const PlantState& at_shutdown, EpisodeTimeline& timeline, const WorkbenchConfig& cfg,
            const Trace* recorded_startup) {
  Tail tail;
  auto shutdown = plant::shutdown_trajectory(at_shutdown, cfg.params);
  tail.shutdown = std::move(shutdown.trace);
  timeline.t3 = static_cast<double>(timeline.shutdown_sample() + shutdown.seconds);

  const std::size_t steps = plant::steps_per_sample(cfg.params);
  const std::size_t off_samples = timeline.restart_sample() - static_cast<std::size_t>(timeline.t3);
  PlantState s = shutdown.final;
  tail.off = Trace(timeline.t3, 1.0);
  tail.off.append(s);
  for (std::size_t k = 0; k < off_samples; ++k) {
    for (std::size_t i = 0; i < steps; ++i) s = plant::step(s, kShutdownCommands, cfg.params);
    tail.off.append(s);
  }

  if (recorded_startup) {
    tail.startup = *recorded_startup;
  } else {
    // Recalibrated channel, automation re-enabled from Exclusivity: PID reset.
    LoopState from{s, automation::ControllerState{}, automation::ControlMode::Monitoring};
    tail.startup = plant::startup_trajectory(from, loop_config(cfg), cfg.settle).trace;
  }
  return tail;
}

void check_junction(const Trace& before, const Trace& after, const automation::Setpoints& sp, const char* where) {
  const auto a = before.row(before.size() - 1);
  const auto b = after.row(0);
  for (auto c : plant::kAllChannels) {
    const auto i = plant::index(c);
    if (std::abs(a[i] - b[i]) > 0.01 * plant::channel_scale(c, sp)) {
      throw ContinuityError(std::string("splice: ") + where + " junction jumps on " +
                            std::string(plant::to_string(c)));
    }
  }
}

PhaseMarkers markers(const Trace& trace, const EpisodeTimeline& tl) {
  PhaseMarkers m;
  const std::size_t t1 = ceil_sample(tl.t1);
  const std::size_t t2 = tl.shutdown_sample();
  const auto t3 = static_cast<std::size_t>(tl.t3);
  m.steady = trace.row(t1);
  m.off = trace.row(t3);
  for (auto c : plant::kAllChannels) {
    const auto i = plant::index(c);
    const auto x = trace.channel(c);
    double best = x[t1];
    for (std::size_t k = t1; k <= t2; ++k) {
      if (std::abs(x[k] - m.steady[i]) > std::abs(best - m.steady[i])) best = x[k];
    }
    m.degraded[i] = best;
  }
  return m;
}

EpisodeResult assemble(Trace trace, const Tail& tail, EpisodeTimeline tl, const WorkbenchConfig& cfg) {
  trace.extend(tail.shutdown, 1);
  trace.extend(tail.off, 1);
  trace.extend(tail.startup, 1);
  tl.t_end = static_cast<double>(trace.size() - 1);
  EpisodeResult r;
  r.markers = markers(trace, tl);
  const auto level = trace.channel(ChannelId::S6);
  r.overflow = *std::max_element(level.begin(), level.end()) >= cfg.params.tank_height;
  r.timeline = tl;
  r.trace = std::move(trace);
  return r;
}

EpisodeTimeline start_timeline(double t1, const OperatorTimes& times) {
  operators::validate(times);
  EpisodeTimeline tl;
  tl.t1 = t1;
  tl.detection = times.detection;
  tl.restoration = times.restoration;
  return tl;
}

Trace slice(const Trace& src, std::size_t from, std::size_t to) {
  Trace out(src.time_at(from), src.period());
  for (std::size_t k = from; k <= to; ++k) out.append(src.row(k));
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

}  // namespace

std::size_t EpisodeTimeline::shutdown_sample() const { return ceil_sample(t2()); }
std::size_t EpisodeTimeline::restart_sample() const { return ceil_sample(t4()); }

bool EpisodeTimeline::ordered() const {
  return t0 < t1 && t1 < t2() && t2() < t3 && t3 < t4() && t4() < t_end;
}

Trace record_nominal(const LoopConfig& loop, const plant::SettledState& settled, std::size_t seconds) {
  const std::size_t steps = plant::steps_per_sample(loop.params);
  LoopState s{settled.plant, settled.controller, automation::ControlMode::Monitoring};
  Trace trace(0.0, 1.0);
  trace.append(s.plant);
  for (std::size_t k = 1; k < seconds; ++k) {
    for (std::size_t i = 0; i < steps; ++i) s = plant::tick(s, plant::truthful(s.plant), loop);
    trace.append(s.plant);
  }
  return plant::quantize(trace);
}

EpisodeSetup EpisodeSetup::prepare(const WorkbenchConfig& cfg, int scenario) {
  const auto settled = plant::steady_state(cfg.params, cfg.setpoints, cfg.gains);
  const auto ref = attacks::reference_values(cfg.setpoints, settled.plant);
  return prepare(cfg, attacks::preset(scenario, ref, cfg.episode.attack_start, cfg.episode.spoof_fraction));
}

EpisodeSetup EpisodeSetup::prepare(const WorkbenchConfig& cfg, const attacks::AttackScenario& attack) {
  validate(cfg);
  attacks::validate(attack);
  EpisodeSetup s;
  s.config = cfg;
  s.settled = plant::steady_state(cfg.params, cfg.setpoints, cfg.gains);
  s.attack = attack;
  s.nominal = record_nominal(loop_config(cfg), s.settled,
                             static_cast<std::size_t>(std::llround(cfg.episode.nominal_duration)));
  return s;
}

EpisodeResult run_episode(const EpisodeSetup& setup, const OperatorTimes& times) {
  auto tl = start_timeline(setup.attack.start, times);
  auto run = run_attack(setup, tl.shutdown_sample(), false);
  const auto tail = finish(run.state.plant, tl, setup.config, nullptr);
  return assemble(std::move(run.trace), tail, tl, setup.config);
}

SegmentLibrary record_library(const EpisodeSetup& setup, double max_detection, double restoration) {
  SegmentLibrary lib;
  lib.t1 = setup.attack.start;
  lib.reference = {max_detection, restoration, operators::Provenance::PersonaDraw};
  auto tl = start_timeline(lib.t1, lib.reference);
  const std::size_t t1s = ceil_sample(lib.t1);
  const std::size_t ts = tl.shutdown_sample();
  auto run = run_attack(setup, ts, true);
  lib.steady = slice(run.trace, 0, t1s);
  lib.under_attack = slice(run.trace, t1s, ts);
  lib.attack_states = std::move(run.states);
  const auto tail = finish(run.state.plant, tl, setup.config, nullptr);
  lib.startup = tail.startup;
  lib.recorded = assemble(std::move(run.trace), tail, tl, setup.config).trace;
  return lib;
}

void save_library(const SegmentLibrary& lib, const std::string& dir) {
  fs::create_directories(dir);
  plant::write_trace(lib.steady, (fs::path(dir) / "steady.csv").string());
  plant::write_trace(lib.under_attack, (fs::path(dir) / "under_attack.csv").string());
  plant::write_trace(lib.startup, (fs::path(dir) / "startup.csv").string());
  plant::write_trace(lib.recorded, (fs::path(dir) / "recorded.csv").string());
  write_file(fs::path(dir) / "library.ini", "[library]\nt1 = " + exact_text(lib.t1) +
                                                "\ndetection = " + exact_text(lib.reference.detection) +
                                                "\nrestoration = " + exact_text(lib.reference.restoration) + "\n");
}

SegmentLibrary load_library(const std::string& dir) {
  SegmentLibrary lib;
  auto segment = [&](const char* name) {
    const auto p = fs::path(dir) / name;
    if (!fs::exists(p)) throw Error(std::string("splice library: missing phase segment ") + name);
    return plant::read_trace(p.string());
  };
  lib.steady = segment("steady.csv");
  lib.under_attack = segment("under_attack.csv");
  lib.startup = segment("startup.csv");
  lib.recorded = segment("recorded.csv");
  const auto meta = fs::path(dir) / "library.ini";
  if (!fs::exists(meta)) throw Error("splice library: missing library.ini");
  boost::property_tree::ptree tree;
  boost::property_tree::read_ini(meta.string(), tree);
  lib.t1 = tree.get<double>("library.t1");
  lib.reference.detection = tree.get<double>("library.detection");
  lib.reference.restoration = tree.get<double>("library.restoration");
  return lib;
}

EpisodeResult assemble_disrupted_curve(const SegmentLibrary& lib, const OperatorTimes& times,
                                       const WorkbenchConfig& cfg) {
  if (lib.steady.empty() || lib.under_attack.empty() || lib.startup.empty()) {
    throw Error("splice library: missing phase segment");
  }
  auto tl = start_timeline(lib.t1, times);
  const std::size_t t1s = ceil_sample(lib.t1);
  const std::size_t ts = tl.shutdown_sample();
  if (lib.steady.size() != t1s + 1) throw Error("splice library: steady segment does not end at t1");
  const std::size_t offset = ts - t1s;
  if (offset >= lib.under_attack.size()) {
    throw Error("splice library: under-attack segment shorter than the detection time");
  }
  check_junction(lib.steady, lib.under_attack, cfg.setpoints, "steady/under-attack");

  Trace trace = lib.steady;
  trace.extend(slice(lib.under_attack, 0, offset), 1);
  PlantState entry;
  if (lib.attack_states.size() == lib.under_attack.size()) {
    entry = lib.attack_states[offset];
  } else {
    const auto row = lib.under_attack.row(offset);
    using plant::index;
    entry = plant::make_state(cfg.params, static_cast<double>(ts),
                              {row[index(ChannelId::AV1)], row[index(ChannelId::AV2)], row[index(ChannelId::AV3)]},
                              row[index(ChannelId::S6)], row[index(ChannelId::S5)]);
  }
  const auto tail = finish(entry, tl, cfg, &lib.startup);
  check_junction(tail.off, tail.startup, cfg.setpoints, "plant-off/start-up");
  return assemble(std::move(trace), tail, tl, cfg);
}

std::vector<resilience::ResilienceResult> score(const Trace& nominal, const Trace& disrupted,
                                                const WorkbenchConfig& cfg) {
  const auto nom = plant::quantize(nominal);
  const auto dis = plant::quantize(disrupted);
  std::vector<resilience::ResilienceResult> out;
  out.reserve(plant::kChannelCount);
  for (auto c : plant::kAllChannels) {
    out.push_back(resilience::resilience_index(nom.channel(c), dis.channel(c), c, dis.period(), cfg.anomaly,
                                               plant::channel_scale(c, cfg.setpoints)));
  }
  return out;
}

std::string_view to_string(CampaignMode m) { return m == CampaignMode::Generative ? "generative" : "splice"; }

CampaignMode parse_campaign_mode(std::string_view s) {
  if (s == "generative") return CampaignMode::Generative;
  if (s == "splice") return CampaignMode::Splice;
  throw ValidationError("unknown campaign mode '" + std::string(s) + "'");
}

double IterationResult::R(ChannelId c) const {
  for (const auto& r : resilience) {
    if (r.channel == c) return r.R;
  }
  throw Error("iteration " + std::to_string(index) + " has no result for " + std::string(plant::to_string(c)));
}

std::vector<IterationResult> monte_carlo(const MonteCarloConfig& mc, const CampaignInputs& inputs) {
  if (mc.iterations < 1) throw ValidationError("monte_carlo: iterations must be at least 1");
  if (!inputs.setup) throw ValidationError("monte_carlo: missing episode setup");
  if (mc.mode == CampaignMode::Splice && inputs.libraries.empty()) {
    throw ValidationError("monte_carlo: splice mode needs at least one segment library");
  }
  const auto& setup = *inputs.setup;
  std::vector<IterationResult> results(mc.iterations);

  auto run_one = [&](std::size_t k) {
    IterationResult& r = results[k];
    r.index = k;
    std::mt19937_64 rng(mc.seed + k);
    r.times.detection = operators::sample_persona(inputs.detection, rng);
    r.times.restoration = operators::sample_persona(inputs.restoration, rng);
    r.times.provenance = operators::Provenance::PersonaDraw;
    try {
      EpisodeResult ep;
      if (mc.mode == CampaignMode::Splice) {
        const auto pick = static_cast<std::size_t>(rng() % inputs.libraries.size());
        ep = assemble_disrupted_curve(inputs.libraries[pick], r.times, setup.config);
      } else {
        ep = run_episode(setup, r.times);
      }
      r.timeline = ep.timeline;
      auto trace = plant::quantize(ep.trace);
      r.resilience = score(setup.nominal, trace, setup.config);
      if (mc.keep_traces) r.trace = std::move(trace);
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(mc.workers, static_cast<unsigned>(mc.iterations)));
  if (workers == 1) {
    for (std::size_t k = 0; k < mc.iterations; ++k) run_one(k);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < mc.iterations; k = next++) run_one(k);
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

std::vector<std::string> metric_names() {
  std::vector<std::string> names{"detection", "restoration"};
  for (auto c : plant::kAllChannels) names.push_back("R_" + std::string(plant::to_string(c)));
  names.push_back("water_output");
  names.push_back("air_input");
  return names;
}

std::vector<double> metric_values(const Group& g, const std::string& metric) {
  std::vector<double> out;
  for (const auto& r : g.results) {
    if (!r.ok) continue;
    if (metric == "detection") {
      out.push_back(r.times.detection);
    } else if (metric == "restoration") {
      out.push_back(r.times.restoration);
    } else if (metric == "water_output") {
      out.push_back(r.R(ChannelId::QOUT));
    } else if (metric == "air_input") {
      out.push_back(r.R(ChannelId::S7));
    } else if (metric.starts_with("R_")) {
      const auto c = plant::parse_channel(metric.substr(2));
      if (!c) throw ValidationError("unknown metric '" + metric + "'");
      out.push_back(r.R(*c));
    } else {
      throw ValidationError("unknown metric '" + metric + "'");
    }
  }
  return out;
}

std::string exact_text(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string pvalue(double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", p);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

ReportBundle report(const std::vector<Group>& groups) {
  ReportBundle b;
  b.summary_csv = "group,metric,n,mean,sd,min,q25,q50,q75,max,iqr\n";
  b.tests_csv = "group_a,group_b,metric,test,statistic,p,n,m\n";
  b.scatter_csv = "group,iteration,detection,restoration,R_water_output,R_air_input\n";
  const auto names = metric_names();
  std::ostringstream text;

  for (const auto& g : groups) {
    std::vector<std::pair<std::string, stats::SummaryStats>> rows;
    for (const auto& m : names) {
      const auto values = metric_values(g, m);
      if (values.empty()) continue;
      const auto s = stats::summarize(values);
      rows.emplace_back(m, s);
      b.summary_csv += g.label + ',' + m + ',' + std::to_string(s.n) + ',' + plant::format_fixed(s.mean) + ',' +
                       plant::format_fixed(s.sd) + ',' + plant::format_fixed(s.min) + ',' +
                       plant::format_fixed(s.q25) + ',' + plant::format_fixed(s.q50) + ',' +
                       plant::format_fixed(s.q75) + ',' + plant::format_fixed(s.max) + ',' +
                       plant::format_fixed(s.iqr) + '\n';
      if (values.size() >= 3 && values.size() <= 5000 &&
          *std::min_element(values.begin(), values.end()) != *std::max_element(values.begin(), values.end())) {
        const auto t = stats::shapiro_wilk(values);
        b.tests_csv += g.label + ",," + m + ',' + t.test + ',' + exact_text(t.statistic) + ',' + exact_text(t.p) +
                       ',' + std::to_string(t.n) + ",0\n";
      }
    }
    for (const auto& r : g.results) {
      if (!r.ok) continue;
      b.scatter_csv += g.label + ',' + std::to_string(r.index) + ',' + exact_text(r.times.detection) + ',' +
                       exact_text(r.times.restoration) + ',' + plant::format_fixed(r.R(ChannelId::QOUT)) + ',' +
                       plant::format_fixed(r.R(ChannelId::S7)) + '\n';
    }

    std::size_t failed = 0;
    for (const auto& r : g.results) failed += r.ok ? 0 : 1;
    text << "== " << g.label << " (" << g.results.size() << " iterations, " << failed << " failed)\n";
    text << pad("", 16);
    for (const auto& [m, s] : rows) text << pad(m, 14);
    text << '\n';
    const char* labels[] = {"Mean", "Std. dev.", "Minimum", "25%", "50%", "75%", "Maximum"};
    for (int row = 0; row < 7; ++row) {
      text << pad(labels[row], 16);
      for (const auto& [m, s] : rows) {
        const double v[] = {s.mean, s.sd, s.min, s.q25, s.q50, s.q75, s.max};
        text << pad(sci(v[row]), 14);
      }
      text << '\n';
    }
    text << '\n';
  }

  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      text << "== Mann-Whitney p-values, " << groups[i].label << " vs " << groups[j].label << '\n';
      for (const auto& m : names) {
        const auto a = metric_values(groups[i], m);
        const auto c = metric_values(groups[j], m);
        if (a.empty() || c.empty()) continue;
        const auto t = stats::mann_whitney_u(a, c);
        b.tests_csv += groups[i].label + ',' + groups[j].label + ',' + m + ',' + t.test + ',' +
                       exact_text(t.statistic) + ',' + exact_text(t.p) + ',' + std::to_string(t.n) + ',' +
                       std::to_string(t.m) + '\n';
        text << pad(m, 16) << pad(pvalue(t.p), 14) << '\n';
      }
      text << '\n';
    }
  }
  b.text = text.str();
  return b;
}

namespace {

std::string iteration_dir_name(std::size_t k, std::size_t total) {
  std::size_t width = 3;
  for (std::size_t v = total > 0 ? total - 1 : 0; v >= 1000; v /= 10) ++width;
  std::string s = std::to_string(k);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

std::string clean(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

std::string iterations_csv(const std::vector<IterationResult>& results) {
  std::string out = "iteration,status,detection,restoration,t1,t2,t3,t4,t_end,error\n";
  for (const auto& r : results) {
    out += std::to_string(r.index) + ',' + (r.ok ? "ok" : "failed") + ',' + exact_text(r.times.detection) + ',' +
           exact_text(r.times.restoration) + ',';
    if (r.ok) {
      const auto& tl = r.timeline;
      out += exact_text(tl.t1) + ',' + exact_text(tl.t2()) + ',' + exact_text(tl.t3) + ',' + exact_text(tl.t4()) +
             ',' + exact_text(tl.t_end) + ",\n";
    } else {
      out += ",,,,," + clean(r.error) + '\n';
    }
  }
  return out;
}

std::string campaign_resilience_csv(const std::vector<IterationResult>& results) {
  std::string out = "iteration," + resilience::results_csv_header();
  for (const auto& r : results) {
    if (!r.ok) continue;
    for (const auto& res : r.resilience) out += std::to_string(r.index) + ',' + resilience::results_csv_row(res);
  }
  return out;
}

void write_resilience_files(const fs::path& dir, const std::vector<IterationResult>& results) {
  write_file(dir / "resilience.csv", campaign_resilience_csv(results));
  for (const auto& r : results) {
    if (!r.ok) continue;
    const auto sub = dir / "iterations" / iteration_dir_name(r.index, results.size());
    fs::create_directories(sub);
    write_file(sub / "resilience.csv", resilience::to_csv(r.resilience));
  }
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p, const std::string& header) {
  const auto text = read_file(p);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw ParseError(p.string() + ": unexpected header", 1);
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto at = line.find(',', start);
      fields.push_back(line.substr(start, at == std::string::npos ? std::string::npos : at - start));
      if (at == std::string::npos) break;
      start = at + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError("malformed number '" + s + "'", 0);
  }
  return v;
}

}  // namespace

void write_report(const std::string& dir, const ReportBundle& bundle, const std::string& format) {
  if (format == "csv") {
    write_file(fs::path(dir) / "summary.csv", bundle.summary_csv);
    write_file(fs::path(dir) / "tests.csv", bundle.tests_csv);
    write_file(fs::path(dir) / "scatter.csv", bundle.scatter_csv);
  } else if (format == "txt") {
    write_file(fs::path(dir) / "report.txt", bundle.text);
  } else {
    throw ValidationError("unknown report format '" + format + "'");
  }
}

void write_campaign(const std::string& dir, const MonteCarloConfig& mc, const EpisodeSetup& setup,
                    const std::vector<IterationResult>& results) {
  const fs::path root(dir);
  fs::create_directories(root / "iterations");
  write_file(root / "config.ini", to_ini(setup.config));
  write_file(root / "campaign.ini", "[campaign]\nscenario = " + std::to_string(mc.scenario) +
                                        "\npersona = " + std::string(operators::to_string(mc.persona)) +
                                        "\nseed = " + std::to_string(mc.seed) +
                                        "\niterations = " + std::to_string(mc.iterations) +
                                        "\nmode = " + std::string(to_string(mc.mode)) + "\n");
  plant::write_trace(setup.nominal, (root / "nominal.csv").string());
  write_file(root / "iterations.csv", iterations_csv(results));
  for (const auto& r : results) {
    if (!r.ok || r.trace.empty()) continue;
    const auto sub = root / "iterations" / iteration_dir_name(r.index, results.size());
    fs::create_directories(sub);
    plant::write_trace(r.trace, (sub / "trace.csv").string());
  }
  write_resilience_files(root, results);
  Group g{std::string(operators::to_string(mc.persona)), results};
  write_report(dir, report({g}), "csv");
}

Group load_campaign(const std::string& dir) {
  const fs::path root(dir);
  Group g;
  g.label = root.filename().string();
  if (g.label.empty()) g.label = root.parent_path().filename().string();
  const auto campaign = root / "campaign.ini";
  if (fs::exists(campaign)) {
    boost::property_tree::ptree tree;
    boost::property_tree::read_ini(campaign.string(), tree);
    g.label = tree.get<std::string>("campaign.persona", g.label);
  }
  for (const auto& f : read_rows(root / "iterations.csv",
                                 "iteration,status,detection,restoration,t1,t2,t3,t4,t_end,error")) {
    if (f.size() != 10) throw ParseError("iterations.csv: expected 10 fields", 0);
    IterationResult r;
    r.index = static_cast<std::size_t>(parse_number(f[0]));
    r.ok = f[1] == "ok";
    r.times.detection = parse_number(f[2]);
    r.times.restoration = parse_number(f[3]);
    if (r.ok) {
      r.timeline.t1 = parse_number(f[4]);
      r.timeline.detection = r.times.detection;
      r.timeline.t3 = parse_number(f[6]);
      r.timeline.restoration = r.times.restoration;
      r.timeline.t_end = parse_number(f[8]);
    } else {
      r.error = f[9];
    }
    g.results.push_back(std::move(r));
  }
  std::sort(g.results.begin(), g.results.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  for (const auto& f : read_rows(root / "resilience.csv", "iteration," +
                                                              resilience::results_csv_header().substr(
                                                                  0, resilience::results_csv_header().size() - 1))) {
    if (f.size() != 8) throw ParseError("resilience.csv: expected 8 fields", 0);
    const auto k = static_cast<std::size_t>(parse_number(f[0]));
    auto it = std::find_if(g.results.begin(), g.results.end(), [&](const auto& r) { return r.index == k; });
    if (it == g.results.end()) throw ParseError("resilience.csv: unknown iteration " + f[0], 0);
    resilience::ResilienceResult res;
    const auto c = plant::parse_channel(f[1]);
    if (!c) throw ParseError("resilience.csv: unknown channel '" + f[1] + "'", 0);
    res.channel = *c;
    res.R = parse_number(f[2]);
    res.As = parse_number(f[3]);
    res.Ad = parse_number(f[4]);
    // Only the extent of the segment list survives the CSV.
    const auto n = static_cast<std::size_t>(parse_number(f[5]));
    if (n > 0) {
      res.segments.resize(n);
      res.segments.front().start = static_cast<std::size_t>(parse_number(f[6]));
      res.segments.back().end = static_cast<std::size_t>(parse_number(f[7]));
    }
    res.negative = res.R < 0.0;
    it->resilience.push_back(std::move(res));
  }
  return g;
}

Group analyze(const std::string& dir) {
  const fs::path root(dir);
  const auto cfg = load_config((root / "config.ini").string());
  const auto nominal = plant::read_trace((root / "nominal.csv").string());
  Group g = load_campaign(dir);
  for (auto& r : g.results) {
    if (!r.ok) continue;
    const auto trace =
        plant::read_trace((root / "iterations" / iteration_dir_name(r.index, g.results.size()) / "trace.csv").string());
    r.resilience = score(nominal, trace, cfg);
  }
  write_resilience_files(root, g.results);
  write_report(dir, report({g}), "csv");
  return g;
}

}  // namespace hhil::runner
