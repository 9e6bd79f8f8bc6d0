// Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
// budget. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "hhil/attacks.hpp"
#include "hhil/closed_loop.hpp"
#include "hhil/operators.hpp"
#include "hhil/resilience.hpp"
#include "hhil/runner.hpp"
#include "hhil/stats.hpp"

using namespace hhil;
namespace fs = std::filesystem;
using plant::ChannelId;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_budget = elapsed < budget_s;
  const bool pass = o.pass && in_budget;
  if (!pass) ++failures;
  std::printf("[%s] %2d %-34s %7.2f s (budget %5.0f s)  %s%s\n", pass ? "PASS" : "FAIL", id, name, elapsed, budget_s,
              o.detail.c_str(), in_budget ? "" : "  [over budget]");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// 1. Resilience index against the brute-force pipeline.
Outcome index_oracle() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int with_segments = 0;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> nom, dis;
    resilience::AnomalyConfig cfg;
    if (i < 25) {
      // short pairs, scored through path enumeration; a single sample has no area
      cfg.min_run = 1;
      cfg.quiet_run = 2;
      nom.resize(2 + rng() % 5);
      dis.resize(2 + rng() % 5);
      for (auto& x : nom) x = 1.0 + u(rng);
      for (auto& x : dis) x = 0.5 + 1.5 * u(rng);
    } else {
      const std::size_t period = 150 + rng() % 150;
      const double amp = 0.3 * u(rng);
      for (std::size_t k = 0; k < period; ++k) nom.push_back(2.0 + amp * std::sin(2 * std::numbers::pi * k / period));
      const std::size_t n = 400 + rng() % 500;
      const std::size_t start = 100 + rng() % 150, width = 60 + rng() % 200;
      const double depth = 0.1 + 0.6 * u(rng);
      for (std::size_t k = 0; k < n; ++k) {
        double v = nom[k % period];
        if (k >= start && k < start + width) v *= 1.0 + depth * std::sin(std::numbers::pi * (k - start) / width);
        dis.push_back(v + 0.01 * (u(rng) - 0.5));
      }
    }
    const auto got = resilience::resilience_index(nom, dis, ChannelId::S6, 1.0, cfg);
    const auto want = oracle::resilience(nom, dis, 1.0, cfg.threshold, cfg.min_run, cfg.quiet_run, cfg.floor);
    if (got.segments.size() != want.segments.size()) return {false, "segment count differs on pair " + std::to_string(i)};
    with_segments += got.segments.empty() ? 0 : 1;
    const double rel = std::abs(got.R - want.R) / std::max(std::abs(want.R), 1e-300);
    worst = std::max(worst, rel);
  }
  return {worst <= 1e-9, fmt("max relative difference %.2e over 50 pairs", worst) + ", " +
                             std::to_string(with_segments) + " with segments"};
}

// 2. DTW against exhaustive enumeration, self cost and symmetry.
Outcome dtw_exactness() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> len(1, 6), val(-5, 5);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x(len(rng)), y(len(rng));
    for (auto& v : x) v = val(rng);
    for (auto& v : y) v = val(rng);
    mismatches += resilience::dtw(x, y).cost != oracle::dtw_enumerate(x, y).cost;
  }
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(1 + rng() % 60), y(1 + rng() % 60);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    bad += resilience::dtw(x, x).cost != 0.0;
    bad += resilience::dtw(x, y).cost != resilience::dtw(y, x).cost;
  }
  return {mismatches == 0 && bad == 0,
          std::to_string(mismatches) + "/200 cost mismatches, " + std::to_string(bad) + " self/symmetry failures"};
}

// 3. Anomaly rule on the handcrafted traces.
Outcome anomaly_rule() {
  struct Case {
    const char* name;
    std::size_t n;
    std::vector<std::pair<std::size_t, std::size_t>> above;
    std::vector<std::pair<std::size_t, std::size_t>> want;
  };
  const std::vector<Case> cases{
      {"run 200-259 then 600 quiet", 860, {{200, 259}}, {{200, 259}}},
      {"40-sample run", 800, {{200, 239}}, {}},
      {"gap of 100 merged", 1021, {{200, 259}, {360, 420}}, {{200, 420}}},
      {"gap of exactly 500 splits", 1320, {{100, 159}, {660, 719}}, {{100, 159}, {660, 719}}},
  };
  std::string detail;
  bool ok = true;
  for (const auto& c : cases) {
    std::vector<double> nom(c.n, 1.0), dis(c.n, 1.0);
    for (auto [a, b] : c.above) {
      for (std::size_t k = a; k <= b; ++k) dis[k] = 1.06;
    }
    const auto got = resilience::detect_anomalies(nom, dis);
    bool same = got.size() == c.want.size();
    for (std::size_t s = 0; same && s < got.size(); ++s) {
      same = got[s].start == c.want[s].first && got[s].end == c.want[s].second;
    }
    if (!same) {
      ok = false;
      detail += std::string(c.name) + " wrong; ";
    }
  }
  return {ok, ok ? "4/4 traces give the stated segments" : detail};
}

// 4. Persona fidelity.
Outcome persona_fidelity() {
  using operators::Persona;
  using operators::Phase;
  struct Published {
    Persona persona;
    int scenario;
    Phase phase;
    double mean;
  };
  const std::vector<Published> table{
      {Persona::Expert, 1, Phase::Detection, 261.798},   {Persona::Novice, 1, Phase::Detection, 433.982},
      {Persona::Expert, 1, Phase::Restoration, 30.716},  {Persona::Novice, 1, Phase::Restoration, 30.612},
      {Persona::Expert, 2, Phase::Detection, 238.170},   {Persona::Novice, 2, Phase::Detection, 288.622},
      {Persona::Expert, 2, Phase::Restoration, 1590.710}, {Persona::Novice, 2, Phase::Restoration, 1597.218},
  };
  const auto lib = operators::PersonaLibrary::defaults();
  double worst_anchor = 0.0, worst_mean = 0.0;
  std::uint64_t seed = 4000;
  for (const auto& row : table) {
    const auto& spec = lib.get(row.persona, row.scenario, row.phase);
    const auto sampler = operators::fit_persona(spec.anchors);
    std::mt19937_64 rng(seed++);
    std::vector<double> draws(10000);
    for (auto& x : draws) x = operators::sample_persona(sampler, rng);
    const auto s = stats::summarize(draws);
    const double got[5] = {s.min, s.q25, s.q50, s.q75, s.max};
    for (int q = 0; q < 5; ++q) worst_anchor = std::max(worst_anchor, std::abs(got[q] - spec.anchors[q]) / spec.anchors[q]);
    worst_mean = std::max(worst_mean, std::abs(s.mean - row.mean) / row.mean);
  }
  return {worst_anchor <= 0.02 && worst_mean <= 0.05,
          fmt("worst anchor error %.3f%%, worst mean error %.3f%% over 8 personas", 100 * worst_anchor,
              100 * worst_mean)};
}

runner::EpisodeSetup scenario_setup(int scenario) {
  WorkbenchConfig cfg;
  cfg.episode.nominal_duration = 1200;
  return runner::EpisodeSetup::prepare(cfg, scenario);
}

runner::CampaignInputs campaign_inputs(const runner::EpisodeSetup& setup, operators::Persona persona, int scenario) {
  const auto lib = operators::PersonaLibrary::defaults();
  return {&setup, operators::fit_persona(lib.get(persona, scenario, operators::Phase::Detection).anchors),
          operators::fit_persona(lib.get(persona, scenario, operators::Phase::Restoration).anchors), {}};
}

// 5. Expert and novice campaigns differ in detection, not restoration.
Outcome campaign_direction() {
  const auto setup = scenario_setup(1);
  runner::MonteCarloConfig mc;
  mc.iterations = 500;
  mc.keep_traces = false;
  mc.seed = 1;
  const auto expert = runner::monte_carlo(mc, campaign_inputs(setup, operators::Persona::Expert, 1));
  mc.seed = 1'000'001;
  const auto novice = runner::monte_carlo(mc, campaign_inputs(setup, operators::Persona::Novice, 1));
  const runner::Group e{"expert", expert}, n{"novice", novice};
  const auto ed = runner::metric_values(e, "detection"), nd = runner::metric_values(n, "detection");
  const auto er = runner::metric_values(e, "restoration"), nr = runner::metric_values(n, "restoration");
  if (ed.size() != 500 || nd.size() != 500) return {false, "failed iterations in a campaign"};
  const double p_det = stats::mann_whitney_u(ed, nd).p;
  const double p_res = stats::mann_whitney_u(er, nr).p;
  const bool direction = stats::summarize(ed).q50 < stats::summarize(nd).q50;
  return {p_det < 1e-10 && direction && p_res > 0.05,
          fmt("detection p = %.3e, restoration p = %.3f", p_det, p_res) +
              (direction ? ", expert median lower" : ", expert median NOT lower")};
}

struct OpenLoopRun {
  std::vector<plant::PlantState> samples;  // 1 Hz, index = seconds since t1
  std::vector<plant::ValveVector> commands;
  std::vector<automation::Reported> reported;
  plant::PlantState nominal;
};

// Settled plant, attack at t1, automation left alone for `seconds`.
OpenLoopRun attacked_without_operator(int scenario, int seconds) {
  const plant::LoopConfig cfg;
  const auto settled = plant::steady_state(cfg.params, cfg.setpoints, cfg.gains);
  const auto ref = attacks::reference_values(cfg.setpoints, settled.plant);
  const double t1 = 600.0;
  attacks::ReportingPath path(scenario == 1 ? attacks::scenario1(ref, t1) : attacks::scenario2(ref, t1));
  plant::LoopState s{settled.plant, settled.controller, automation::ControlMode::Monitoring};
  s.plant.t = 0.0;
  const auto steps = plant::steps_per_sample(cfg.params);
  OpenLoopRun out;
  out.nominal = settled.plant;
  for (int k = 0; k < static_cast<int>(t1) + seconds; ++k) {
    automation::Reported rep{};
    for (std::size_t i = 0; i < steps; ++i) {
      rep = path.report(s.plant, s.plant.t);
      s = plant::tick(s, rep, cfg);
    }
    if (k + 1 >= static_cast<int>(t1)) {
      out.samples.push_back(s.plant);
      out.commands.push_back(s.controller.last_command);
      out.reported.push_back(path.report(s.plant, s.plant.t));
    }
  }
  return out;
}

// 6. Scenario 1: level spoofed low.
Outcome scenario1_narrative() {
  const plant::LoopConfig cfg;
  const auto r = attacked_without_operator(1, 120);
  double min_av2 = 1.0;
  bool rising = true;
  double worst_s5 = 0.0;
  for (std::size_t k = 1; k < r.samples.size(); ++k) {
    min_av2 = std::min(min_av2, r.commands[k][1]);
    rising = rising && r.samples[k].level > r.samples[k - 1].level;
    const auto& s5 = r.reported[k][plant::index(ChannelId::S5)];
    if (s5) worst_s5 = std::max(worst_s5, std::abs(*s5 - cfg.setpoints.tank_pressure) / cfg.setpoints.tank_pressure);
  }
  const double q0 = r.nominal.value(ChannelId::QOUT);
  const double q = r.samples.back().value(ChannelId::QOUT);
  const double qout_drop = 1.0 - q / q0;
  const bool ok = min_av2 <= 0.05 && rising && worst_s5 <= 0.02 && qout_drop >= 0.5;
  return {ok, fmt("AV2 command min %.3f, ", min_av2) + (rising ? "S6 strictly rising, " : "S6 NOT strictly rising, ") +
                  fmt("reported S5 within %.2f%%, QOUT down %.1f%%", 100 * worst_s5, 100 * qout_drop)};
}

// 7. Scenario 2: tank pressure spoofed low.
Outcome scenario2_narrative() {
  const plant::LoopConfig cfg;
  const auto r = attacked_without_operator(2, 300);
  double min_av3 = 1.0, max_s5 = 0.0, min_s7 = r.nominal.value(ChannelId::S7);
  for (std::size_t k = 1; k < r.samples.size(); ++k) {
    min_av3 = std::min(min_av3, r.commands[k][2]);
    max_s5 = std::max(max_s5, r.samples[k].value(ChannelId::S5));
    min_s7 = std::min(min_s7, r.samples[k].value(ChannelId::S7));
  }
  const double s5_rise = max_s5 / cfg.setpoints.tank_pressure - 1.0;
  const double s7_drop = 1.0 - min_s7 / r.nominal.value(ChannelId::S7);
  return {min_av3 <= 0.05 && s5_rise >= 0.2 && s7_drop >= 0.3,
          fmt("AV3 command min %.3f, ", min_av3) +
              fmt("true S5 +%.1f%% over setpoint, S7 down %.1f%% within 300 s", 100 * s5_rise, 100 * s7_drop)};
}

double gas_law_residual(const plant::PlantState& s, const plant::PlantParams& p) {
  const double lhs = s.tank_pressure * plant::gas_volume(p, s.level);
  const double rhs = s.gas_moles * plant::kGasConstant * p.gas_temperature;
  return std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
}

// 8. Plant invariants under random valve schedules.
Outcome plant_invariants() {
  const plant::PlantParams p;
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_gas = 0.0, worst_conservation = 0.0;
  long violations = 0;
  for (int run = 0; run < 10000; ++run) {
    auto s = plant::make_state(p, 0.0, {u(rng), u(rng), u(rng)}, p.tank_height * u(rng),
                               p.atmospheric_pressure * (1.0 + 2.0 * u(rng)));
    plant::ValveVector cmd{u(rng), u(rng), u(rng)};
    for (int k = 0; k < 600; ++k) {
      if (k % 60 == 0) cmd = {u(rng), u(rng), u(rng)};
      s = plant::step(s, cmd, p);
      violations += s.level < 0.0 || s.level > p.tank_height || !(s.tank_pressure > 0.0);
      for (auto c : {ChannelId::S2, ChannelId::S7, ChannelId::QOUT}) violations += s.value(c) < 0.0;
      worst_gas = std::max(worst_gas, gas_law_residual(s, p));
    }
    // the same state with every valve shut must hold its water and gas
    auto closed = plant::make_state(p, 0.0, {0, 0, 0}, s.level, s.tank_pressure);
    const double h0 = closed.level, n0 = closed.gas_moles;
    for (int k = 0; k < 600; ++k) closed = plant::step(closed, {0, 0, 0}, p);
    worst_conservation = std::max(worst_conservation, std::abs(closed.level - h0) / std::max(h0, 1e-300));
    worst_conservation = std::max(worst_conservation, std::abs(closed.gas_moles - n0) / n0);
  }
  return {violations == 0 && worst_gas < 1e-9 && worst_conservation < 1e-9,
          std::to_string(violations) + " bound/flow violations, " +
              fmt("gas law residual %.1e, closed-valve residual %.1e", worst_gas, worst_conservation)};
}

// 9. Later detection, higher level peak and longer shutdown.
Outcome detection_depth() {
  const auto setup = scenario_setup(1);
  std::vector<double> peaks, drains;
  std::string detail;
  for (double det : {120.0, 240.0, 360.0, 480.0}) {
    const auto r = runner::run_episode(setup, {det, 30.0});
    const auto s6 = r.trace.channel(ChannelId::S6);
    const auto from = static_cast<std::size_t>(r.timeline.t1);
    const auto to = static_cast<std::size_t>(r.timeline.t3);
    peaks.push_back(*std::max_element(s6.begin() + from, s6.begin() + to + 1));
    drains.push_back(r.timeline.t3 - static_cast<double>(r.timeline.shutdown_sample()));
    detail += fmt("%g s: peak %.4f m, ", det, peaks.back()) + fmt("shutdown %g s; ", drains.back());
  }
  bool ok = true;
  for (std::size_t i = 1; i < peaks.size(); ++i) ok = ok && peaks[i] > peaks[i - 1] && drains[i] > drains[i - 1];
  return {ok, detail};
}

// 10. Statistics oracles.
Outcome statistics_oracles() {
  std::mt19937_64 rng(1010);
  std::uniform_int_distribution<int> size(1, 8), val(0, 9);
  int mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> a(size(rng)), b(size(rng));
    for (auto& x : a) x = val(rng);
    for (auto& x : b) x = val(rng);
    const auto got = stats::mann_whitney_u(a, b);
    const auto want = oracle::mann_whitney_exact(a, b);
    mismatches += got.statistic != want.U || std::abs(got.p - want.p) > 1e-12;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  int rejected_normal = 0, rejected_uniform = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> v(50);
    for (auto& x : v) x = normal(rng);
    rejected_normal += stats::shapiro_wilk(v).p < 0.05;
  }
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> v(500);
    for (auto& x : v) x = uniform(rng);
    rejected_uniform += stats::shapiro_wilk(v).p < 0.05;
  }
  const double rn = rejected_normal / 1000.0, ru = rejected_uniform / 1000.0;
  return {mismatches == 0 && rn >= 0.03 && rn <= 0.07 && ru >= 0.99,
          std::to_string(mismatches) + "/500 exact mismatches, " +
              fmt("normal rejection %.1f%%, uniform rejection %.1f%%", 100 * rn, 100 * ru)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 11. Same seed, same bytes, any worker count.
Outcome campaign_determinism() {
  const auto setup = scenario_setup(1);
  const auto inputs = campaign_inputs(setup, operators::Persona::Novice, 1);
  const auto base = fs::temp_directory_path() / "hhil_acceptance_determinism";
  fs::remove_all(base);
  runner::MonteCarloConfig mc;
  mc.iterations = 12;
  mc.seed = 2718;
  mc.persona = operators::Persona::Novice;
  mc.workers = 1;
  runner::write_campaign((base / "a").string(), mc, setup, runner::monte_carlo(mc, inputs));
  mc.workers = 4;
  runner::write_campaign((base / "b").string(), mc, setup, runner::monte_carlo(mc, inputs));
  std::vector<std::string> files{"iterations.csv", "resilience.csv", "summary.csv", "tests.csv", "scatter.csv",
                                 "nominal.csv"};
  for (std::size_t k = 0; k < mc.iterations; ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "iterations/%03zu/trace.csv", k);
    files.emplace_back(name);
    std::snprintf(name, sizeof name, "iterations/%03zu/resilience.csv", k);
    files.emplace_back(name);
  }
  int differ = 0;
  for (const auto& f : files) {
    const auto a = slurp(base / "a" / f), b = slurp(base / "b" / f);
    differ += a.empty() || a != b;
  }
  fs::remove_all(base);
  return {differ == 0, std::to_string(files.size() - differ) + "/" + std::to_string(files.size()) +
                           " result files byte-identical between 1 and 4 workers"};
}

}  // namespace

int main() {
  run(1, "resilience index oracle", 10, index_oracle);
  run(2, "DTW exactness", 5, dtw_exactness);
  run(3, "anomaly rule (5% / 50 / 500)", 1, anomaly_rule);
  run(4, "persona fidelity", 5, persona_fidelity);
  run(5, "expert vs novice campaigns", 300, campaign_direction);
  run(6, "scenario 1 narrative", 30, scenario1_narrative);
  run(7, "scenario 2 narrative", 30, scenario2_narrative);
  run(8, "plant invariants", 120, plant_invariants);
  run(9, "detection-depth monotonicity", 120, detection_depth);
  run(10, "statistics oracles", 120, statistics_oracles);
  run(11, "campaign determinism", 300, campaign_determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
