#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "hhil/runner.hpp"

using namespace hhil;
using namespace hhil::runner;
namespace fs = std::filesystem;

namespace {

const EpisodeSetup& scenario1_setup() {
  static const EpisodeSetup setup = [] {
    WorkbenchConfig cfg;
    cfg.episode.nominal_duration = 1200;
    return EpisodeSetup::prepare(cfg, 1);
  }();
  return setup;
}

double peak(const Trace& t, ChannelId c, std::size_t from, std::size_t to) {
  const auto x = t.channel(c);
  return *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(from), x.begin() + static_cast<std::ptrdiff_t>(to) + 1);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hhil_test_runner_" + name);
  fs::remove_all(p);
  return p;
}

CampaignInputs inputs_for(const EpisodeSetup& setup, operators::Persona persona, int scenario) {
  const auto lib = operators::PersonaLibrary::defaults();
  return {&setup, operators::fit_persona(lib.get(persona, scenario, operators::Phase::Detection).anchors),
          operators::fit_persona(lib.get(persona, scenario, operators::Phase::Restoration).anchors), {}};
}

}  // namespace

TEST_CASE("episode timeline arithmetic") {
  const auto r = run_episode(scenario1_setup(), {254.0, 30.0});
  CHECK(r.timeline.t1 == 600.0);
  CHECK(r.timeline.t2() == 854.0);
  CHECK(r.timeline.detection == 254.0);
  CHECK(r.timeline.restoration == 30.0);
  CHECK(r.timeline.ordered());
  CHECK(r.trace.size() == static_cast<std::size_t>(r.timeline.t_end) + 1);
  CHECK(r.timeline.t4() == r.timeline.t3 + 30.0);
}

TEST_CASE("fractional operator times are recovered exactly") {
  const auto r = run_episode(scenario1_setup(), {261.37, 30.716});
  CHECK(r.timeline.detection == 261.37);
  CHECK(r.timeline.restoration == 30.716);
  CHECK(r.timeline.shutdown_sample() == 862);
  CHECK(r.timeline.ordered());
}

TEST_CASE("invalid operator times are rejected") {
  CHECK_THROWS_AS(run_episode(scenario1_setup(), {254.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(run_episode(scenario1_setup(), {-1.0, 30.0}), ValidationError);
}

TEST_CASE("later detection means a higher level peak and a longer drain") {
  const auto early = run_episode(scenario1_setup(), {150.0, 30.0});
  const auto late = run_episode(scenario1_setup(), {400.0, 30.0});
  CHECK(early.markers.degraded[plant::index(ChannelId::S6)] < late.markers.degraded[plant::index(ChannelId::S6)]);
  CHECK(peak(early.trace, ChannelId::S6, 600, 750) < peak(late.trace, ChannelId::S6, 600, 1000));
  const double drain_early = early.timeline.t3 - early.timeline.t2();
  const double drain_late = late.timeline.t3 - late.timeline.t2();
  CHECK(drain_early < drain_late);
}

TEST_CASE("the episode ends re-settled on the setpoints") {
  const auto r = run_episode(scenario1_setup(), {254.0, 30.0});
  const auto& sp = scenario1_setup().config.setpoints;
  CHECK(r.trace.last(ChannelId::S6) == doctest::Approx(sp.level).epsilon(0.01));
  CHECK(r.trace.last(ChannelId::S5) == doctest::Approx(sp.tank_pressure).epsilon(0.01));
  CHECK(r.trace.last(ChannelId::S1) == doctest::Approx(sp.inlet_pressure).epsilon(0.01));
}

TEST_CASE("splicing") {
  const auto& setup = scenario1_setup();
  const auto lib = record_library(setup, 500.0, 31.0);
  SUBCASE("full-length detection reproduces the recording") {
    const auto r = assemble_disrupted_curve(lib, {500.0, 31.0}, setup.config);
    CHECK(r.trace == lib.recorded);
  }
  SUBCASE("shorter detection gives a shorter curve") {
    const auto a = assemble_disrupted_curve(lib, {150.0, 31.0}, setup.config);
    const auto b = assemble_disrupted_curve(lib, {400.0, 31.0}, setup.config);
    CHECK(a.trace.size() < b.trace.size());
    CHECK(a.trace.size() < lib.recorded.size());
  }
  SUBCASE("splice and generative timelines agree") {
    for (double det : {143.0, 254.5, 417.0}) {
      const operators::OperatorTimes t{det, 29.5};
      CHECK(assemble_disrupted_curve(lib, t, setup.config).timeline ==
            run_episode(setup, t).timeline);
    }
  }
  SUBCASE("detection beyond the recorded segment is an error") {
    CHECK_THROWS_AS(assemble_disrupted_curve(lib, {600.0, 31.0}, setup.config), Error);
  }
  SUBCASE("library round-trips through disk and splices from the trace rows") {
    const auto dir = scratch("library");
    save_library(lib, dir.string());
    const auto back = load_library(dir.string());
    CHECK(back.t1 == lib.t1);
    CHECK(back.reference.detection == 500.0);
    CHECK(back.attack_states.empty());
    const auto r = assemble_disrupted_curve(back, {300.0, 31.0}, setup.config);
    CHECK(r.timeline.ordered());
    fs::remove(dir / "startup.csv");
    try {
      load_library(dir.string());
      FAIL("expected a missing segment error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("missing phase segment") != std::string::npos);
    }
    fs::remove_all(dir);
  }
  SUBCASE("a discontinuous start-up is rejected") {
    auto broken = lib;
    broken.startup.mutable_channel(ChannelId::S5)[0] += 0.05 * setup.config.setpoints.tank_pressure;
    CHECK_THROWS_AS(assemble_disrupted_curve(broken, {300.0, 31.0}, setup.config), ContinuityError);
  }
}

TEST_CASE("monte carlo") {
  const auto& setup = scenario1_setup();
  const auto inputs = inputs_for(setup, operators::Persona::Expert, 1);
  MonteCarloConfig mc;
  mc.iterations = 6;
  mc.seed = 99;
  mc.keep_traces = false;
  const auto a = monte_carlo(mc, inputs);
  REQUIRE(a.size() == 6);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].index == k);
    CHECK(a[k].ok);
    CHECK(a[k].timeline.ordered());
    CHECK(a[k].resilience.size() == plant::kChannelCount);
    CHECK(a[k].times.detection >= 143.0);
    CHECK(a[k].times.detection <= 417.0);
    CHECK(a[k].timeline.detection == a[k].times.detection);
  }
  mc.workers = 3;
  const auto b = monte_carlo(mc, inputs);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].times.detection == b[k].times.detection);
    CHECK(a[k].times.restoration == b[k].times.restoration);
    for (auto c : plant::kAllChannels) CHECK(a[k].R(c) == b[k].R(c));
  }
  mc.iterations = 0;
  CHECK_THROWS_AS(monte_carlo(mc, inputs), ValidationError);
}

TEST_CASE("splice campaigns share the generative timelines") {
  const auto& setup = scenario1_setup();
  auto inputs = inputs_for(setup, operators::Persona::Expert, 1);
  inputs.libraries.push_back(record_library(setup, 420.0, 30.0));
  MonteCarloConfig mc;
  mc.iterations = 4;
  mc.seed = 5;
  mc.keep_traces = false;
  const auto gen = monte_carlo(mc, inputs);
  mc.mode = CampaignMode::Splice;
  const auto spl = monte_carlo(mc, inputs);
  for (std::size_t k = 0; k < gen.size(); ++k) {
    REQUIRE(spl[k].ok);
    CHECK(gen[k].timeline == spl[k].timeline);
  }
}

TEST_CASE("report") {
  const auto& setup = scenario1_setup();
  MonteCarloConfig mc;
  mc.iterations = 1;
  mc.keep_traces = false;
  const auto one = monte_carlo(mc, inputs_for(setup, operators::Persona::Expert, 1));
  SUBCASE("a single iteration gives n = 1 and no tests") {
    const auto b = report({{"expert", one}});
    CHECK(b.summary_csv.find("expert,detection,1,") != std::string::npos);
    CHECK(b.tests_csv == "group_a,group_b,metric,test,statistic,p,n,m\n");
    CHECK(b.scatter_csv.rfind("group,iteration,detection,restoration,R_water_output,R_air_input\n", 0) == 0);
  }
  SUBCASE("aggregate metrics are the QOUT and S7 indices") {
    const Group g{"expert", one};
    CHECK(metric_values(g, "air_input") == std::vector<double>{one[0].R(ChannelId::S7)});
    CHECK(metric_values(g, "water_output") == std::vector<double>{one[0].R(ChannelId::QOUT)});
    CHECK(metric_values(g, "detection") == std::vector<double>{one[0].times.detection});
  }
  SUBCASE("two groups get a Mann-Whitney row per metric") {
    mc.iterations = 5;
    mc.seed = 1;
    const auto e = monte_carlo(mc, inputs_for(setup, operators::Persona::Expert, 1));
    mc.seed = 1000;
    const auto n = monte_carlo(mc, inputs_for(setup, operators::Persona::Novice, 1));
    const auto b = report({{"expert", e}, {"novice", n}});
    CHECK(b.tests_csv.find("expert,novice,detection,mann-whitney") != std::string::npos);
    CHECK(b.tests_csv.find("expert,,detection,shapiro-wilk") != std::string::npos);
    CHECK(b.text.find("detection") != std::string::npos);
  }
}

TEST_CASE("campaign files round-trip and re-analysis is stable") {
  const auto& setup = scenario1_setup();
  MonteCarloConfig mc;
  mc.iterations = 3;
  mc.seed = 17;
  const auto results = monte_carlo(mc, inputs_for(setup, operators::Persona::Novice, 1));
  const auto dir = scratch("campaign");
  write_campaign(dir.string(), mc, setup, results);
  for (const char* f : {"iterations.csv", "resilience.csv", "summary.csv", "tests.csv", "scatter.csv", "nominal.csv",
                        "config.ini", "campaign.ini"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(fs::exists(dir / "iterations" / "000" / "trace.csv"));
  CHECK(fs::exists(dir / "iterations" / "002" / "resilience.csv"));
  const auto resilience_before = slurp(dir / "resilience.csv");
  const auto loaded = load_campaign(dir.string());
  REQUIRE(loaded.results.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(loaded.results[k].times.detection == results[k].times.detection);
    CHECK(loaded.results[k].R(ChannelId::S6) == doctest::Approx(results[k].R(ChannelId::S6)).epsilon(1e-11));
  }
  analyze(dir.string());
  CHECK(slurp(dir / "resilience.csv") == resilience_before);
  fs::remove_all(dir);
}

TEST_CASE("exact_text is the shortest round-trip form") {
  CHECK(exact_text(0.1) == "0.1");
  CHECK(exact_text(254.0) == "254");
  CHECK(std::stod(exact_text(1.0 / 3.0)) == 1.0 / 3.0);
}
