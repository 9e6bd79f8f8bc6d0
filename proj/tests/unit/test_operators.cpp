#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"

#include "hhil/error.hpp"
#include "hhil/operators.hpp"

using namespace hhil;
using namespace hhil::operators;

namespace {

std::string trajectory_csv(std::size_t n, double rate, const std::function<std::array<double, 3>(std::size_t)>& at) {
  std::ostringstream out;
  out.precision(17);
  out << "t,x,y,z\n";
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = at(k);
    out << static_cast<double>(k) / rate << ',' << p[0] << ',' << p[1] << ',' << p[2] << '\n';
  }
  return out.str();
}

const ControlVolume kA{"A", {0, 0, 0}, {1, 1, 2}};
const ControlVolume kB{"B", {2, 0, 0}, {1, 1, 2}};

// Independent mean of a piecewise-linear quantile function by midpoint quadrature.
double quadrature_mean(const PersonaSampler& s) {
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += s.quantile((i + 0.5) / n);
  return sum / n;
}

}  // namespace

TEST_CASE("ingest_trajectory") {
  SUBCASE("three rows at 90 Hz") {
    const auto t = ingest_trajectory("0,0,0,0\n0.011111111111111112,1,1,1\n0.022222222222222223,2,2,2\n");
    CHECK(t.samples.size() == 3);
    CHECK(t.rate == doctest::Approx(90.0));
  }
  SUBCASE("900 rows spanning 10 s infer 90 Hz") {
    const auto csv = trajectory_csv(900, 89.9, [](std::size_t) { return std::array<double, 3>{0, 0, 0}; });
    const auto t = ingest_trajectory(csv);
    CHECK(t.samples.size() == 900);
    CHECK(t.rate == doctest::Approx(899.0 / (899.0 / 89.9)));
  }
  SUBCASE("decreasing time is rejected with its line") {
    try {
      ingest_trajectory("t,x,y,z\n0,0,0,0\n0.1,0,0,0\n0.05,0,0,0\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("malformed row is rejected with its line") {
    try {
      ingest_trajectory("0,0,0,0\n0.1,0,zero,0\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("irregular sampling is rejected") {
    CHECK_THROWS_AS(ingest_trajectory("0,0,0,0\n0.1,0,0,0\n0.3,0,0,0\n"), ParseError);
  }
}

TEST_CASE("control volumes") {
  CHECK(kA.contains(1.0, 0.5, 2.0));
  CHECK(kA.contains(0.0, 0.0, 0.0));
  CHECK_FALSE(kA.contains(1.0000001, 0.5, 1.0));
  CHECK_NOTHROW(validate({kA, kB}));
  CHECK_NOTHROW(validate({kA, ControlVolume{"C", {1, 0, 0}, {1, 1, 1}}}));  // shared face only
  CHECK_THROWS_AS(validate({kA, ControlVolume{"C", {0.5, 0.5, 0.5}, {1, 1, 1}}}), ValidationError);
  CHECK_THROWS_AS(validate({ControlVolume{"D", {0, 0, 0}, {1, 0, 1}}}), ValidationError);
}

TEST_CASE("contextualize") {
  SUBCASE("frames 10-19 inside A at 90 Hz") {
    const auto csv = trajectory_csv(40, 90.0, [](std::size_t k) {
      return k >= 10 && k <= 19 ? std::array<double, 3>{0.5, 0.5, 0.5} : std::array<double, 3>{5, 5, 5};
    });
    const auto table = contextualize(ingest_trajectory(csv), {kA, kB});
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].volume_id == "A");
    CHECK(table.rows[0].entry_t == doctest::Approx(10.0 / 90.0));
    CHECK(table.rows[0].persistence == doctest::Approx(10.0 / 90.0));
  }
  SUBCASE("never inside gives an empty table") {
    const auto csv = trajectory_csv(30, 90.0, [](std::size_t) { return std::array<double, 3>{9, 9, 9}; });
    CHECK(contextualize(ingest_trajectory(csv), {kA, kB}).rows.empty());
  }
  SUBCASE("a point on a face counts as inside") {
    const auto csv = trajectory_csv(3, 90.0, [](std::size_t) { return std::array<double, 3>{1.0, 1.0, 2.0}; });
    const auto table = contextualize(ingest_trajectory(csv), {kA});
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].persistence == doctest::Approx(3.0 / 90.0));
  }
  SUBCASE("moving between volumes splits the runs") {
    const auto csv = trajectory_csv(30, 90.0, [](std::size_t k) {
      if (k < 10) return std::array<double, 3>{0.5, 0.5, 0.5};
      if (k < 15) return std::array<double, 3>{9, 9, 9};
      if (k < 25) return std::array<double, 3>{2.5, 0.5, 0.5};
      return std::array<double, 3>{0.5, 0.5, 0.5};
    });
    const auto table = contextualize(ingest_trajectory(csv), {kA, kB});
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[0].volume_id == "A");
    CHECK(table.rows[1].volume_id == "B");
    CHECK(table.rows[2].volume_id == "A");
    CHECK(activity_duration(table) == doctest::Approx(25.0 / 90.0));
  }
}

TEST_CASE("dwell time equals inside frames over rate") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 3.5);
  for (int run = 0; run < 20; ++run) {
    std::vector<std::array<double, 3>> pts(500);
    std::size_t inside = 0;
    for (auto& p : pts) {
      p = {u(rng), u(rng) / 3.0, u(rng) / 2.0};
      inside += kA.contains(p[0], p[1], p[2]) || kB.contains(p[0], p[1], p[2]);
    }
    const auto csv = trajectory_csv(pts.size(), 90.0, [&](std::size_t k) { return pts[k]; });
    const auto traj = ingest_trajectory(csv);
    const auto table = contextualize(traj, {kA, kB});
    CHECK(activity_duration(table) == doctest::Approx(static_cast<double>(inside) / traj.rate).epsilon(1e-12));
  }
}

TEST_CASE("activity_duration") {
  DwellTable t;
  t.rows = {{"A", 0.0, 2.0}, {"B", 3.0, 3.5}};
  CHECK(activity_duration(t) == 5.5);
  CHECK(activity_duration(DwellTable{}) == 0.0);
  DwellTable many;
  for (int i = 0; i < 100; ++i) many.rows.push_back({"A", i * 0.2, 0.1});
  CHECK(activity_duration(many) == doctest::Approx(10.0));
}

TEST_CASE("dwell table CSV round-trip carries the phase tag") {
  DwellTable t{Phase::Restoration, {{"AV2", 12.5, 3.25}, {"panel", 20.0, 1.0}}};
  const auto csv = to_csv(t);
  CHECK(csv.find("# phase: restoration") == 0);
  CHECK(dwell_table_from_csv(csv) == t);
  CHECK_THROWS(dwell_table_from_csv("# phase: detection\nvolume_id,entry_t,persistence\nA,1,-2\n"));
}

TEST_CASE("persona sampler anchors") {
  const auto s = fit_persona({143, 220, 254, 301, 417});
  CHECK(s.quantile(0.5) == 254.0);
  CHECK(s.quantile(0.0) == 143.0);
  CHECK(s.quantile(0.25) == 220.0);
  CHECK(s.quantile(0.75) == 301.0);
  CHECK(s.quantile(1.0) == 417.0);
  CHECK(s.quantile(0.125) == doctest::Approx(181.5));
  CHECK_THROWS_AS(fit_persona({143, 220, 200, 301, 417}), ValidationError);
}

TEST_CASE("persona draws are bounded, reproducible and near the mean") {
  const auto s = fit_persona({143, 220, 254, 301, 417});
  std::mt19937_64 a(42), b(42);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = sample_persona(s, a);
    CHECK(x >= 143.0);
    CHECK(x <= 417.0);
    CHECK(sample_persona(s, b) == x);
    sum += x;
  }
  CHECK(std::abs(sum / 10000 - 261.798) / 261.798 < 0.05);
}

TEST_CASE("closed-form persona mean matches quadrature") {
  for (const auto& spec : PersonaLibrary::defaults().all()) {
    const auto s = fit_persona(spec.anchors);
    CHECK(s.mean() == doctest::Approx(quadrature_mean(s)).epsilon(1e-6));
  }
  CHECK(fit_persona({143, 220, 254, 301, 417}).mean() == doctest::Approx(263.75));
}

TEST_CASE("expert detection dominates novice") {
  const auto lib = PersonaLibrary::defaults();
  const auto e = fit_persona(lib.get(Persona::Expert, 1, Phase::Detection).anchors);
  const auto n = fit_persona(lib.get(Persona::Novice, 1, Phase::Detection).anchors);
  CHECK(e.quantile(0.5) < n.quantile(0.5));
}

TEST_CASE("persona library file matches the defaults") {
  const auto shipped = PersonaLibrary::load(std::string(HHIL_SOURCE_DIR) + "/config/personas.ini");
  const auto builtin = PersonaLibrary::defaults();
  REQUIRE(shipped.all().size() == 8);
  for (const auto& spec : builtin.all()) {
    CHECK(shipped.get(spec.persona, spec.scenario, spec.phase).anchors == spec.anchors);
  }
  CHECK_THROWS(PersonaLibrary::parse("[expert.scenario1]\nanchors = 1,2,3,4,5\n"));
  CHECK_THROWS(PersonaLibrary::parse("[expert.scenario1.detection]\nanchors = 5,4,3,2,1\n"));
}

TEST_CASE("operator times") {
  CHECK_THROWS_AS(validate(OperatorTimes{0.0, 30.0}), ValidationError);
  CHECK_THROWS_AS(validate(OperatorTimes{10.0, -1.0}), ValidationError);
  CHECK_NOTHROW(validate(OperatorTimes{10.0, 30.0}));
  DwellTable det{Phase::Detection, {{"A", 0, 100}, {"B", 150, 61}}};
  DwellTable res{Phase::Restoration, {{"AV2", 0, 31}}};
  const auto t = from_dwell_tables(det, res);
  CHECK(t.detection == 161.0);
  CHECK(t.restoration == 31.0);
  CHECK(t.provenance == Provenance::DwellTables);
  CHECK(to_string(Provenance::LiveSession) == "live session");
  CHECK_THROWS(from_dwell_tables(res, det));
}
