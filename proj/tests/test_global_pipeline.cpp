#include "doctest.h"

#include "hmhf/global_pipeline.hpp"
#include "test_util.hpp"

#include <cmath>
#include <sstream>

using namespace hmhf;

namespace {

const PeriodicGrid kGrid(256);

SphereField perturbed(int n, double amp, unsigned seed) {
  const Field phi = harmonic_map(GeodesicChart::standard(3, n), kGrid).field();
  Field p = tangent_project(testutil::random_smooth(kGrid, 3, seed, 4), phi);
  p *= amp / sobolev_norm(p, 1);
  Field u = phi;
  u += p;
  return SphereField::normalized(u);
}

} // namespace

TEST_SUITE("global_pipeline") {

TEST_CASE("configuration checks") {
  PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  c.epsilon_detect = 0.1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = PipelineConfig();
  c.solver.scheme = Scheme::imex_bdf2;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = PipelineConfig();
  c.crossing_horizon = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);

  const SphereField flat = harmonic_map(GeodesicChart::standard(2, 1), kGrid);
  CHECK_THROWS_AS(run_global(flat, GeodesicChart::standard(2, 0)), DimensionTooSmall);
  CHECK_THROWS_AS(run_global(harmonic_map(GeodesicChart::standard(3, 1), kGrid),
                             GeodesicChart::standard(4, 1)),
                  SizeMismatch);
}

TEST_CASE("already at the target") {
  const GeodesicChart t = GeodesicChart::standard(3, 2);
  const PipelineResult r = run_global(harmonic_map(t, kGrid), t);
  CHECK(r.log.records.empty());
  CHECK(r.control.linf_l2() == 0.0);
  CHECK(r.terminal_error <= 1e-12);
}

TEST_CASE("descent steps") {
  PipelineConfig c;
  SUBCASE("below the decay threshold") {
    Field u(kGrid, 3);
    for (int j = 0; j < kGrid.size(); ++j) {
      u.at(2, j) = 1.0;
      u.at(0, j) = 0.05 * std::cos(kGrid.node(j));
    }
    const DescentStep s = descent_step(SphereField::normalized(u), c, 0.0, 4);
    CHECK(s.level == 0);
    CHECK_FALSE(s.crossed);
    CHECK(s.phases.empty());
  }
  SUBCASE("at a harmonic level") {
    const SphereField u = harmonic_map(GeodesicChart::standard(3, 1), kGrid);
    const DescentStep s = descent_step(u, c, 0.0, 2);
    REQUIRE(s.crossed);
    CHECK(s.level == 1);
    REQUIRE(s.phases.size() == 2);
    CHECK(s.phases[1].phase == Phase::crossing);
    CHECK(s.phases[1].exit_energy < kTwoPi);
    CHECK(energy(s.state.field()) < kTwoPi);
    // the next round cannot meet the crossed level again
    PipelineConfig q = c;
    q.max_free_time = 30.0;
    const DescentStep t = descent_step(s.state, q, s.trajectory.final_time(), s.level - 1);
    CHECK(t.level < s.level);
  }
  SUBCASE("timeout") {
    c.max_free_time = 0.1;
    CHECK_THROWS_AS(descent_step(perturbed(2, 0.3, 3), c, 0.0, 1), Timeout);
  }
}

TEST_CASE("winding one to a constant target") {
  const SphereField u0 = harmonic_map(GeodesicChart::standard(3, 1), kGrid);
  const GeodesicChart target(0, basis_vector(3, 0), basis_vector(3, 1));
  const PipelineResult r = run_global(u0, target);
  CHECK(r.terminal_error <= 1e-6);
  CHECK(r.log.levels_strictly_decreasing());
  CHECK(r.log.crossings_exit_below());
  const std::vector<int> lv = r.log.levels();
  REQUIRE(lv.size() == 2);
  CHECK(lv[0] == 1);
  CHECK(lv[1] == 0);
  bool decay = false;
  for (const PhaseRecord& p : r.log.records)
    if (p.phase == Phase::decay) {
      decay = true;
      CHECK(p.rate >= 0.8 / (2.0 * kPi * kPi));
    }
  CHECK(decay);
  CHECK(r.control.zero_outside_window());
  const Trajectory rep = replay_pipeline(u0, r);
  CHECK(trajectory_distance(rep, r.trajectory) <= 1e-4);

  // one line per record, documented keys
  std::istringstream is(r.log.to_text());
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    for (const char* key : {"phase=", " t0=", " t1=", " e_in=", " e_out=", " level=", " eps=",
                            " rate=", " residual=", " chart_in=", " chart_out="})
      CHECK(line.find(key) != std::string::npos);
  }
  CHECK(n == r.log.records.size());
}

TEST_CASE("descent does not depend on the target") {
  const SphereField u0 = perturbed(1, 0.2, 8);
  const PipelineResult a = run_global(u0, GeodesicChart::standard(3, 2));
  const PipelineResult b = run_global(u0, GeodesicChart(1, basis_vector(3, 2), basis_vector(3, 0)));
  CHECK(a.terminal_error <= 1e-6);
  CHECK(b.terminal_error <= 1e-6);
  std::size_t k = 0;
  for (; k < a.log.records.size() && a.log.records[k].phase != Phase::point_transfer; ++k) {
    REQUIRE(k < b.log.records.size());
    CHECK(a.log.records[k].phase == b.log.records[k].phase);
    CHECK(a.log.records[k].t1 == b.log.records[k].t1);
    CHECK(a.log.records[k].exit_energy == b.log.records[k].exit_energy);
  }
  CHECK(k >= 3);
}

TEST_CASE("stage failures carry the log") {
  PipelineConfig c;
  c.max_free_time = 1.0;
  c.decay_target = 1e-12;
  try {
    run_global(harmonic_map(GeodesicChart::standard(3, 1), kGrid),
               GeodesicChart::standard(3, 2), c);
    FAIL("expected an abort");
  } catch (const PipelineAborted& e) {
    CHECK(e.kind() == "Timeout");
    CHECK_FALSE(e.log().records.empty());
  }
}

} // TEST_SUITE
