#include "doctest.h"

#include "hmhf/energy_crossing.hpp"
#include "hmhf/errors.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace hmhf;

namespace {

const PeriodicGrid kGrid(256);
const Window kWindow(kGrid, {{kPi / 2, kTwoPi}});

} // namespace

TEST_SUITE("energy_crossing") {

TEST_CASE("plan geometry") {
  const double eps = 0.01;
  const CrossingPlan p = build_crossing_control(GeodesicChart::standard(3, 1), eps, 1.0, kWindow);
  double off = 0.0;
  for (const Field& f : p.force.forces())
    for (int j = 0; j < f.size(); ++j)
      off = std::max({off, std::abs(f.at(0, j)), std::abs(f.at(1, j))});
  CHECK(off == 0.0);
  CHECK(p.force.linf_l2() == doctest::Approx(eps * p.linear_control.linf_l2()).epsilon(1e-12));
  CHECK(p.force.zero_outside_window());
  CHECK(p.flux == doctest::Approx(-kPi).epsilon(0.02));

  // rotated chart: the force turns with the chart
  const Rotation r(testutil::random_orthogonal(3, 4));
  const GeodesicChart rc(1, r.apply(basis_vector(3, 0)), r.apply(basis_vector(3, 1)));
  const CrossingPlan q = build_crossing_control(rc, eps, 1.0, kWindow);
  const Vec dir = q.rotation.transpose().apply(basis_vector(3, 2));
  const Field& g = q.linear_control.forces()[7];
  const Field& f = q.force.forces()[7];
  double err = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int j = 0; j < kGrid.size(); ++j)
      err = std::max(err, std::abs(f.at(c, j) - eps * dir[c] * g.at(0, j)));
  CHECK(err <= 1e-14 * std::max(1.0, max_abs(f)));
}

TEST_CASE("plan preconditions") {
  CHECK_THROWS_AS(build_crossing_control(GeodesicChart::standard(2, 1), 0.01, 1.0, kWindow),
                  DimensionTooSmall);
  CHECK_THROWS_AS(build_crossing_control(GeodesicChart::standard(3, 0), 0.01, 1.0, kWindow),
                  InvalidArgument);
  CHECK_THROWS_AS(build_crossing_control(GeodesicChart::standard(3, 1), 0.2, 1.0, kWindow),
                  InvalidArgument);
}

TEST_CASE("Richardson removes linear and quadratic terms") {
  auto f = [](double e) { return -3.0 + 0.7 * e - 5.0 * e * e; };
  CHECK(richardson({f(0.02), f(0.01), f(0.005)}) == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(richardson({f(0.02), f(0.01)}) == doctest::Approx(-3.0).epsilon(1e-3));
}

TEST_CASE("crossing an N = 1 level") {
  const CrossingSweep s = crossing_sweep(1, {0.02, 0.01, 0.005}, 1.0, kWindow);
  CHECK(s.oracle == doctest::Approx(-kTwoPi).epsilon(0.02));
  CHECK(s.relative_error <= 0.1);
  double lo = 0.0, hi = -1e300;
  for (const SweepRow& r : s.rows) {
    CHECK(r.delta_e < 0.0);
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
  }
  CHECK((hi - lo) / std::abs(lo) <= 0.15);
  for (double q : s.remainder_ratios) {
    CHECK(q >= 3.0);
    CHECK(q <= 5.0);
  }
  CHECK(s.matched_constant == "-2 pi N^2 eps^2");
  // archived remainder at eps = 0.02
  CHECK(s.rows[0].remainder == doctest::Approx(1.37194e-3).epsilon(0.01));
}

TEST_CASE("after crossing the free flow stays below the level") {
  const GeodesicChart chart = GeodesicChart::standard(3, 1);
  const CrossingPlan p = build_crossing_control(chart, 0.05, 1.0, kWindow);
  const CrossingOutcome r = execute_crossing(harmonic_map(chart, kGrid), p);
  CHECK(r.delta_e < 0.0);
  SolverConfig cfg;
  cfg.dt = 1e-3;
  const Trajectory free = simulate(r.trajectory.final_state(), 2.0, cfg, {});
  double emax = 0.0;
  for (const DiagnosticRow& d : free.diagnostics) emax = std::max(emax, d.energy);
  CHECK(emax < kTwoPi);
}

TEST_CASE("crossing errors") {
  const GeodesicChart chart = GeodesicChart::standard(3, 1);
  const CrossingPlan p = build_crossing_control(chart, 0.01, 1.0, kWindow);
  const SphereField far = harmonic_map(GeodesicChart::standard(3, 2), kGrid);
  CHECK_THROWS_AS(execute_crossing(far, p), InvalidArgument);
  CrossingOptions o;
  o.margin = 1.0;
  CHECK_THROWS_AS(execute_crossing(harmonic_map(chart, kGrid), p, o), CrossingFailed);
}

} // TEST_SUITE
