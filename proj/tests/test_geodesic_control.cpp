#include "doctest.h"

#include "hmhf/errors.hpp"
#include "hmhf/geodesic_control.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace hmhf;

namespace {

const PeriodicGrid kGrid(256);
const Window kWindow(kGrid, {{kPi / 2, kTwoPi}});
const Vec kA = basis_vector(3, 0), kB = basis_vector(3, 1);

PolarState line(int n) {
  Field t(kGrid, 1);
  for (int j = 0; j < kGrid.size(); ++j) t.at(0, j) = n * kGrid.node(j);
  return PolarState(t, kA, kB);
}

double outside_max(const ControlRecord& r) {
  double m = 0.0;
  const auto& mask = r.window().mask();
  for (const Field& f : r.forces())
    for (int c = 0; c < f.dim(); ++c)
      for (int j = 0; j < f.size(); ++j)
        if (mask[j] == 0.0) m = std::max(m, std::abs(f.at(c, j)));
  return m;
}

Trajectory replay(const PolarState& th0, const WindingChange& w, double horizon,
                  const GeodesicOptions& o) {
  SolverConfig c = o.solver;
  c.scheme = Scheme::imex_euler;
  SimulateOptions so;
  so.forcing = &w.control;
  return simulate(th0.to_sphere(), horizon, c, so);
}

} // namespace

TEST_SUITE("geodesic_control") {

TEST_CASE("theta_1 profile") {
  const double delta = kPi / 2;
  const ThetaJet same = build_theta1(2, 2, delta, kGrid);
  for (int j = 0; j < kGrid.size(); ++j) CHECK(same.value.at(0, j) == 2.0 * kGrid.node(j));

  const ThetaJet t = build_theta1(0, 1, delta, kGrid);
  for (int j = 0; j < kGrid.size(); ++j) {
    const double x = kGrid.node(j);
    if (x <= kTwoPi - delta) CHECK(t.value.at(0, j) == x);
    if (x >= kTwoPi - delta / 2) CHECK(t.value.at(0, j) == doctest::Approx(x - kTwoPi).epsilon(1e-14));
  }
  // theta_1(2 pi) - theta_1(0) = 2 pi N = 0, slope N1 at both ends
  const int last = kGrid.size() - 1;
  CHECK(t.value.at(0, last) + (kTwoPi - kGrid.node(last)) == doctest::Approx(0.0));
  CHECK(t.dx.at(0, 0) == 1.0);
  CHECK(t.dx.at(0, last) == 1.0);

  // second difference probe at the knots: the one-sided second derivative vanishes
  for (double h : {1e-9, 1e-10}) {
    const double lo = (smoothstep5(h) - 2.0 * smoothstep5(0.0) + smoothstep5(-h)) / (h * h);
    CHECK(std::abs(lo) <= 1e-8);
  }
  for (double h : {1e-3, 1e-4}) {
    const double hi = (smoothstep5(1.0 + h) - 2.0 * smoothstep5(1.0) + smoothstep5(1.0 - h)) / (h * h);
    CHECK(std::abs(hi) <= 20.0 * h);
  }

  // analytic derivatives against differences on a fine grid
  const PeriodicGrid fine(1 << 14);
  const ThetaJet f = build_theta1(1, -1, delta, fine);
  const double h = fine.spacing();
  double e1 = 0.0, e2 = 0.0;
  const double k0 = kTwoPi - delta, k1 = kTwoPi - delta / 2;
  for (int j = 1; j + 1 < fine.size(); ++j) {
    const double x = fine.node(j);
    if (std::abs(x - k0) < 2 * h || std::abs(x - k1) < 2 * h) continue;
    const double a = f.value.at(0, j - 1), b = f.value.at(0, j), c = f.value.at(0, j + 1);
    e1 = std::max(e1, std::abs((c - a) / (2 * h) - f.dx.at(0, j)));
    e2 = std::max(e2, std::abs((c - 2 * b + a) / (h * h) - f.dxx.at(0, j)));
  }
  CHECK(e1 <= 1e-4);
  CHECK(e2 <= 1e-3);
  CHECK_THROWS_AS(build_theta1(0, 1, kPi, kGrid), InvalidArgument);
}

TEST_CASE("steering along the circle") {
  GeodesicOptions o;
  SUBCASE("already on target") {
    Field t(kGrid, 1);
    for (int j = 0; j < kGrid.size(); ++j) t.at(0, j) = kGrid.node(j) + 0.5;
    const GeodesicSteer s = steer_on_geodesic(PolarState(t, kA, kB), 1, 0.5, 0.5, kWindow, o);
    CHECK(s.control.linf_l2() <= 1e-12);
    CHECK(s.theta_error <= 1e-12);
  }
  SUBCASE("winding one with a wobble") {
    Field t(kGrid, 1);
    for (int j = 0; j < kGrid.size(); ++j) {
      const double x = kGrid.node(j);
      t.at(0, j) = x + 0.4 * std::sin(2 * x);
    }
    const GeodesicSteer s = steer_on_geodesic(PolarState(t, kA, kB), 1, 0.0, 1.0, kWindow, o);
    CHECK(s.theta_error <= 1e-4);
    CHECK(s.winding_constant);
    CHECK(s.off_circle <= 1e-8);
    CHECK(outside_max(s.control) == 0.0);
  }
  SUBCASE("point to point") {
    Field t(kGrid, 1);
    for (int j = 0; j < kGrid.size(); ++j) t.at(0, j) = 0.3;
    const GeodesicSteer s = steer_on_geodesic(PolarState(t, kA, kB), 0, 2.0, 1.0, kWindow, o);
    CHECK(s.theta_error <= 1e-4);
    CHECK(s.winding_constant);
    CHECK(s.off_circle <= 1e-8);
  }
  SUBCASE("in a rotated plane of S^3") {
    const Rotation r(testutil::random_orthogonal(4, 11));
    const Vec a = r.apply(basis_vector(4, 0)), b = r.apply(basis_vector(4, 1));
    Field t(kGrid, 1);
    for (int j = 0; j < kGrid.size(); ++j) t.at(0, j) = -kGrid.node(j) + 0.2 * std::cos(kGrid.node(j));
    const GeodesicSteer s = steer_on_geodesic(PolarState(t, a, b), -1, 1.0, 1.0, kWindow, o);
    CHECK(s.theta_error <= 1e-4);
    CHECK(s.off_circle <= 1e-8);
  }
  CHECK_THROWS_AS(steer_on_geodesic(line(1), 2, 0.0, 1.0, kWindow, o), DegreeMismatch);
}

TEST_CASE("deformation homotopy") {
  ThetaJet th{Field(kGrid, 1), Field(kGrid, 1), Field(kGrid, 1)};
  for (int j = 0; j < kGrid.size(); ++j) {
    th.value.at(0, j) = kGrid.node(j);
    th.dx.at(0, j) = 1.0;
  }
  const CurveJet c = circle_jet(th, kA, kB);
  DeformationOptions d;
  d.store_every = 100;
  const DeformationPath p = deformation_homotopy(c, c, 0.2, kWindow, d);
  double drift = 0.0, force = 0.0;
  for (std::size_t i = 0; i < p.states.size(); ++i) {
    drift = std::max(drift, h1_distance(p.states[i].field(), c.u));
    force = std::max(force, max_abs(p.induced_force[i]));
    CHECK(p.states[i].constraint_residual() <= 1e-14);
  }
  CHECK(drift <= 1e-12);
  CHECK(force <= 1e-9);
  CHECK(p.tracking_error <= 1e-10);

  d.pole_clearance = 1.5;
  CHECK_THROWS_AS(deformation_homotopy(c, c, 0.2, kWindow, d), PoleOnCurve);
  const CurveJet flat = circle_jet(th, basis_vector(2, 0), basis_vector(2, 1));
  CHECK_THROWS_AS(deformation_homotopy(flat, flat, 0.2, kWindow), DimensionTooSmall);
  const ThetaJet t2 = build_theta1(1, 2, kPi / 2, kGrid);
  CHECK_THROWS_AS(deformation_homotopy(c, circle_jet(t2, kA, kB), 0.2, kWindow), InvalidArgument);
}

TEST_CASE("winding change 0 -> 1") {
  GeodesicOptions o;
  const double horizon = 2.0, dt = o.solver.dt;
  const PolarState th0 = line(0);
  const WindingChange w = change_winding(th0, 1, horizon, kWindow, o);
  CHECK(w.terminal_error <= 1e-8);
  CHECK(outside_max(w.control) == 0.0);
  double induced = 0.0;
  const auto& mask = kWindow.mask();
  for (const Field& f : w.stage_b.induced_force)
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < kGrid.size(); ++j)
        if (mask[j] == 0.0) induced = std::max(induced, std::abs(f.at(c, j)));
  CHECK(induced <= 1e-9);
  CHECK(w.tracking_error <= 10 * dt);
  const Trajectory r = replay(th0, w, horizon, o);
  CHECK(trajectory_distance(r, w.realized) == 0.0);
  CHECK(trajectory_distance(r, w.trajectory) <= 10 * dt);

  // stage B leaves [0, 2 pi - delta] untouched
  const double delta = 0.5 * (1.5 * kPi);
  const Field& first = w.stage_b.states.front().field();
  double drift = 0.0;
  for (const SphereField& s : w.stage_b.states)
    for (int j = 0; j < kGrid.size(); ++j)
      if (kGrid.node(j) <= kTwoPi - delta)
        for (int c = 0; c < 3; ++c) drift = std::max(drift, std::abs(s.field().at(c, j) - first.at(c, j)));
  CHECK(drift <= 1e-10);

  // the realized run lands near phi(x); a linearized correction finishes it
  CHECK(w.realized_terminal_error <= 1e-4);
  const HarmonicCorrection c =
      correct_to_harmonic(w.realized.final_state(), GeodesicChart(1, kA, kB), 0.5, kWindow);
  CHECK(c.terminal_error <= 1e-8);
  CHECK(outside_max(c.control) == 0.0);
}

TEST_CASE("winding change 1 -> -1") {
  GeodesicOptions o;
  const double horizon = 2.0, dt = o.solver.dt;
  const PolarState th0 = line(1);
  const WindingChange w = change_winding(th0, -1, horizon, kWindow, o);
  CHECK(w.terminal_error <= 1e-8);
  CHECK(outside_max(w.control) == 0.0);
  const Trajectory r = replay(th0, w, horizon, o);
  CHECK(trajectory_distance(r, w.trajectory) <= 10 * dt);
}

TEST_CASE("equal windings need no deformation") {
  GeodesicOptions o;
  Field t(kGrid, 1);
  for (int j = 0; j < kGrid.size(); ++j) t.at(0, j) = kGrid.node(j) + 0.3 * std::sin(kGrid.node(j));
  const WindingChange w = change_winding(PolarState(t, kA, kB), 1, 1.0, kWindow, o);
  double force = 0.0;
  for (const Field& f : w.stage_b.induced_force) force = std::max(force, max_abs(f));
  CHECK(force <= 1e-9);
  CHECK(w.terminal_error <= 1e-4);
  CHECK_THROWS_AS(change_winding(PolarState(t, basis_vector(2, 0), basis_vector(2, 1)), 1, 1.0,
                                 kWindow, o),
                  DimensionTooSmall);
  CHECK_THROWS_AS(change_winding(line(0), 1, 1.0, Window(kGrid, {{0.0, 1.0}, {2.0, 3.0}}), o),
                  InvalidArgument);
}

TEST_CASE("linearized correction at a winding two map") {
  const GeodesicChart ch(2, kA, kB);
  Field u = harmonic_map(ch, kGrid).field();
  const Field p = testutil::random_smooth(kGrid, 3, 5, 4, 1e-5);
  u += p;
  const HarmonicCorrection c =
      correct_to_harmonic(SphereField::normalized(u), ch, 0.5, kWindow);
  CHECK(c.entry_error >= 1e-6);
  CHECK(c.terminal_error <= 1e-3 * c.entry_error);
}

} // TEST_SUITE
