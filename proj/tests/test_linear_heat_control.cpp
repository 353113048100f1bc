#include "doctest.h"

#include "hmhf/errors.hpp"
#include "hmhf/linear_heat_control.hpp"

#include <cmath>

using namespace hmhf;

namespace {

const PeriodicGrid kGrid(256);

LinearControlProblem problem(const std::function<double(double)>& f, double horizon,
                             const Window& w) {
  LinearControlProblem p;
  p.initial = Field::from_function(kGrid, f);
  p.horizon = horizon;
  p.window = w;
  return p;
}

double space_time_integral(const ControlRecord& g) {
  double s = 0.0;
  const int n = static_cast<int>(g.size());
  for (int i = 0; i < n; ++i) {
    const double hi = i + 1 < n ? g.times()[i + 1] : g.end_time();
    double row = 0.0;
    for (double v : g.forces()[i].data()) row += v;
    s += (hi - g.times()[i]) * row * kGrid.spacing();
  }
  return s;
}

} // namespace

TEST_SUITE("linear_heat_control") {

TEST_CASE("zero data needs no control") {
  const Window w(kGrid, {{0.0, kPi / 2}});
  const HumResult r = hum_null_control(problem([](double) { return 0.0; }, 0.5, w));
  CHECK(r.terminal_norm == 0.0);
  CHECK(r.control.linf_l2() == 0.0);
}

TEST_CASE("null control of sin x") {
  const auto sinx = [](double x) { return std::sin(x); };
  const Window wide(kGrid, {{kPi / 2, 2 * kPi}});
  const HumResult r = hum_null_control(problem(sinx, 1.0, wide));
  CHECK(r.terminal_norm <= 1e-6);
  CHECK(r.control.zero_outside_window());
  CHECK(r.condition < 1e14);
  // a quarter window at T = 0.5 is cost limited: the Tikhonov residual stays near
  // cost / sqrt(rho); frozen measured values
  const Window quarter(kGrid, {{0.0, kPi / 2}});
  const HumResult q = hum_null_control(problem(sinx, 0.5, quarter));
  CHECK(q.terminal_norm == doctest::Approx(3.7792e-3).epsilon(1e-3));
  const HumResult q2 = hum_null_control(problem(sinx, 2.0, quarter));
  CHECK(q2.terminal_norm <= 1e-5);
}

TEST_CASE("mean mode is removed by the control") {
  const Window w(kGrid, {{kPi / 2, 2 * kPi}});
  const HumResult r = hum_null_control(problem([](double) { return 1.0; }, 1.0, w));
  CHECK(r.terminal_norm <= 1e-5);
  CHECK(space_time_integral(r.control) == doctest::Approx(-kTwoPi).epsilon(1e-6));
}

TEST_CASE("terminal norm decreases with the weight") {
  const Window w(kGrid, {{0.0, kPi / 2}});
  const auto pb = problem([](double x) { return std::cos(2 * x) + 0.5; }, 0.5, w);
  double last = INFINITY;
  for (double rho : {1e2, 1e4, 1e6, 1e8, 1e10}) {
    HumOptions o;
    o.rho = rho;
    const double t = hum_null_control(pb, o).terminal_norm;
    CHECK(t < last);
    last = t;
  }
}

TEST_CASE("cost grows like exp(C/T)") {
  const Window w(kGrid, {{kPi / 2, 2 * kPi}});
  std::vector<double> inv, lc;
  for (double t : {1.0, 0.5, 0.25, 0.125}) {
    const HumResult r = hum_null_control(problem([](double x) { return std::sin(x); }, t, w));
    inv.push_back(1.0 / t);
    lc.push_back(std::log(r.control.linf_l2()));
  }
  for (std::size_t i = 1; i < lc.size(); ++i) CHECK(lc[i] > lc[i - 1]);
  // least-squares line in 1/T; residuals small against the spread
  const double n = static_cast<double>(inv.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    sx += inv[i];
    sy += lc[i];
    sxx += inv[i] * inv[i];
    sxy += inv[i] * lc[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    ss_res += std::pow(lc[i] - icpt - slope * inv[i], 2);
    ss_tot += std::pow(lc[i] - sy / n, 2);
  }
  CHECK(slope > 0.0);
  CHECK(1.0 - ss_res / ss_tot >= 0.9);
}

TEST_CASE("ill-conditioned basis is refused") {
  const Window w(kGrid, {{0.0, kPi / 2}});
  HumOptions o;
  o.rho = 1e30;
  CHECK_THROWS_AS(hum_null_control(problem([](double x) { return std::sin(x); }, 0.5, w), o),
                  IllConditioned);
  o.rho = 1e10;
  o.basis.modes = 200;
  CHECK_THROWS_AS(hum_null_control(problem([](double x) { return std::sin(x); }, 0.5, w), o),
                  InvalidArgument);
}

TEST_CASE("steering zero to one") {
  const Window w(kGrid, {{kPi / 2, 2 * kPi}});
  for (int n : {1, 2}) {
    const SteerResult s = steer_zero_to_one(n, 1.0, w);
    CHECK(s.terminal_error <= 1e-5);
    CHECK(s.flux == doctest::Approx(-kPi * n * n).epsilon(0.02));
    CHECK(s.substitution_gap <= 1e-8);
    CHECK(max_abs(s.w.states.front()) == 0.0);
    // boundary terms of the quadratic energy
    const double bt = quadratic_energy(s.w.states.back(), n * n) -
                      quadratic_energy(s.w.states.front(), n * n);
    CHECK(std::abs(s.flux - bt) <= 1e-4 * std::abs(bt));
    CHECK(s.control.zero_outside_window());
  }
}

TEST_CASE("flux quadrature identity on a controlled run") {
  const Window w(kGrid, {{0.0, kPi}});
  ControlRecord g(w, 1);
  for (int k = 0; k < 50; ++k)
    g.append(0.01 * k, Field::from_function(kGrid, [k](double x) {
               return std::sin(x + 0.1 * k) + 0.3 * std::cos(3 * x);
             }));
  g.set_end(0.5);
  const Field w0 = Field::from_function(kGrid, [](double x) { return 0.2 * std::cos(2 * x); });
  for (double pot : {0.0, 1.0, 4.0}) {
    const LinearTrajectory tr = linear_forward(w0, g, pot, 0.5);
    const double f = flux_functional(tr, g);
    const double bt = quadratic_energy(tr.states.back(), pot) - quadratic_energy(w0, pot);
    CHECK(std::abs(f - bt) <= 1e-4 * std::abs(bt));
  }
  LinearTrajectory zero = linear_forward(Field(kGrid, 1), ControlRecord(w, 1), 0.0, 0.5);
  CHECK(flux_functional(zero, ControlRecord(w, 1)) == 0.0);
}

TEST_CASE("exact forward solve matches a fine flow run") {
  // the linear solver on a single mode against the closed form
  const Field w0 = Field::from_function(kGrid, [](double x) { return std::cos(3 * x); });
  const Field wt = linear_terminal(w0, ControlRecord(Window::full(kGrid), 1), 1.0, 0.2);
  for (int j = 0; j < kGrid.size(); j += 17)
    CHECK(wt.at(0, j) == doctest::Approx(std::exp(-8.0 * 0.2) * std::cos(3 * kGrid.node(j))));
}

} // TEST_SUITE
