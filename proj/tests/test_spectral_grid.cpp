#include "doctest.h"

#include "hmhf/errors.hpp"
#include "hmhf/spectral_grid.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace hmhf;
using doctest::Approx;

TEST_SUITE("spectral_grid") {

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(PeriodicGrid(16), InvalidArgument);
  CHECK_THROWS_AS(PeriodicGrid(100), InvalidArgument);
  PeriodicGrid g(64);
  CHECK(g.spacing() == Approx(kTwoPi / 64));
  CHECK(g.node(16) == Approx(kPi / 2));
}

TEST_CASE("dft of sin 3x has only modes +-3") {
  PeriodicGrid g(64);
  Field f = Field::from_function(g, [](double x) { return std::sin(3 * x); });
  Spectrum s = dft(f);
  for (int n = 0; n < s.modes(); ++n) {
    if (n == 3) {
      CHECK(std::abs(s.at(0, n) - std::complex<double>(0.0, -0.5)) < 1e-14);
    } else {
      CHECK(std::abs(s.at(0, n)) < 1e-14);
    }
  }
}

TEST_CASE("dft of a constant is the mode-0 value") {
  PeriodicGrid g(32);
  Field f = Field::from_function(g, [](double) { return 1.0; });
  Spectrum s = dft(f);
  CHECK(s.at(0, 0).real() == Approx(1.0).epsilon(1e-15));
  for (int n = 1; n < s.modes(); ++n) CHECK(std::abs(s.at(0, n)) < 1e-15);
}

TEST_CASE("idft inverts dft and Parseval holds") {
  PeriodicGrid g(256);
  Field f = testutil::random_noise(g, 3, 11);
  Field back = idft(dft(f), g);
  CHECK(max_abs(back - f) < 1e-12);
  const double direct = std::sqrt(l2_inner(f, f));
  CHECK(std::abs(sobolev_norm(f, 0) - direct) < 1e-12 * direct);
  CHECK_THROWS_AS(idft(dft(f), PeriodicGrid(128)), SizeMismatch);
  CHECK_THROWS_AS(Field(g, 2, std::vector<double>(10)), SizeMismatch);
}

TEST_CASE("spectral derivatives") {
  PeriodicGrid g(128);
  Field s = Field::from_function(g, [](double x) { return std::sin(x); });
  Field c = Field::from_function(g, [](double x) { return std::cos(x); });
  CHECK(max_abs(derivative(s, 1) - c) < 1e-12);
  Field c2 = Field::from_function(g, [](double x) { return std::cos(2 * x); });
  CHECK(max_abs(derivative(c2, 2) + 4.0 * c2) < 1e-11);
  CHECK_THROWS_AS(derivative(s, 3), InvalidArgument);
  // |d/dx phi(Nx)| = N
  const int N = 5;
  Field phi = Field::from_function(g, 3, [&](double x, double* v) {
    v[0] = std::cos(N * x);
    v[1] = std::sin(N * x);
    v[2] = 0.0;
  });
  Field d = derivative(phi, 1);
  for (int j = 0; j < g.size(); ++j) {
    const double m = std::hypot(d.at(0, j), d.at(1, j), d.at(2, j));
    CHECK(m == Approx(N).epsilon(1e-12));
  }
}

TEST_CASE("energy and Sobolev norms") {
  PeriodicGrid g(256);
  Field cst = Field::from_function(g, [](double) { return 0.7; });
  CHECK(energy(cst) < 1e-28);
  CHECK(sobolev_norm(cst, 0) == Approx(0.7 * std::sqrt(kTwoPi)).epsilon(1e-14));
  for (int k : {1, 3, 7}) {
    Field pair = Field::from_function(g, 2, [&](double x, double* v) {
      v[0] = std::cos(k * x);
      v[1] = std::sin(k * x);
    });
    CHECK(energy(pair) == Approx(kTwoPi * k * k).epsilon(1e-13));
    CHECK(sobolev_norm(pair, 1, true) == Approx(std::sqrt(kTwoPi) * k).epsilon(1e-13));
  }
  Field r = testutil::random_smooth(g, 2, 5);
  CHECK(sobolev_norm(r, 1) >= sobolev_norm(r, 0));
  CHECK(sobolev_norm(r, 2) >= sobolev_norm(r, 1));
  const double hd = sobolev_norm(r, 1, true);
  CHECK(energy(r) == Approx(hd * hd).epsilon(1e-14));
}

TEST_CASE("low-frequency projector") {
  PeriodicGrid g(128);
  Field s3 = Field::from_function(g, [](double x) { return std::sin(3 * x); });
  CHECK(max_abs(p_lambda(s3, 10.0) - s3) < 1e-14);
  CHECK(max_abs(p_lambda(s3, 8.0)) < 1e-14);
  CHECK(max_abs(p_lambda(s3, 9.0) - s3) < 1e-14); // equality retained
  CHECK(lambda_cutoff(9.0) == 3);
  CHECK(lambda_cutoff(8.99) == 2);
  CHECK(lambda_cutoff(0.5) == 0);

  Field f = testutil::random_noise(g, 1, 3);
  Field h = testutil::random_noise(g, 1, 4);
  const double lam = 20.0;
  Field pf = p_lambda(f, lam);
  CHECK(max_abs(p_lambda(pf, lam) - pf) < 1e-13);
  CHECK(std::abs(l2_inner(pf, h) - l2_inner(f, p_lambda(h, lam))) < 1e-12);
  CHECK(max_abs(pf + p_lambda_perp(f, lam) - f) < 1e-13);
  // ||Delta P^perp f||^2 >= lambda ||d_x P^perp f||^2
  Field q = p_lambda_perp(f, lam);
  const double a = sobolev_norm(q, 2, true), b = sobolev_norm(q, 1, true);
  CHECK(a * a >= lam * b * b);
}

TEST_CASE("windows") {
  PeriodicGrid g(256);
  Window w(g, {{0.0, kPi / 2}});
  CHECK(w.measure() == Approx(kPi / 2).epsilon(1e-14));
  CHECK(w.contains_node(0));
  CHECK(w.contains_node(63));
  CHECK_FALSE(w.contains_node(64));
  CHECK(w.single_arc());
  Window w2(g, {{kPi / 2, kTwoPi}});
  CHECK(w2.contains_node(64));
  CHECK(w2.contains_node(255));
  CHECK_FALSE(w2.contains_node(63));
  CHECK(w2.node_ranges().size() == 1);
  CHECK(w2.node_ranges()[0] == std::pair<int, int>(64, 256));
  CHECK_THROWS_AS(Window(g, {}), InvalidArgument);
  CHECK_THROWS_AS(Window(g, {{1.0, 1.0}}), InvalidArgument);
  for (int j = 0; j < g.size(); ++j)
    CHECK((w.mask()[j] == 1.0) == w.contains(g.node(j)));
}

TEST_CASE("spectral constant: discrete route") {
  PeriodicGrid g(256);
  CHECK(spectral_constant(16.0, Window::full(g)) == 1.0);
  Window w(g, {{0.0, kPi / 2}});
  // one retained mode: the Gram is the scalar |omega|/2pi
  CHECK(spectral_constant(0.5, w) == Approx(0.5).epsilon(1e-13));
  // independent numpy evaluation of the node-mask Gram at M = 1
  CHECK(spectral_constant(1.0, w) == Approx(0.038333431776293656).epsilon(1e-9));
  double prev = 1.0;
  for (double lam : {1.0, 2.0, 4.0, 9.0, 16.0}) {
    const double c = spectral_constant(lam, w);
    CHECK(c > 0.0);
    CHECK(c <= prev + 1e-15);
    prev = c;
  }
  CHECK_THROWS_AS(spectral_constant(1024.0, w), SingularGram);
}

TEST_CASE("spectral constant: continuum route") {
  PeriodicGrid g(256);
  Window w(g, {{0.0, kPi / 2}});
  // mpmath quadrature with 120 digits
  CHECK(spectral_constant_exact(1.0, w) == Approx(0.0383555855439795).epsilon(1e-10));
  CHECK(spectral_constant_exact(16.0, w) == Approx(3.43076096279223e-6).epsilon(1e-9));
  Window w2(g, {{kPi / 2, kTwoPi}});
  CHECK(spectral_constant_exact(4.0, w2) == Approx(0.345350858065251).epsilon(1e-10));
  // the two routes agree to the quadrature error of the node mask
  for (double lam : {1.0, 4.0, 16.0}) {
    const double a = spectral_constant(lam, w2), b = spectral_constant_exact(lam, w2);
    CHECK(std::abs(a - b) < 0.01 * b);
  }
  // far below double precision the log stays finite and monotone
  double prev = 0.0;
  for (int m = 1; m <= 32; m *= 2) {
    const double l = spectral_log_constant_exact(double(m) * m, w);
    CHECK(l > prev);
    CHECK(l / m < 4.0);
    prev = l;
  }
  const double c0 = fit_spectral_c0(w2, 256.0);
  CHECK(c0 > 0.5);
  CHECK(c0 < 1.0);
}

}
