#include "doctest.h"

#include "hmhf/errors.hpp"
#include "hmhf/sphere_geometry.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace hmhf;
using doctest::Approx;

using testutil::random_orthogonal;

TEST_SUITE("sphere_geometry") {

TEST_CASE("tangent projection") {
  Vec u{0.0, 0.6, 0.8};
  Vec f{0.0, 1.2, 1.6};
  for (double x : tangent_project(f, u)) CHECK(std::abs(x) < 1e-15);
  Vec t{1.0, 0.8, -0.6};
  CHECK(tangent_project(t, u) == t);
  Vec r = tangent_project(Vec{1, 2, 3}, Vec{1, 0, 0});
  CHECK(r == Vec{0, 2, 3});
  Vec g{0.3, -1.1, 2.4};
  Vec p = tangent_project(g, u);
  CHECK(std::abs(dot(p, u)) < 1e-15);
  Vec pp = tangent_project(p, u);
  for (int i = 0; i < 3; ++i) CHECK(pp[i] == Approx(p[i]).epsilon(1e-15));
}

TEST_CASE("harmonic maps") {
  PeriodicGrid g(256);
  SphereField c = harmonic_map(GeodesicChart(0, {1, 0, 0}, {0, 1, 0}, 0.3), g);
  for (int j = 0; j < g.size(); ++j) {
    CHECK(c.field().at(0, j) == Approx(std::cos(0.3)));
    CHECK(c.field().at(1, j) == Approx(std::sin(0.3)));
  }
  SphereField phi = harmonic_map(GeodesicChart::standard(3, 1), g);
  for (int j = 0; j < g.size(); ++j) {
    CHECK(phi.field().at(0, j) == Approx(std::cos(g.node(j))));
    CHECK(phi.field().at(1, j) == Approx(std::sin(g.node(j))));
    CHECK(phi.field().at(2, j) == 0.0);
  }
  for (int n = 1; n <= 8; ++n) {
    const double e = energy(harmonic_map(GeodesicChart::standard(3, n), g).field());
    CHECK(std::abs(e - kTwoPi * n * n) <= 1e-8 * kTwoPi * n * n);
  }
  CHECK_THROWS_AS(GeodesicChart(1, {1, 0, 0}, {1, 0, 0}), InvalidArgument);
}

TEST_CASE("stereographic projection") {
  CHECK(stereo_forward(Vec{0, 0, 1}) == Vec{0, 0});
  Vec e = stereo_forward(Vec{1, 0, 0});
  CHECK(e[0] == Approx(2.0));
  CHECK(e[1] == Approx(0.0));
  CHECK_THROWS_AS(stereo_forward(Vec{0, 0, -1}), SouthPoleSingularity);
  CHECK(stereo_inverse(Vec{0, 0}) == Vec{0, 0, 1});
  std::mt19937 rng(1);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    Vec v{nd(rng), nd(rng), nd(rng)};
    Vec u = stereo_inverse(v);
    CHECK(norm(u) == Approx(1.0).epsilon(1e-15));
    Vec w = stereo_forward(u);
    for (int i = 0; i < 3; ++i) CHECK(w[i] == Approx(v[i]).epsilon(1e-12));
  }
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    Vec u{ud(rng), ud(rng), ud(rng)};
    const double nu = norm(u);
    for (double& x : u) x /= nu;
    if (u[2] <= -0.99) continue;
    Vec back = stereo_inverse(stereo_forward(u));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(back[i] - u[i]) < 1e-12);
  }
}

TEST_CASE("stereographic gradient identity on fields") {
  PeriodicGrid g(256);
  Field v = Field::from_function(g, 2, [](double x, double* o) {
    o[0] = std::sin(x);
    o[1] = 0.0;
  });
  Field u = stereo_inverse(v);
  Field ux = derivative(u, 1);
  Field vx = derivative(v, 1);
  for (int j = 0; j < g.size(); ++j) {
    const double s = v.at(0, j) * v.at(0, j);
    const double lhs = ux.at(0, j) * ux.at(0, j) + ux.at(1, j) * ux.at(1, j) +
                       ux.at(2, j) * ux.at(2, j);
    const double rhs = 16.0 * vx.at(0, j) * vx.at(0, j) / ((4 + s) * (4 + s));
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("winding degree") {
  PeriodicGrid g(256);
  CHECK(winding_degree(Field::from_function(g, [](double x) { return 3 * x; })) == 3);
  CHECK(winding_degree(Field::from_function(g, [](double) { return 1.2; })) == 0);
  CHECK(winding_degree(
            Field::from_function(g, [](double x) { return 2 * x + 0.3 * std::sin(5 * x); })) == 2);
  CHECK(winding_degree(Field::from_function(g, [](double x) { return -x; })) == -1);
  // wrapped atan2 values give the same count
  CHECK(winding_degree(Field::from_function(
            g, [](double x) { return std::atan2(std::sin(4 * x), std::cos(4 * x)); })) == 4);
  Field bad(g, 1);
  for (int j = 0; j < g.size(); ++j) bad.at(0, j) = (j % 2) * kPi;
  CHECK_THROWS_AS(winding_degree(bad), UnresolvableWinding);
  Field wrapped = Field::from_function(
      g, [](double x) { return std::atan2(std::sin(2 * x), std::cos(2 * x)); });
  Field un = unwrap_angle(wrapped);
  for (int j = 0; j < g.size(); ++j) CHECK(un.at(0, j) == Approx(2 * g.node(j)).epsilon(1e-12));
}

TEST_CASE("chart fit") {
  PeriodicGrid g(256);
  ChartFit f2 = chart_fit(harmonic_map(GeodesicChart::standard(3, 2), g));
  CHECK(f2.chart.n == 2);
  CHECK(f2.residual < 1e-10);
  CHECK(f2.chart.alpha[0] == Approx(1.0));
  CHECK(f2.chart.beta[1] == Approx(1.0));
  CHECK(std::abs(f2.chart.phase) < 1e-15);

  Rotation r(random_orthogonal(3, 9));
  SphereField rphi = SphereField(r.apply(harmonic_map(GeodesicChart::standard(3, 1), g).field()));
  ChartFit fr = chart_fit(rphi);
  CHECK(fr.residual < 1e-10);
  Vec re1 = r.apply(Vec{1, 0, 0}), re2 = r.apply(Vec{0, 1, 0});
  for (int i = 0; i < 3; ++i) {
    CHECK(fr.chart.alpha[i] == Approx(re1[i]).epsilon(1e-10));
    CHECK(fr.chart.beta[i] == Approx(re2[i]).epsilon(1e-10));
  }

  // phi plus small tangent noise
  Field phi = harmonic_map(GeodesicChart::standard(3, 1), g).field();
  Field noise = testutil::random_smooth(g, 3, 21, 6);
  noise = tangent_project(noise, phi);
  noise *= 0.01 / sobolev_norm(noise, 1);
  SphereField pert = SphereField::normalized(phi + noise);
  ChartFit fp = chart_fit(pert);
  CHECK(fp.chart.n == 1);
  CHECK(fp.residual <= 0.05);
  CHECK(fp.residual <= h1_distance(pert.field(), phi) * (1 + 1e-6));

  // constant field: level 0 with the normalized mean
  SphereField cst = harmonic_map(GeodesicChart(0, {0.6, 0.8, 0}, {-0.8, 0.6, 0}), g);
  ChartFit f0 = chart_fit(cst);
  CHECK(f0.chart.n == 0);
  CHECK(f0.residual < 1e-12);

  // a pure mode-2 field has no weight at mode 1
  CHECK_THROWS_AS(chart_fit(harmonic_map(GeodesicChart::standard(3, 2), g), 1), DegenerateMode);
}

TEST_CASE("alignment rotation") {
  Rotation a = align_rotation(GeodesicChart::standard(3, 1));
  Vec e1 = a.apply(Vec{1, 0, 0}), e2 = a.apply(Vec{0, 1, 0});
  CHECK(e1[0] == Approx(1.0));
  CHECK(e2[1] == Approx(1.0));
  Rotation s = align_rotation(GeodesicChart(1, {0, 1, 0}, {1, 0, 0}));
  CHECK(s.matrix()(0, 1) == Approx(1.0));
  CHECK(s.matrix()(1, 0) == Approx(1.0));
  CHECK(std::abs(std::abs(s.matrix().determinant()) - 1.0) < 1e-12);
  CHECK((s.matrix().transpose() * s.matrix() - Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  PeriodicGrid g(256);
  Eigen::MatrixXd q = random_orthogonal(4, 5);
  Vec al(4), be(4);
  for (int i = 0; i < 4; ++i) {
    al[i] = q(i, 0);
    be[i] = q(i, 1);
  }
  GeodesicChart ch(3, al, be, 0.0);
  Rotation ar = align_rotation(ch);
  Field mapped = ar.apply(harmonic_map(ch, g).field());
  Field phi = harmonic_map(GeodesicChart::standard(4, 3), g).field();
  CHECK(max_abs(mapped - phi) < 1e-10);
}

TEST_CASE("pole frame") {
  Vec p{0.48, -0.6, 0.64};
  Rotation f = pole_frame(p);
  Vec np = f.apply(p);
  CHECK(std::abs(np[0]) < 1e-15);
  CHECK(np[2] == Approx(1.0));
  Rotation id = pole_frame(Vec{0, 0, 1});
  CHECK(id.matrix().isIdentity());
}

TEST_CASE("topological family") {
  PeriodicGrid g(256);
  CHECK(energy(family_gamma(2, {kPi / 2}, g).field()) == Approx(kTwoPi).epsilon(1e-12));
  SphereField np = family_gamma(2, {0.0}, g);
  CHECK(energy(np.field()) < 1e-24);
  CHECK(np.field().at(2, 7) == 1.0);
  // 2 pi sin^2(pi/3) sin^2(pi/4) = 3 pi / 4
  CHECK(energy(family_gamma(3, {kPi / 3, kPi / 4}, g).field()) ==
        Approx(0.75 * kPi).epsilon(1e-10));
  for (int i = 0; i < 32; ++i) {
    const double s = kTwoPi * (i + 0.5) / 32;
    const double e = energy(family_gamma(2, {s}, g).field());
    CHECK(std::abs(e - kTwoPi * std::sin(s) * std::sin(s)) < 1e-8);
    CHECK(e <= kTwoPi + 1e-8);
  }
  CHECK_THROWS_AS(family_gamma(1, {}, g), DimensionTooSmall);
}

}
