#include "doctest.h"

#include "hmhf/kernels.hpp"
#include "test_util.hpp"

#include <vector>

using namespace hmhf;

TEST_SUITE("kernels") {

TEST_CASE("dispatch reports a usable instruction set") {
  const kernels::Isa isa = kernels::active_isa();
  if (kernels::cpu_has_avx2()) {
    CHECK((isa == kernels::Isa::avx2 || isa == kernels::Isa::scalar));
  } else {
    CHECK(isa == kernels::Isa::scalar);
  }
}

TEST_CASE("avx2 elementwise kernels match scalar bit for bit") {
  if (!kernels::cpu_has_avx2()) return;
  const auto& s = kernels::scalar_table();
  const auto& v = kernels::avx2_table();
  for (int n : {1, 3, 4, 7, 64, 257}) {
    for (int dim : {1, 2, 3, 5}) {
      PeriodicGrid g(32);
      std::mt19937 rng(n * 31 + dim);
      std::uniform_real_distribution<double> ud(-2.0, 2.0);
      std::vector<double> a(dim * n), b(dim * n), m(n);
      for (auto& x : a) x = ud(rng);
      for (auto& x : b) x = ud(rng);
      for (auto& x : m) x = ud(rng) > 0 ? 1.0 : 0.0;

      std::vector<double> r1 = a, r2 = a;
      double lo1, hi1, lo2, hi2;
      s.renormalize(r1.data(), dim, n, &lo1, &hi1);
      v.renormalize(r2.data(), dim, n, &lo2, &hi2);
      CHECK(r1 == r2);
      CHECK(lo1 == lo2);
      CHECK(hi1 == hi2);

      std::vector<double> o1(dim * n), o2(dim * n);
      s.masked_tangent_project(a.data(), b.data(), m.data(), dim, n, o1.data());
      v.masked_tangent_project(a.data(), b.data(), m.data(), dim, n, o2.data());
      CHECK(o1 == o2);

      s.grad_sq_times(a.data(), b.data(), dim, n, o1.data());
      v.grad_sq_times(a.data(), b.data(), dim, n, o2.data());
      CHECK(o1 == o2);

      std::vector<double> q1(n), q2(n);
      s.pointwise_sq(a.data(), dim, n, q1.data());
      v.pointwise_sq(a.data(), dim, n, q2.data());
      CHECK(q1 == q2);
    }
  }
}

TEST_CASE("avx2 dot agrees with scalar to rounding") {
  if (!kernels::cpu_has_avx2()) return;
  for (int n : {1, 5, 256, 1023}) {
    std::mt19937 rng(n);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    std::vector<double> a(n), b(n);
    double mag = 0.0;
    for (int i = 0; i < n; ++i) {
      a[i] = ud(rng);
      b[i] = ud(rng);
      mag += std::abs(a[i] * b[i]);
    }
    const double d1 = kernels::scalar_table().dot(a.data(), b.data(), n);
    const double d2 = kernels::avx2_table().dot(a.data(), b.data(), n);
    CHECK(std::abs(d1 - d2) <= 1e-14 * mag);
  }
}

TEST_CASE("renormalize puts every node on the sphere") {
  std::vector<double> u{3.0, 0.0, 1.0, 4.0, 2.0, 0.0};
  double lo, hi;
  kernels::scalar_table().renormalize(u.data(), 2, 3, &lo, &hi);
  CHECK(u[0] == doctest::Approx(0.6));
  CHECK(u[3] == doctest::Approx(0.8));
  CHECK(lo == doctest::Approx(1.0));
  CHECK(hi == doctest::Approx(5.0));
}

TEST_CASE("set_isa switches tables") {
  kernels::set_isa(kernels::Isa::scalar);
  CHECK(kernels::active_isa() == kernels::Isa::scalar);
  kernels::set_isa(kernels::Isa::avx2);
  CHECK(kernels::active_isa() ==
        (kernels::cpu_has_avx2() ? kernels::Isa::avx2 : kernels::Isa::scalar));
}

}
