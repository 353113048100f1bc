// Compiled with -mavx2 only (no FMA) so elementwise results match the scalar
// kernels exactly. Only reached after a cpuid check.
#include "hmhf/kernels.hpp"

#include <cmath>
#include <immintrin.h>

namespace hmhf::kernels {

namespace avx2 {

void renormalize(double* u, int dim, int n, double* min_norm, double* max_norm) {
  __m256d lo = _mm256_set1_pd(INFINITY), hi = _mm256_setzero_pd();
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d s = _mm256_setzero_pd();
    for (int c = 0; c < dim; ++c) {
      const __m256d x = _mm256_loadu_pd(u + c * n + j);
      s = _mm256_add_pd(s, _mm256_mul_pd(x, x));
    }
    const __m256d r = _mm256_sqrt_pd(s);
    lo = _mm256_min_pd(lo, r);
    hi = _mm256_max_pd(hi, r);
    for (int c = 0; c < dim; ++c) {
      double* p = u + c * n + j;
      _mm256_storeu_pd(p, _mm256_div_pd(_mm256_loadu_pd(p), r));
    }
  }
  alignas(32) double l[4], h[4];
  _mm256_store_pd(l, lo);
  _mm256_store_pd(h, hi);
  double mn = std::fmin(std::fmin(l[0], l[1]), std::fmin(l[2], l[3]));
  double mx = std::fmax(std::fmax(h[0], h[1]), std::fmax(h[2], h[3]));
  for (; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double x = u[c * n + j];
      s = s + x * x;
    }
    const double r = std::sqrt(s);
    mn = r < mn ? r : mn;
    mx = r > mx ? r : mx;
    for (int c = 0; c < dim; ++c) u[c * n + j] = u[c * n + j] / r;
  }
  if (min_norm) *min_norm = mn;
  if (max_norm) *max_norm = mx;
}

void masked_tangent_project(const double* f, const double* u, const double* mask, int dim,
                            int n, double* out) {
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d d = _mm256_setzero_pd();
    for (int c = 0; c < dim; ++c)
      d = _mm256_add_pd(d, _mm256_mul_pd(_mm256_loadu_pd(f + c * n + j),
                                         _mm256_loadu_pd(u + c * n + j)));
    const __m256d m = _mm256_loadu_pd(mask + j);
    for (int c = 0; c < dim; ++c) {
      const __m256d t = _mm256_sub_pd(_mm256_loadu_pd(f + c * n + j),
                                      _mm256_mul_pd(d, _mm256_loadu_pd(u + c * n + j)));
      _mm256_storeu_pd(out + c * n + j, _mm256_mul_pd(m, t));
    }
  }
  for (; j < n; ++j) {
    double d = 0.0;
    for (int c = 0; c < dim; ++c) d = d + f[c * n + j] * u[c * n + j];
    const double m = mask[j];
    for (int c = 0; c < dim; ++c) out[c * n + j] = m * (f[c * n + j] - d * u[c * n + j]);
  }
}

void grad_sq_times(const double* ux, const double* u, int dim, int n, double* out) {
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d s = _mm256_setzero_pd();
    for (int c = 0; c < dim; ++c) {
      const __m256d x = _mm256_loadu_pd(ux + c * n + j);
      s = _mm256_add_pd(s, _mm256_mul_pd(x, x));
    }
    for (int c = 0; c < dim; ++c)
      _mm256_storeu_pd(out + c * n + j, _mm256_mul_pd(s, _mm256_loadu_pd(u + c * n + j)));
  }
  for (; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double x = ux[c * n + j];
      s = s + x * x;
    }
    for (int c = 0; c < dim; ++c) out[c * n + j] = s * u[c * n + j];
  }
}

void pointwise_sq(const double* a, int dim, int n, double* out) {
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d s = _mm256_setzero_pd();
    for (int c = 0; c < dim; ++c) {
      const __m256d x = _mm256_loadu_pd(a + c * n + j);
      s = _mm256_add_pd(s, _mm256_mul_pd(x, x));
    }
    _mm256_storeu_pd(out + j, s);
  }
  for (; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double x = a[c * n + j];
      s = s + x * x;
    }
    out[j] = s;
  }
}

double dot(const double* a, const double* b, int n) {
  __m256d acc = _mm256_setzero_pd();
  int j = 0;
  for (; j + 4 <= n; j += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j)));
  alignas(32) double t[4];
  _mm256_store_pd(t, acc);
  double s = (t[0] + t[1]) + (t[2] + t[3]);
  for (; j < n; ++j) s += a[j] * b[j];
  return s;
}

} // namespace avx2

const Table& avx2_table() {
  static const Table t{avx2::renormalize, avx2::masked_tangent_project, avx2::grad_sq_times,
                       avx2::pointwise_sq, avx2::dot};
  return t;
}

} // namespace hmhf::kernels
