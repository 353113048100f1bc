#include "hmhf/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace hmhf::kernels {

namespace scalar {

void renormalize(double* u, int dim, int n, double* min_norm, double* max_norm) {
  double lo = INFINITY, hi = 0.0;
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double x = u[c * n + j];
      s = s + x * x;
    }
    const double r = std::sqrt(s);
    lo = r < lo ? r : lo;
    hi = r > hi ? r : hi;
    for (int c = 0; c < dim; ++c) u[c * n + j] = u[c * n + j] / r;
  }
  if (min_norm) *min_norm = lo;
  if (max_norm) *max_norm = hi;
}

void masked_tangent_project(const double* f, const double* u, const double* mask, int dim,
                            int n, double* out) {
  for (int j = 0; j < n; ++j) {
    double d = 0.0;
    for (int c = 0; c < dim; ++c) d = d + f[c * n + j] * u[c * n + j];
    const double m = mask[j];
    for (int c = 0; c < dim; ++c) out[c * n + j] = m * (f[c * n + j] - d * u[c * n + j]);
  }
}

void grad_sq_times(const double* ux, const double* u, int dim, int n, double* out) {
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double x = ux[c * n + j];
      s = s + x * x;
    }
    for (int c = 0; c < dim; ++c) out[c * n + j] = s * u[c * n + j];
  }
}

void pointwise_sq(const double* a, int dim, int n, double* out) {
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double x = a[c * n + j];
      s = s + x * x;
    }
    out[j] = s;
  }
}

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += a[j] * b[j];
  return s;
}

} // namespace scalar

const Table& scalar_table() {
  static const Table t{scalar::renormalize, scalar::masked_tangent_project,
                       scalar::grad_sq_times, scalar::pointwise_sq, scalar::dot};
  return t;
}

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

std::atomic<const Table*> g_active{nullptr};
std::atomic<Isa> g_isa{Isa::scalar};

const Table* pick() {
  const char* env = std::getenv("HMHF_ISA");
  const bool want_scalar = env && std::strcmp(env, "scalar") == 0;
  if (!want_scalar && cpu_has_avx2()) {
    g_isa = Isa::avx2;
    return &avx2_table();
  }
  g_isa = Isa::scalar;
  return &scalar_table();
}

} // namespace

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = pick();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

Isa active_isa() {
  active();
  return g_isa;
}

void set_isa(Isa isa) {
  if (isa == Isa::avx2 && cpu_has_avx2()) {
    g_isa = Isa::avx2;
    g_active = &avx2_table();
  } else {
    g_isa = Isa::scalar;
    g_active = &scalar_table();
  }
}

} // namespace hmhf::kernels
