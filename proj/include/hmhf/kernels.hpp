#pragma once

// Pointwise field kernels on component-major (SoA) storage: component c of a
// dim-component field occupies [c*n, (c+1)*n). A scalar reference set and an
// AVX2 set are compiled; the active one is picked at startup from cpuid.

namespace hmhf::kernels {

enum class Isa { scalar, avx2 };

struct Table {
  // u <- u/|u| pointwise; returns min and max of the pre-normalization norms
  void (*renormalize)(double* u, int dim, int n, double* min_norm, double* max_norm);
  // out = mask * (f - <f,u> u)
  void (*masked_tangent_project)(const double* f, const double* u, const double* mask,
                                 int dim, int n, double* out);
  // out = |ux|^2 u
  void (*grad_sq_times)(const double* ux, const double* u, int dim, int n, double* out);
  // pointwise |a|^2 summed over components, written to out (length n)
  void (*pointwise_sq)(const double* a, int dim, int n, double* out);
  double (*dot)(const double* a, const double* b, int n);
};

const Table& scalar_table();
const Table& avx2_table(); // falls back to scalar when AVX2 was not compiled in

bool cpu_has_avx2();
Isa active_isa();
void set_isa(Isa isa); // tests and benchmarks only
const Table& active();

inline void renormalize(double* u, int dim, int n, double* min_norm, double* max_norm) {
  active().renormalize(u, dim, n, min_norm, max_norm);
}
inline void masked_tangent_project(const double* f, const double* u, const double* mask,
                                   int dim, int n, double* out) {
  active().masked_tangent_project(f, u, mask, dim, n, out);
}
inline void grad_sq_times(const double* ux, const double* u, int dim, int n, double* out) {
  active().grad_sq_times(ux, u, dim, n, out);
}
inline void pointwise_sq(const double* a, int dim, int n, double* out) {
  active().pointwise_sq(a, dim, n, out);
}
inline double dot(const double* a, const double* b, int n) { return active().dot(a, b, n); }

} // namespace hmhf::kernels
