#pragma once

#include <complex>
#include <functional>
#include <utility>
#include <vector>

namespace hmhf {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Uniform grid on R/2piZ with x_j = 2 pi j / size.
class PeriodicGrid {
public:
  explicit PeriodicGrid(int size = 256);
  int size() const { return size_; }
  double spacing() const { return kTwoPi / size_; }
  double node(int j) const { return kTwoPi * j / size_; }
  std::vector<double> nodes() const;
  int nyquist() const { return size_ / 2; }
  bool operator==(const PeriodicGrid& o) const { return size_ == o.size_; }
  bool operator!=(const PeriodicGrid& o) const { return size_ != o.size_; }

private:
  int size_;
};

// dim-component samples stored component-major: component c is the
// contiguous block [c*size, (c+1)*size).
class Field {
public:
  Field() = default;
  Field(PeriodicGrid grid, int dim);
  Field(PeriodicGrid grid, int dim, std::vector<double> data);

  static Field from_function(PeriodicGrid grid, const std::function<double(double)>& f);
  static Field from_function(PeriodicGrid grid, int dim,
                             const std::function<void(double, double*)>& f);

  const PeriodicGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  int size() const { return grid_.size(); }

  double* comp(int c) { return data_.data() + static_cast<std::size_t>(c) * grid_.size(); }
  const double* comp(int c) const {
    return data_.data() + static_cast<std::size_t>(c) * grid_.size();
  }
  double& at(int c, int j) { return data_[static_cast<std::size_t>(c) * grid_.size() + j]; }
  double at(int c, int j) const {
    return data_[static_cast<std::size_t>(c) * grid_.size() + j];
  }
  std::vector<double> point(int j) const;
  void set_point(int j, const std::vector<double>& v);

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);
  Field& axpy(double a, const Field& x); // this += a*x
  Field component(int c) const;          // one component as a scalar field
  void set_component(int c, const Field& scalar);
  bool all_finite() const;

private:
  PeriodicGrid grid_{256};
  int dim_ = 0;
  std::vector<double> data_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);
double max_abs(const Field& a);
void require_same_shape(const Field& a, const Field& b, const char* where);

// Union of half-open arcs [a, b) with 0 <= a < b <= 2 pi, plus the node mask.
class Window {
public:
  Window() = default;
  Window(PeriodicGrid grid, std::vector<std::pair<double, double>> arcs);
  static Window full(PeriodicGrid grid);

  const PeriodicGrid& grid() const { return grid_; }
  const std::vector<std::pair<double, double>>& arcs() const { return arcs_; }
  const std::vector<double>& mask() const { return mask_; }
  bool contains(double x) const;
  bool contains_node(int j) const { return mask_[j] != 0.0; }
  // lengths of the node-aligned arcs: node j covers [x_j, x_{j+1})
  double measure() const;
  // node index ranges [first, last) covered by each arc
  std::vector<std::pair<int, int>> node_ranges() const;
  bool single_arc() const { return arcs_.size() == 1; }
  bool is_full() const;

private:
  PeriodicGrid grid_{256};
  std::vector<std::pair<double, double>> arcs_;
  std::vector<double> mask_;
};

// Complex coefficients c_n, n = 0..size/2, per component, with the
// normalization f(x_j) = sum_{n in Z} c_n e^{i n x_j} (c_{-n} = conj c_n).
class Spectrum {
public:
  Spectrum() = default;
  Spectrum(int size, int dim);
  int size() const { return size_; }
  int dim() const { return dim_; }
  int modes() const { return size_ / 2 + 1; }
  std::complex<double>& at(int c, int n) {
    return c_[static_cast<std::size_t>(c) * modes() + n];
  }
  std::complex<double> at(int c, int n) const {
    return c_[static_cast<std::size_t>(c) * modes() + n];
  }
  std::complex<double>* comp(int c) { return c_.data() + static_cast<std::size_t>(c) * modes(); }
  const std::complex<double>* comp(int c) const {
    return c_.data() + static_cast<std::size_t>(c) * modes();
  }
  std::vector<std::complex<double>>& data() { return c_; }
  const std::vector<std::complex<double>>& data() const { return c_; }
  // multiplicity of mode n in the full two-sided sum (1 for 0 and Nyquist)
  double multiplicity(int n) const { return (n == 0 || n == size_ / 2) ? 1.0 : 2.0; }

private:
  int size_ = 0, dim_ = 0;
  std::vector<std::complex<double>> c_;
};

// Raw transforms on one component.
void forward_transform(const double* in, std::complex<double>* out, int size);
void inverse_transform(const std::complex<double>* in, double* out, int size);

Spectrum dft(const Field& f);
Field idft(const Spectrum& s, PeriodicGrid grid);

Field derivative(const Field& f, int order);
Field derivative(const Spectrum& s, PeriodicGrid grid, int order);

double energy(const Field& f);
double energy(const Spectrum& s);
double sobolev_norm(const Field& f, int s, bool homogeneous = false);
double sobolev_norm(const Spectrum& sp, int s, bool homogeneous = false);
double l2_inner(const Field& a, const Field& b);

// largest M with M^2 <= lambda
int lambda_cutoff(double lambda);
Field p_lambda(const Field& f, double lambda);
Field p_lambda_perp(const Field& f, double lambda);

// Discrete route: node-mask Gram of the retained real modes, double precision.
double spectral_constant(double lambda, const Window& window);
// Continuum route: exact arc integrals of the node-aligned arcs, smallest
// eigenvalue in adaptive multiprecision. Valid far below double precision.
double spectral_constant_exact(double lambda, const Window& window);
// returns -log c(lambda) directly; usable when c underflows a double
double spectral_log_constant_exact(double lambda, const Window& window);
// sup over M = 1..floor(sqrt(lambda_max)) of -log c(M^2) / M, exact route, cached
double fit_spectral_c0(const Window& window, double lambda_max);

// Windowed Gram of the retained real orthonormal modes, discrete inner
// product h * sum_j mask_j phi_a(x_j) phi_b(x_j). Basis order: 1, cos x,
// sin x, cos 2x, sin 2x, ...
std::vector<double> windowed_gram(int modes_m, const Window& window);
// value of basis function a at x (orthonormal in L2(T^1))
double real_mode(int a, double x);

} // namespace hmhf
