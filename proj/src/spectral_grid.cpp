#include "hmhf/spectral_grid.hpp"

#include "hmhf/errors.hpp"
#include "hmhf/kernels.hpp"

#include <Eigen/Dense>
#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <string>

namespace hmhf {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// FFTW plans are created once per size under a lock and then executed with
// the new-array interface, which is safe to call concurrently.
struct Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

const Plans& plans_for(int n) {
  static std::mutex mu;
  static std::map<int, Plans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> r(n);
  std::vector<fftw_complex> c(n / 2 + 1);
  Plans p;
  p.r2c = fftw_plan_dft_r2c_1d(n, r.data(), c.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.c2r = fftw_plan_dft_c2r_1d(n, c.data(), r.data(),
                               FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  return cache.emplace(n, p).first->second;
}

} // namespace

PeriodicGrid::PeriodicGrid(int size) : size_(size) {
  if (size < 32 || !is_power_of_two(size))
    throw InvalidArgument("grid size must be a power of two >= 32, got " +
                          std::to_string(size));
}

std::vector<double> PeriodicGrid::nodes() const {
  std::vector<double> x(size_);
  for (int j = 0; j < size_; ++j) x[j] = node(j);
  return x;
}

// ---------------------------------------------------------------- Field

Field::Field(PeriodicGrid grid, int dim)
    : grid_(grid), dim_(dim), data_(static_cast<std::size_t>(dim) * grid.size(), 0.0) {
  if (dim < 1) throw InvalidArgument("field dimension must be >= 1");
}

Field::Field(PeriodicGrid grid, int dim, std::vector<double> data)
    : grid_(grid), dim_(dim), data_(std::move(data)) {
  if (dim < 1) throw InvalidArgument("field dimension must be >= 1");
  if (data_.size() != static_cast<std::size_t>(dim) * grid.size())
    throw SizeMismatch("field data length " + std::to_string(data_.size()) +
                       " does not match dim*size " + std::to_string(dim * grid.size()));
}

Field Field::from_function(PeriodicGrid grid, const std::function<double(double)>& f) {
  Field out(grid, 1);
  for (int j = 0; j < grid.size(); ++j) out.at(0, j) = f(grid.node(j));
  return out;
}

Field Field::from_function(PeriodicGrid grid, int dim,
                           const std::function<void(double, double*)>& f) {
  Field out(grid, dim);
  std::vector<double> v(dim);
  for (int j = 0; j < grid.size(); ++j) {
    f(grid.node(j), v.data());
    for (int c = 0; c < dim; ++c) out.at(c, j) = v[c];
  }
  return out;
}

std::vector<double> Field::point(int j) const {
  std::vector<double> v(dim_);
  for (int c = 0; c < dim_; ++c) v[c] = at(c, j);
  return v;
}

void Field::set_point(int j, const std::vector<double>& v) {
  if (static_cast<int>(v.size()) != dim_) throw SizeMismatch("set_point: wrong vector length");
  for (int c = 0; c < dim_; ++c) at(c, j) = v[c];
}

void require_same_shape(const Field& a, const Field& b, const char* where) {
  if (a.grid() != b.grid() || a.dim() != b.dim())
    throw SizeMismatch(std::string(where) + ": field shapes differ");
}

Field& Field::operator+=(const Field& o) {
  require_same_shape(*this, o, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_same_shape(*this, o, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Field& Field::axpy(double a, const Field& x) {
  require_same_shape(*this, x, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
  return *this;
}

Field Field::component(int c) const {
  Field out(grid_, 1);
  std::copy(comp(c), comp(c) + size(), out.comp(0));
  return out;
}

void Field::set_component(int c, const Field& scalar) {
  if (scalar.grid() != grid_ || scalar.dim() != 1)
    throw SizeMismatch("set_component: expected scalar field on same grid");
  std::copy(scalar.comp(0), scalar.comp(0) + size(), comp(c));
}

bool Field::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

double max_abs(const Field& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

// ---------------------------------------------------------------- Window

Window::Window(PeriodicGrid grid, std::vector<std::pair<double, double>> arcs)
    : grid_(grid), arcs_(std::move(arcs)), mask_(grid.size(), 0.0) {
  if (arcs_.empty()) throw InvalidArgument("window needs at least one arc");
  for (const auto& [a, b] : arcs_) {
    if (!(a >= 0.0 && a < b && b <= kTwoPi + 1e-12))
      throw InvalidArgument("window arcs must satisfy 0 <= a < b <= 2pi");
  }
  int count = 0;
  for (int j = 0; j < grid.size(); ++j) {
    if (contains(grid.node(j))) {
      mask_[j] = 1.0;
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("window contains no grid node");
}

Window Window::full(PeriodicGrid grid) { return Window(grid, {{0.0, kTwoPi}}); }

bool Window::contains(double x) const {
  x = std::fmod(x, kTwoPi);
  if (x < 0) x += kTwoPi;
  // tolerance keeps node-aligned endpoints such as pi/2 inclusive at the left
  const double tol = 1e-12;
  for (const auto& [a, b] : arcs_)
    if (x >= a - tol && x < b - tol) return true;
  return false;
}

double Window::measure() const {
  double n = 0.0;
  for (double m : mask_) n += m;
  return n * grid_.spacing();
}

std::vector<std::pair<int, int>> Window::node_ranges() const {
  std::vector<std::pair<int, int>> out;
  const int n = grid_.size();
  int j = 0;
  while (j < n) {
    if (mask_[j] == 0.0) {
      ++j;
      continue;
    }
    int k = j;
    while (k < n && mask_[k] != 0.0) ++k;
    out.emplace_back(j, k);
    j = k;
  }
  return out;
}

bool Window::is_full() const {
  for (double m : mask_)
    if (m == 0.0) return false;
  return true;
}

// ---------------------------------------------------------------- transforms

Spectrum::Spectrum(int size, int dim)
    : size_(size), dim_(dim), c_(static_cast<std::size_t>(dim) * (size / 2 + 1)) {}

void forward_transform(const double* in, std::complex<double>* out, int size) {
  const Plans& p = plans_for(size);
  thread_local std::vector<double> buf;
  buf.assign(in, in + size);
  fftw_execute_dft_r2c(p.r2c, buf.data(), reinterpret_cast<fftw_complex*>(out));
  const double inv = 1.0 / size;
  for (int k = 0; k <= size / 2; ++k) out[k] *= inv;
}

void inverse_transform(const std::complex<double>* in, double* out, int size) {
  const Plans& p = plans_for(size);
  thread_local std::vector<std::complex<double>> buf;
  buf.assign(in, in + size / 2 + 1);
  fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(buf.data()), out);
}

Spectrum dft(const Field& f) {
  Spectrum s(f.size(), f.dim());
  for (int c = 0; c < f.dim(); ++c) forward_transform(f.comp(c), s.comp(c), f.size());
  return s;
}

Field idft(const Spectrum& s, PeriodicGrid grid) {
  if (s.size() != grid.size())
    throw SizeMismatch("idft: spectrum size " + std::to_string(s.size()) +
                       " does not match grid " + std::to_string(grid.size()));
  Field f(grid, s.dim());
  for (int c = 0; c < s.dim(); ++c) inverse_transform(s.comp(c), f.comp(c), grid.size());
  return f;
}

Field derivative(const Spectrum& s, PeriodicGrid grid, int order) {
  if (order != 1 && order != 2) throw InvalidArgument("derivative order must be 1 or 2");
  Spectrum d = s;
  const int ny = grid.size() / 2;
  for (int c = 0; c < d.dim(); ++c) {
    auto* z = d.comp(c);
    for (int n = 0; n <= ny; ++n) {
      if (order == 1)
        z[n] = (n == ny) ? 0.0 : std::complex<double>(0.0, n) * z[n];
      else
        z[n] *= -static_cast<double>(n) * n;
    }
  }
  return idft(d, grid);
}

Field derivative(const Field& f, int order) { return derivative(dft(f), f.grid(), order); }

double sobolev_norm(const Spectrum& sp, int s, bool homogeneous) {
  if (s < 0 || s > 2) throw InvalidArgument("sobolev order must be 0, 1 or 2");
  double acc = 0.0;
  for (int c = 0; c < sp.dim(); ++c) {
    const auto* z = sp.comp(c);
    for (int n = 0; n < sp.modes(); ++n) {
      const double n2 = static_cast<double>(n) * n;
      double w = 1.0;
      if (homogeneous) {
        w = (s == 0) ? 1.0 : (s == 1 ? n2 : n2 * n2);
      } else {
        w = (s == 0) ? 1.0 : (s == 1 ? 1.0 + n2 : (1.0 + n2) * (1.0 + n2));
      }
      acc += sp.multiplicity(n) * w * std::norm(z[n]);
    }
  }
  return std::sqrt(kTwoPi * acc);
}

double sobolev_norm(const Field& f, int s, bool homogeneous) {
  return sobolev_norm(dft(f), s, homogeneous);
}

double energy(const Spectrum& s) {
  const double r = sobolev_norm(s, 1, true);
  return r * r;
}

double energy(const Field& f) { return energy(dft(f)); }

double l2_inner(const Field& a, const Field& b) {
  require_same_shape(a, b, "l2_inner");
  double s = 0.0;
  for (int c = 0; c < a.dim(); ++c) s += kernels::dot(a.comp(c), b.comp(c), a.size());
  return s * a.grid().spacing();
}

int lambda_cutoff(double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  int m = static_cast<int>(std::floor(std::sqrt(lambda)));
  while (static_cast<double>(m + 1) * (m + 1) <= lambda) ++m;
  while (m > 0 && static_cast<double>(m) * m > lambda) --m;
  return m;
}

namespace {

Field project_modes(const Field& f, double lambda, bool keep_low) {
  const int m = lambda_cutoff(lambda);
  Spectrum s = dft(f);
  for (int c = 0; c < s.dim(); ++c) {
    auto* z = s.comp(c);
    for (int n = 0; n < s.modes(); ++n) {
      const bool low = n <= m;
      if (low != keep_low) z[n] = 0.0;
    }
  }
  return idft(s, f.grid());
}

} // namespace

Field p_lambda(const Field& f, double lambda) { return project_modes(f, lambda, true); }
Field p_lambda_perp(const Field& f, double lambda) { return project_modes(f, lambda, false); }

// ---------------------------------------------------------------- Gram

double real_mode(int a, double x) {
  if (a == 0) return 1.0 / std::sqrt(kTwoPi);
  const int m = (a + 1) / 2;
  return (a % 2 == 1 ? std::cos(m * x) : std::sin(m * x)) / std::sqrt(kPi);
}

std::vector<double> windowed_gram(int modes_m, const Window& window) {
  const int nb = 2 * modes_m + 1;
  const PeriodicGrid& g = window.grid();
  if (modes_m >= g.size() / 2)
    throw SingularGram("retained modes reach the Nyquist frequency of the grid");
  std::vector<double> phi(static_cast<std::size_t>(nb) * g.size());
  for (int a = 0; a < nb; ++a)
    for (int j = 0; j < g.size(); ++j) phi[static_cast<std::size_t>(a) * g.size() + j] =
        real_mode(a, g.node(j));
  std::vector<double> gram(static_cast<std::size_t>(nb) * nb, 0.0);
  const auto& mask = window.mask();
  for (int a = 0; a < nb; ++a) {
    for (int b = a; b < nb; ++b) {
      double s = 0.0;
      for (int j = 0; j < g.size(); ++j)
        s += mask[j] * phi[static_cast<std::size_t>(a) * g.size() + j] *
             phi[static_cast<std::size_t>(b) * g.size() + j];
      gram[a * nb + b] = gram[b * nb + a] = s * g.spacing();
    }
  }
  return gram;
}

double spectral_constant(double lambda, const Window& window) {
  if (window.is_full()) return 1.0;
  const int m = lambda_cutoff(lambda);
  const int nb = 2 * m + 1;
  std::vector<double> gram = windowed_gram(m, window);
  Eigen::Map<Eigen::MatrixXd> gm(gram.data(), nb, nb);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gm, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  if (lo < 1e-14)
    throw SingularGram("smallest windowed Gram eigenvalue " + std::to_string(lo) +
                       " below 1e-14 at lambda=" + std::to_string(lambda));
  return std::sqrt(std::min(lo, 1.0));
}

} // namespace hmhf
