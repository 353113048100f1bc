#include "hmhf/sphere_geometry.hpp"

#include "hmhf/errors.hpp"
#include "hmhf/kernels.hpp"

#include <cmath>
#include <string>

namespace hmhf {

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw SizeMismatch("dot: vector lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec basis_vector(int dim, int i) {
  Vec e(dim, 0.0);
  e[i] = 1.0;
  return e;
}

UnitVector::UnitVector(Vec coords, double tol) : c_(std::move(coords)) {
  if (c_.empty()) throw InvalidArgument("unit vector must be nonempty");
  if (std::abs(norm(c_) - 1.0) > tol) throw InvalidArgument("vector is not unit length");
}

// ---------------------------------------------------------------- charts

GeodesicChart::GeodesicChart(int n_, Vec alpha_, Vec beta_, double phase_)
    : n(n_), alpha(std::move(alpha_)), beta(std::move(beta_)), phase(phase_) {
  if (alpha.size() != beta.size() || alpha.size() < 2)
    throw InvalidArgument("chart vectors must share a length >= 2");
  const double tol = 1e-12;
  if (std::abs(norm(alpha) - 1.0) > tol || std::abs(norm(beta) - 1.0) > tol ||
      std::abs(dot(alpha, beta)) > tol)
    throw InvalidArgument("chart vectors must be orthonormal");
}

Vec GeodesicChart::point(double x) const {
  const double c = std::cos(n * x + phase), s = std::sin(n * x + phase);
  Vec p(alpha.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = alpha[i] * c + beta[i] * s;
  return p;
}

GeodesicChart GeodesicChart::standard(int dim, int n, double phase) {
  return GeodesicChart(n, basis_vector(dim, 0), basis_vector(dim, 1), phase);
}

SphereField harmonic_map(const GeodesicChart& chart, PeriodicGrid grid) {
  Field f(grid, chart.dim());
  for (int j = 0; j < grid.size(); ++j) f.set_point(j, chart.point(grid.node(j)));
  return SphereField(std::move(f), 1e-12);
}

// ---------------------------------------------------------------- rotations

Rotation::Rotation(Eigen::MatrixXd m, double tol) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw InvalidArgument("rotation must be square");
  const Eigen::MatrixXd e = m_.transpose() * m_ - Eigen::MatrixXd::Identity(m_.rows(), m_.cols());
  if (e.cwiseAbs().maxCoeff() > tol) throw InvalidArgument("matrix is not orthogonal");
}

Rotation Rotation::identity(int dim) { return Rotation(Eigen::MatrixXd::Identity(dim, dim)); }

Rotation Rotation::transpose() const { return Rotation(m_.transpose(), 1e-10); }

Rotation Rotation::operator*(const Rotation& o) const { return Rotation(m_ * o.m_, 1e-10); }

Vec Rotation::apply(const Vec& v) const {
  if (static_cast<int>(v.size()) != dim()) throw SizeMismatch("rotation: vector length");
  Vec out(v.size(), 0.0);
  for (int i = 0; i < dim(); ++i)
    for (int j = 0; j < dim(); ++j) out[i] += m_(i, j) * v[j];
  return out;
}

Field Rotation::apply(const Field& f) const {
  if (f.dim() != dim()) throw SizeMismatch("rotation: field dimension");
  Field out(f.grid(), f.dim());
  const int n = f.size();
  for (int i = 0; i < dim(); ++i) {
    double* o = out.comp(i);
    for (int j = 0; j < dim(); ++j) {
      const double a = m_(i, j);
      if (a == 0.0) continue;
      const double* s = f.comp(j);
      for (int p = 0; p < n; ++p) o[p] += a * s[p];
    }
  }
  return out;
}

Rotation align_rotation(const GeodesicChart& chart) {
  const int d = chart.dim();
  std::vector<Vec> rows{chart.alpha, chart.beta};
  for (int i = 0; i < d && static_cast<int>(rows.size()) < d; ++i) {
    Vec v = basis_vector(d, i);
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& r : rows) {
        const double c = dot(v, r);
        for (int q = 0; q < d; ++q) v[q] -= c * r[q];
      }
    const double nv = norm(v);
    if (nv < 1e-6) continue;
    for (double& x : v) x /= nv;
    rows.push_back(v);
  }
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rows[i][j];
  return Rotation(m, 1e-11);
}

Rotation pole_frame(const Vec& p) {
  const int d = static_cast<int>(p.size());
  if (std::abs(norm(p) - 1.0) > 1e-10) throw InvalidArgument("pole_frame: p is not unit");
  Vec w = p;
  w[d - 1] -= 1.0;
  const double ww = dot(w, w);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
  if (ww < 1e-30) return Rotation(m);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) -= 2.0 * w[i] * w[j] / ww;
  return Rotation(m, 1e-11);
}

// ---------------------------------------------------------------- fields

SphereField::SphereField(Field f, double tol) : f_(std::move(f)) {
  if (f_.dim() < 2) throw InvalidArgument("sphere field needs dimension >= 2");
  if (!f_.all_finite()) throw InvalidArgument("sphere field has non-finite entries");
  const double r = constraint_residual();
  if (r > tol)
    throw InvalidArgument("sphere field violates the unit constraint by " + std::to_string(r));
}

SphereField SphereField::normalized(Field f) {
  kernels::renormalize(f.data().data(), f.dim(), f.size(), nullptr, nullptr);
  return SphereField(std::move(f), 1e-12);
}

double SphereField::constraint_residual() const {
  std::vector<double> sq(f_.size());
  kernels::pointwise_sq(f_.data().data(), f_.dim(), f_.size(), sq.data());
  double r = 0.0;
  for (double s : sq) r = std::max(r, std::abs(std::sqrt(s) - 1.0));
  return r;
}

Vec tangent_project(const Vec& f, const Vec& u) {
  const double c = dot(f, u);
  Vec out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] - c * u[i];
  return out;
}

Field tangent_project(const Field& f, const Field& u, const std::vector<double>* mask) {
  require_same_shape(f, u, "tangent_project");
  Field out(f.grid(), f.dim());
  std::vector<double> ones;
  if (!mask) {
    ones.assign(f.size(), 1.0);
    mask = &ones;
  }
  kernels::masked_tangent_project(f.data().data(), u.data().data(), mask->data(), f.dim(),
                                  f.size(), out.data().data());
  return out;
}

// ---------------------------------------------------------------- stereographic

Vec stereo_forward(const Vec& u) {
  const int d = static_cast<int>(u.size());
  const double last = u[d - 1];
  if (last <= -1.0 + kSouthPoleTol) throw SouthPoleSingularity("point at the south pole");
  Vec v(d - 1);
  for (int i = 0; i < d - 1; ++i) v[i] = 2.0 * u[i] / (1.0 + last);
  return v;
}

Vec stereo_inverse(const Vec& v) {
  const double s = dot(v, v);
  Vec u(v.size() + 1);
  for (std::size_t i = 0; i < v.size(); ++i) u[i] = 4.0 * v[i] / (4.0 + s);
  u[v.size()] = (4.0 - s) / (4.0 + s);
  return u;
}

Field stereo_forward(const Field& u) {
  const int k = u.dim() - 1;
  Field v(u.grid(), k);
  const double* last = u.comp(k);
  for (int j = 0; j < u.size(); ++j) {
    if (last[j] <= -1.0 + kSouthPoleTol)
      throw SouthPoleSingularity("grid node " + std::to_string(j) + " at the south pole");
    const double f = 2.0 / (1.0 + last[j]);
    for (int c = 0; c < k; ++c) v.at(c, j) = f * u.at(c, j);
  }
  return v;
}

Field stereo_inverse(const Field& v) {
  const int k = v.dim();
  Field u(v.grid(), k + 1);
  std::vector<double> s(v.size());
  kernels::pointwise_sq(v.data().data(), k, v.size(), s.data());
  for (int j = 0; j < v.size(); ++j) {
    const double den = 4.0 + s[j];
    for (int c = 0; c < k; ++c) u.at(c, j) = 4.0 * v.at(c, j) / den;
    u.at(k, j) = (4.0 - s[j]) / den;
  }
  return u;
}

// ---------------------------------------------------------------- winding

namespace {

double principal(double d) { return d - kTwoPi * std::nearbyint(d / kTwoPi); }

std::vector<double> reduced_jumps(const Field& theta) {
  if (theta.dim() != 1) throw SizeMismatch("winding: expected a scalar field");
  const int n = theta.size();
  const double* t = theta.comp(0);
  std::vector<double> r(n);
  for (int j = 0; j < n; ++j) {
    const double d = (j + 1 < n ? t[j + 1] : t[0]) - t[j];
    r[j] = principal(d);
    if (std::abs(r[j]) >= kPi - 1e-9)
      throw UnresolvableWinding("adjacent angle jump of pi at node " + std::to_string(j));
  }
  return r;
}

} // namespace

int winding_degree(const Field& theta) {
  const std::vector<double> r = reduced_jumps(theta);
  double s = 0.0;
  for (double x : r) s += x;
  return static_cast<int>(std::lround(s / kTwoPi));
}

Field unwrap_angle(const Field& theta) {
  const std::vector<double> r = reduced_jumps(theta);
  Field out(theta.grid(), 1);
  out.at(0, 0) = theta.at(0, 0);
  for (int j = 1; j < theta.size(); ++j) out.at(0, j) = out.at(0, j - 1) + r[j - 1];
  return out;
}

// ---------------------------------------------------------------- chart fit

double h1_distance(const Field& a, const Field& b) { return sobolev_norm(a - b, 1, false); }

int nearest_level(double e) {
  return static_cast<int>(std::lround(std::sqrt(std::max(e, 0.0) / kTwoPi)));
}

ChartFit chart_fit(const SphereField& u, int n) {
  if (n < 0) throw InvalidArgument("chart_fit: level must be >= 0");
  const int d = u.dim();
  const Spectrum s = dft(u.field());
  if (n >= s.modes() - 1) throw InvalidArgument("chart_fit: level beyond grid resolution");
  GeodesicChart chart;
  if (n == 0) {
    Vec m(d);
    for (int c = 0; c < d; ++c) m[c] = s.at(c, 0).real();
    const double nm = norm(m);
    if (nm < 1e-6) throw DegenerateMode("mean of the field vanishes");
    for (double& x : m) x /= nm;
    int pick = 0;
    for (int c = 1; c < d; ++c)
      if (std::abs(m[c]) < std::abs(m[pick]) - 1e-14) pick = c;
    Vec b = basis_vector(d, pick);
    for (int pass = 0; pass < 2; ++pass) {
      const double c = dot(b, m);
      for (int q = 0; q < d; ++q) b[q] -= c * m[q];
    }
    const double nb = norm(b);
    for (double& x : b) x /= nb;
    chart = GeodesicChart(0, m, b, 0.0);
  } else {
    Vec a0(d), b0(d);
    double amp = 0.0;
    for (int c = 0; c < d; ++c) {
      const auto z = s.at(c, n);
      a0[c] = 2.0 * z.real();
      b0[c] = -2.0 * z.imag();
      amp += std::norm(z);
    }
    if (std::sqrt(amp) < 1e-6) throw DegenerateMode("Fourier mode " + std::to_string(n) +
                                                    " has no weight");
    // polar factor of the 2 x d matrix with rows a0, b0
    Eigen::Matrix2d sm;
    sm << dot(a0, a0), dot(a0, b0), dot(a0, b0), dot(b0, b0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sm);
    const Eigen::Vector2d ev = es.eigenvalues();
    if (ev(0) <= 1e-12 * ev(1))
      throw DegenerateMode("real and imaginary parts of mode " + std::to_string(n) +
                           " are parallel");
    const Eigen::Matrix2d isq = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
                                es.eigenvectors().transpose();
    Vec al(d), be(d);
    for (int c = 0; c < d; ++c) {
      al[c] = isq(0, 0) * a0[c] + isq(0, 1) * b0[c];
      be[c] = isq(1, 0) * a0[c] + isq(1, 1) * b0[c];
    }
    // clean rounding so the chart invariants hold to 1e-12
    const double na = norm(al);
    for (double& x : al) x /= na;
    const double ab = dot(al, be);
    for (int c = 0; c < d; ++c) be[c] -= ab * al[c];
    const double nbv = norm(be);
    for (double& x : be) x /= nbv;
    chart = GeodesicChart(n, al, be, 0.0);
  }
  ChartFit out;
  out.chart = chart;
  out.residual = h1_distance(u.field(), harmonic_map(chart, u.grid()).field());
  return out;
}

ChartFit chart_fit(const SphereField& u) { return chart_fit(u, nearest_level(energy(u.field()))); }

// ---------------------------------------------------------------- family

Vec family_point(const Vec& s, double x) {
  auto reduce = [](double a) {
    a = std::fmod(a, kTwoPi);
    return a < 0 ? a + kTwoPi : a;
  };
  if (s.empty()) return Vec{std::cos(x), std::sin(x)};
  if (s.size() == 1) {
    const double a = reduce(s[0]);
    const double sa = std::sin(a);
    const double sign = a > kPi ? -1.0 : 1.0;
    return Vec{sign * sa * std::cos(x), sa * std::sin(x), std::cos(a)};
  }
  const double a = reduce(s[0]);
  const Vec inner = family_point(Vec(s.begin() + 1, s.end()), x);
  const double f = (a > kPi ? -1.0 : 1.0) * std::sin(a);
  Vec out(inner.size() + 1);
  for (std::size_t i = 0; i < inner.size(); ++i) out[i] = f * inner[i];
  out[inner.size()] = std::cos(a);
  return out;
}

SphereField family_gamma(int k, const Vec& s, PeriodicGrid grid) {
  if (k < 2) throw DimensionTooSmall("family_gamma needs k >= 2");
  if (static_cast<int>(s.size()) != k - 1)
    throw SizeMismatch("family_gamma: expected k-1 parameters");
  Field f(grid, k + 1);
  for (int j = 0; j < grid.size(); ++j) f.set_point(j, family_point(s, grid.node(j)));
  return SphereField(std::move(f), 1e-12);
}

} // namespace hmhf
