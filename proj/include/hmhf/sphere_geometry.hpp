#pragma once

#include "hmhf/spectral_grid.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace hmhf {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double norm(const Vec& a);
Vec basis_vector(int dim, int i);

class UnitVector {
public:
  explicit UnitVector(Vec coords, double tol = 1e-12);
  const Vec& coords() const { return c_; }
  int dim() const { return static_cast<int>(c_.size()); }
  double operator[](int i) const { return c_[i]; }

private:
  Vec c_;
};

// gamma(x) = alpha cos(n x + phase) + beta sin(n x + phase)
struct GeodesicChart {
  int n = 0;
  Vec alpha, beta;
  double phase = 0.0;

  GeodesicChart() = default;
  GeodesicChart(int n, Vec alpha, Vec beta, double phase = 0.0);
  int dim() const { return static_cast<int>(alpha.size()); }
  Vec point(double x) const;
  static GeodesicChart standard(int dim, int n, double phase = 0.0);
};

class Rotation {
public:
  Rotation() = default;
  explicit Rotation(Eigen::MatrixXd m, double tol = 1e-12);
  static Rotation identity(int dim);
  const Eigen::MatrixXd& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  Rotation transpose() const;
  Rotation operator*(const Rotation& o) const;
  Vec apply(const Vec& v) const;
  Field apply(const Field& f) const; // pointwise on a (dim)-component field

private:
  Eigen::MatrixXd m_;
};

// Grid samples of a map into the unit sphere of R^dim.
class SphereField {
public:
  SphereField() = default;
  explicit SphereField(Field f, double tol = 1e-8);
  static SphereField normalized(Field f); // pointwise renormalization first
  const Field& field() const { return f_; }
  Field& mutable_field() { return f_; } // caller keeps the constraint
  const PeriodicGrid& grid() const { return f_.grid(); }
  int dim() const { return f_.dim(); }
  int size() const { return f_.size(); }
  Vec point(int j) const { return f_.point(j); }
  double constraint_residual() const;

private:
  Field f_;
};

Vec tangent_project(const Vec& f, const Vec& u);
// mask * (f - <f,u>u) on fields
Field tangent_project(const Field& f, const Field& u, const std::vector<double>* mask = nullptr);

SphereField harmonic_map(const GeodesicChart& chart, PeriodicGrid grid);

constexpr double kSouthPoleTol = 1e-9;
Vec stereo_forward(const Vec& u);
Vec stereo_inverse(const Vec& v);
Field stereo_forward(const Field& u); // dim k+1 -> dim k
Field stereo_inverse(const Field& v); // dim k -> dim k+1

// angle field, wrapped or unwrapped; jumps are reduced to (-pi, pi]
int winding_degree(const Field& theta);
// unwrap so that adjacent differences lie in (-pi, pi); theta(0) kept
Field unwrap_angle(const Field& theta);

struct ChartFit {
  GeodesicChart chart;
  double residual = 0.0;
};
ChartFit chart_fit(const SphereField& u, int n);
ChartFit chart_fit(const SphereField& u); // n = round(sqrt(E/2pi))
int nearest_level(double energy);

Rotation align_rotation(const GeodesicChart& chart);
// orthogonal map sending p to the last basis vector (north pole)
Rotation pole_frame(const Vec& p);

SphereField family_gamma(int k, const Vec& s, PeriodicGrid grid);
Vec family_point(const Vec& s, double x);

double h1_distance(const Field& a, const Field& b);

} // namespace hmhf
