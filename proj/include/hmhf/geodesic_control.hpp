#pragma once

#include "hmhf/linear_heat_control.hpp"

#include <functional>
#include <vector>

namespace hmhf {

// u = cos(theta) alpha + sin(theta) beta, theta unwrapped along the nodes
struct PolarState {
  Field theta; // scalar
  Vec alpha, beta;
  int winding = 0;

  PolarState() = default;
  PolarState(Field theta, Vec alpha, Vec beta);
  static PolarState from_sphere(const SphereField& u, const Vec& alpha, const Vec& beta);
  SphereField to_sphere() const;
};

// distance of a field from the great circle spanned by (alpha, beta)
double off_circle_distance(const Field& u, const Vec& alpha, const Vec& beta);

// Open-loop scalar torque h applied along the circle: force = (h + source) J u,
// J u = <u, alpha> beta - <u, beta> alpha.
class TorqueForcing : public Forcing {
public:
  TorqueForcing(ControlRecord h, Field source, Vec alpha, Vec beta);
  const Window& window() const override { return h_.window(); }
  int dim() const override { return static_cast<int>(alpha_.size()); }
  void sample(double t0, double t1, const Field& u, Field& out) const override;

private:
  ControlRecord h_;
  Field source_;
  Vec alpha_, beta_;
};

struct GeodesicOptions {
  HumOptions hum;
  SolverConfig solver; // imex_bdf2 by default; change_winding runs imex_euler
  GeodesicOptions() { solver.scheme = Scheme::imex_bdf2; }
};

// Force that makes one imex_euler step land on path(t1) wherever the window allows:
// F = ((1 - dt d_xx) path(t1) - u) / dt - |u_x|^2 u.
class TrackingForcing : public Forcing {
public:
  TrackingForcing(std::function<Field(double)> path, Window window, int dim,
                  double dealias_margin = 1.0 / 3.0);
  const Window& window() const override { return window_; }
  int dim() const override { return dim_; }
  void sample(double t0, double t1, const Field& u, Field& out) const override;

private:
  std::function<Field(double)> path_;
  Window window_;
  int dim_, keep_;
};

struct GeodesicSteer {
  ControlRecord control; // realized sphere force
  ControlRecord torque;  // scalar HUM control
  Trajectory trajectory;
  double theta_error = 0.0;  // sup |theta(T) - (N x + r)| mod 2 pi
  double off_circle = 0.0;   // max over stored states
  bool winding_constant = true;
};

// start: initial state of the run when it is only near theta0 (default theta0 itself)
GeodesicSteer steer_on_geodesic(const PolarState& theta0, int n, double r, double horizon,
                                const Window& window, const GeodesicOptions& options = {},
                                double t0 = 0.0, const SphereField* start = nullptr);

// theta_1 = N1 x on [0, 2pi - delta], N1 x - 2pi (N1 - N) on [2pi - delta/2, 2pi],
// joined by a quintic smoothstep; value and two x-derivatives at the nodes
struct ThetaJet {
  Field value, dx, dxx;
};
ThetaJet build_theta1(int n, int n1, double delta, PeriodicGrid grid);
double smoothstep5(double s);

// sphere curve with analytic x-derivatives
struct CurveJet {
  Field u, ux, uxx;
};
CurveJet circle_jet(const ThetaJet& theta, const Vec& alpha, const Vec& beta);

struct DeformationPath {
  std::vector<double> times;
  std::vector<SphereField> states;
  std::vector<Field> induced_force; // f = u_t - u_xx - |u_x|^2 u, analytic
  ControlRecord control;            // realized tracking force of the solver run
  Trajectory realized;              // solver run driven by control
  double tracking_error = 0.0;      // sup over stored times of the H1 distance
  Vec pole;                         // projection pole
};

struct DeformationOptions {
  double dt = 1e-4;
  int store_every = 10;
  double pole_clearance = 0.1;
};

// start: initial state of the realized run (default u1)
DeformationPath deformation_homotopy(const CurveJet& u1, const CurveJet& u2, double duration,
                                     const Window& window, const DeformationOptions& options = {},
                                     double t0 = 0.0, const SphereField* start = nullptr);

struct WindingChange {
  ControlRecord control;   // realized force, both stages
  Trajectory trajectory;   // constructed path: heat-controlled circle, then the homotopy
  Trajectory realized;     // solver run driven by control
  ControlRecord torque;    // scalar stage A heat control
  DeformationPath stage_b;
  double stage_a_residual = 0.0; // H1 distance of the constructed stage A end to the lifted theta_1
  double tracking_error = 0.0;   // sup H1 distance realized vs constructed
  double terminal_error = 0.0;   // H1 distance of the constructed end to the target harmonic map
  double realized_terminal_error = 0.0;
};

// stage A: theta -> theta_1 on [0, T/2]; stage B: deformation to gamma(N1 x) on [T/2, T].
// The solver follows each constructed stage under a tracking force.
WindingChange change_winding(const PolarState& theta0, int n1, double horizon,
                             const Window& window, const GeodesicOptions& options = {},
                             const DeformationOptions& deformation = {},
                             const SphereField* start = nullptr);

// Linearized null control around the harmonic map of a chart: the in-plane part of
// u - phi solves a free heat equation, each normal part one with potential N^2.
struct HarmonicCorrection {
  ControlRecord control; // HUM pieces
  ControlRecord applied; // force of each solver step
  Trajectory trajectory;
  double entry_error = 0.0;    // H1 distance of u0 to the harmonic map
  double terminal_error = 0.0;
};

HarmonicCorrection correct_to_harmonic(const SphereField& u0, const GeodesicChart& target,
                                       double horizon, const Window& window,
                                       const HumOptions& hum = {}, const SolverConfig& solver = {},
                                       double t0 = 0.0);

} // namespace hmhf
