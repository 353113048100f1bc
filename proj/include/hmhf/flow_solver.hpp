#pragma once

#include "hmhf/sphere_geometry.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace hmhf {

enum class Scheme { imex_euler, imex_bdf2 };

struct SolverConfig {
  double dt = 1e-4;
  Scheme scheme = Scheme::imex_euler;
  double renorm_tolerance = 1e-10;
  double dealias_margin = 1.0 / 3.0;
  double h2_cap = 1e6;
  double min_prenorm = 0.5;
  int store_every = 100; // states
  int diag_every = 1;    // diagnostic rows
  void validate() const;
};

// A force source. sample() returns the raw force for the step interval
// [t0, t1] given the state it will act on; the solver applies the window
// mask and the tangent projection itself.
class Forcing {
public:
  virtual ~Forcing() = default;
  virtual const Window& window() const = 0;
  virtual int dim() const = 0;
  virtual void sample(double t0, double t1, const Field& u, Field& out) const = 0;
};

enum class Interpolation { piecewise_constant, linear };

// Time-sampled open-loop force. Piecewise constant: forces[i] holds on
// [times[i], times[i+1]) with times[size] = end_time. Linear: nodal values.
class ControlRecord : public Forcing {
public:
  ControlRecord() = default;
  ControlRecord(Window window, int dim, Interpolation interp = Interpolation::piecewise_constant);

  void append(double t, Field force); // masked on entry
  void set_end(double t);
  void append_record(const ControlRecord& other, double offset);

  const Window& window() const override { return window_; }
  int dim() const override { return dim_; }
  void sample(double t0, double t1, const Field& u, Field& out) const override;

  Interpolation interpolation() const { return interp_; }
  bool empty() const { return times_.empty(); }
  std::size_t size() const { return times_.size(); }
  double start_time() const { return times_.empty() ? 0.0 : times_.front(); }
  double end_time() const { return end_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Field>& forces() const { return forces_; }

  Field evaluate(double t) const;
  // exact mean over [t0, t1] intersected with the record support (zero outside)
  Field average(double t0, double t1) const;
  double linf_l2() const; // max over samples of the spatial L2 norm
  double l2l2() const;    // space-time L2 norm
  bool zero_outside_window() const;

private:
  Window window_;
  int dim_ = 0;
  Interpolation interp_ = Interpolation::piecewise_constant;
  std::vector<double> times_;
  std::vector<Field> forces_;
  double end_ = 0.0;
  int locate(double t) const;
};

struct DiagnosticRow {
  double t = 0.0;
  double energy = 0.0;
  double h1_norm = 0.0;
  double flux_cum = 0.0; // int_0^t int |u_t|^2
  double constraint_residual = 0.0;
  double control_l2 = 0.0;
  double drift = 0.0; // pre-renormalization max | |u| - 1 |
  std::optional<int> degree;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<SphereField> states;
  std::vector<DiagnosticRow> diagnostics;
  int drift_violations = 0;

  bool empty() const { return states.empty(); }
  const SphereField& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }
  double start_time() const { return times.front(); }
  // appends other (times shifted by offset); a duplicated junction time is dropped
  void append(const Trajectory& other, double offset = 0.0, double flux_offset = 0.0);
};

struct SimulateOptions {
  const Forcing* forcing = nullptr;
  double t0 = 0.0;
  std::optional<std::pair<Vec, Vec>> degree_frame; // circle for the degree column
  ControlRecord* recorder = nullptr;               // receives the supplied forces, masked
};

// Owns one running simulation.
class FlowIntegrator {
public:
  FlowIntegrator(const SphereField& u0, const SolverConfig& config, const Forcing* forcing,
                 double t0 = 0.0, double dt = -1.0);

  // realized (masked, projected) forces go to rec, one piece per sample interval
  void record_forces(ControlRecord* rec);
  void step();
  DiagnosticRow diagnose(); // at the current state; prepares the next step
  const Field& state() const { return u_; }
  SphereField sphere_state() const { return SphereField(u_, 1e-6); }
  double time() const { return t0_ + static_cast<double>(steps_) * dt_; }
  long steps() const { return steps_; }
  double dt() const { return dt_; }
  double flux() const { return flux_; }
  int drift_violations() const { return drift_violations_; }
  double last_drift() const { return drift_; }

private:
  struct Level {
    Spectrum uh, nlh, fh;
    double energy = 0, h1 = 0, h2 = 0, ut2 = 0, control = 0;
  };
  void prepare();
  void compute_nonlinear(const Field& u, Spectrum& uh, Spectrum& nlh);
  void compute_force(double a, double b, const Field& u, Spectrum& fh);
  void finish(Spectrum& next);
  double level_time(double k) const { return t0_ + k * dt_; }

  SolverConfig cfg_;
  const Forcing* forcing_;
  double t0_, dt_;
  long steps_ = 0;
  PeriodicGrid grid_;
  int dim_;
  int keep_; // highest mode kept after dealiasing
  Field u_, u_prev_;
  Field ux_, nl_, raw_, fproj_;
  Spectrum tmp_, prev_uh_, prev_nlh_, pending_fh_;
  bool have_prev_ = false, have_pending_ = false;
  ControlRecord* recorder_ = nullptr;
  Level cur_;
  bool prepared_ = false;
  double flux_ = 0.0, last_ut2_ = 0.0;
  bool have_flux_ = false;
  double drift_ = 0.0;
  int drift_violations_ = 0;
};

// One IMEX Euler step with an already sampled raw force (nullptr: free flow).
SphereField step(const SphereField& state, double dt, const Field* force_at_t,
                 const Window* window, const SolverConfig& config);

Trajectory simulate(const SphereField& u0, double horizon, const SolverConfig& config,
                    const SimulateOptions& options = {});

struct DetectResult {
  Trajectory trajectory;
  std::optional<GeodesicChart> chart;
  double residual = 0.0;
  double time = 0.0;
  bool timeout = false;
};

struct DetectOptions {
  double interval = 0.05;
  int max_level = 1 << 20;
  double t0 = 0.0;
};

DetectResult free_flow_until_approximate_harmonic(const SphereField& u0, double eps,
                                                  double max_time, const SolverConfig& config,
                                                  const DetectOptions& options = {});

// sup over stored times of the H1 distance between two runs
double continuous_dependence_check(const SphereField& u0a, const SphereField& u0b,
                                   const Forcing* fa, const Forcing* fb, double horizon,
                                   const SolverConfig& config);

// sup over matching stored times of the H1 distance of two trajectories
double trajectory_distance(const Trajectory& a, const Trajectory& b);

// circle angle of each node in the frame (alpha, beta)
Field circle_angle(const Field& u, const Vec& alpha, const Vec& beta);

} // namespace hmhf
