#pragma once

#include "hmhf/flow_solver.hpp"

#include <vector>

namespace hmhf {

// w_t - w_xx - potential * w = 1_omega g on the periodic grid, scalar w.
struct LinearControlProblem {
  Field initial;
  double horizon = 1.0;
  Window window;
  double potential = 0.0;
  Field target; // empty means zero
};

struct ControlBasis {
  int modes = 16;  // windowed trig functions with |n| <= modes
  int pieces = 24; // equal time pieces, constant coefficients
};

struct HumOptions {
  double rho = 1e10; // weight of the terminal mismatch
  ControlBasis basis;
  double max_condition = 1e14;
};

struct HumResult {
  ControlRecord control;
  double terminal_norm = 0.0; // L2 distance of w(T) to the target
  double condition = 0.0;
  Field terminal;
  int basis_size = 0; // spatial functions kept after orthonormalization
};

// Samples of a linear run: record boundaries and interval midpoints, in order.
struct LinearTrajectory {
  std::vector<double> times;
  std::vector<Field> states;
  double potential = 0.0;
};

// exact mode-wise solve driven by a piecewise-constant record
LinearTrajectory linear_forward(const Field& initial, const ControlRecord& g, double potential,
                                double horizon);
// terminal state only
Field linear_terminal(const Field& initial, const ControlRecord& g, double potential,
                      double horizon);

HumResult hum_null_control(const LinearControlProblem& problem, const HumOptions& options = {});

struct SteerOptions {
  HumOptions hum;
  double sub_interval = 1e-4; // record resolution of g = e^{N^2 t} h
};

struct SteerResult {
  ControlRecord control;
  LinearTrajectory w;
  double flux = 0.0;
  double terminal_error = 0.0; // ||w(T) - 1||_{L2}
  double substitution_gap = 0.0; // sup of |w - substituted w| over samples
};

SteerResult steer_zero_to_one(int n_potential, double horizon, const Window& window,
                              const SteerOptions& options = {});

// int int <w_t, -w_t + g> with w_t taken from the equation, Simpson per interval
double flux_functional(const LinearTrajectory& w, const ControlRecord& g);

// 1/2 int (w_x^2 - potential w^2) at one time
double quadratic_energy(const Field& w, double potential);

} // namespace hmhf
