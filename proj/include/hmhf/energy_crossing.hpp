#pragma once

#include "hmhf/linear_heat_control.hpp"

#include <string>
#include <vector>

namespace hmhf {

// First-order expansion control pushing the flow below the level 2 pi N^2.
struct CrossingPlan {
  GeodesicChart chart;
  double epsilon = 0.0;
  double horizon = 1.0;
  Window window;
  Rotation rotation;          // align_rotation(chart)
  ControlRecord linear_control; // scalar g with w(0) = 0, w(T) = 1
  LinearTrajectory w;
  double flux = 0.0;          // flux functional of (w, g)
  ControlRecord force;        // eps * R^T (0, 0, g, 0, ...)
};

CrossingPlan build_crossing_control(const GeodesicChart& chart, double epsilon, double horizon,
                                    const Window& window, const SteerOptions& steer = {});

struct CrossingOptions {
  SolverConfig solver;
  double nu1 = 0.05;    // admission radius in H1 around the chart's harmonic map
  double margin = 0.0;  // success needs E(T) < 2 pi N^2 - margin
};

struct CrossingOutcome {
  Trajectory trajectory;
  ControlRecord applied; // force of each solver step
  double delta_e = 0.0;
};

CrossingOutcome execute_crossing(const SphereField& u0, const CrossingPlan& plan,
                                 const CrossingOptions& options = {}, double t0 = 0.0);

// sup_t ||R||_{H1} + (int ||R||_{H2}^2)^{1/2} with R = u - phi - eps R^T (0, 0, w)
double remainder_norm(const Trajectory& trajectory, const CrossingPlan& plan);

// eliminate the O(eps) and O(eps^2) terms of a series sampled at eps, eps/2, eps/4, ...
double richardson(const std::vector<double>& values);

struct SweepRow {
  double epsilon = 0.0, delta_e = 0.0, ratio = 0.0, oracle = 0.0, remainder = 0.0;
};

struct CrossingSweep {
  int n = 0;
  std::vector<SweepRow> rows;
  double extrapolated = 0.0; // Richardson limit of delta_E / eps^2
  double oracle = 0.0;       // 2 * flux
  double relative_error = 0.0;
  std::vector<double> remainder_ratios; // R(eps) / R(eps/2)
  std::string matched_constant;         // which printed level drop the limit agrees with
};

// eps must halve from one entry to the next
CrossingSweep crossing_sweep(int n, const std::vector<double>& eps, double horizon,
                             const Window& window, const CrossingOptions& options = {},
                             int dim = 3);

} // namespace hmhf
