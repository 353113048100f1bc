#pragma once

#include "hmhf/flow_solver.hpp"

#include <memory>
#include <vector>

namespace hmhf {

// Frequency-Lyapunov feedback for v = stereo_forward(frame * u).
struct RapidFeedbackPolicy {
  double lambda = 4.0;
  double c0 = 0.0; // gain exponent constant
  double gamma = 0.0;
  double mu = 0.0;
  Window window;
  Rotation frame;

  RapidFeedbackPolicy() = default;
  RapidFeedbackPolicy(double lambda, double c0, Window window, Rotation frame);
  void validate() const;
};

// c0 = 2 * sup_M -log c(M^2) / M over M^2 <= lambda_max (exact route)
double policy_c0(const Window& window, double lambda_max = 256.0);

// -gamma * 1_omega * P_lambda v
Field v_feedback(const Field& v, const RapidFeedbackPolicy& policy);
double lyapunov_value(const Field& v, const RapidFeedbackPolicy& policy);
// push-forward of the v-feedback to a tangent force on the sphere
Field u_feedback(const SphereField& u, const RapidFeedbackPolicy& policy);
// derivative of stereo_inverse at v applied to g (pointwise)
Field stereo_pushforward(const Field& v, const Field& g);

class UFeedbackForcing : public Forcing {
public:
  explicit UFeedbackForcing(RapidFeedbackPolicy policy) : p_(std::move(policy)) {}
  const Window& window() const override { return p_.window; }
  int dim() const override { return p_.frame.dim(); }
  void sample(double t0, double t1, const Field& u, Field& out) const override;

private:
  RapidFeedbackPolicy p_;
};

// Closed loop in v-coordinates; the feedback term is implicit.
class VLoop {
public:
  VLoop(const Field& v0, const RapidFeedbackPolicy& policy, double dt, double t0 = 0.0,
        double h2_cap = 1e6);
  // advance one step; the realized v-control (masked) is left in last_control()
  void step();
  void set_policy(const RapidFeedbackPolicy& policy);
  const Field& state() const { return v_; }
  const Field& last_control() const { return g_; }
  double time() const { return t0_ + steps_ * dt_; }
  long steps() const { return steps_; }

private:
  void factor();
  RapidFeedbackPolicy pol_;
  double dt_, t0_, cap_;
  long steps_ = 0;
  PeriodicGrid grid_;
  int k_, m_, keep_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Field v_, g_;
};

struct VTrajectory {
  std::vector<double> times;
  std::vector<Field> states;
  std::vector<double> h1, hdot1, lyapunov;
};

VTrajectory simulate_v_closed_loop(const Field& v0, const RapidFeedbackPolicy& policy,
                                   double horizon, double dt, int store_every = 1);

struct StabilizeResult {
  Trajectory trajectory; // sphere states reconstructed from v
  VTrajectory v;
  double rate_h1 = 0.0;    // fitted decay rate of ||v||_{H1}
  double rate_hdot1 = 0.0; // fitted decay rate of ||v||_{Hdot1}
};

struct StabilizeOptions {
  double dt = 1e-4;
  int store_every = 10;
  Window window;       // default [pi/2, 2pi)
  double c0 = -1.0;    // negative: fitted
  Vec target;          // default north pole
};

StabilizeResult rapid_stabilize(const SphereField& u0, double lambda, double horizon,
                                const StabilizeOptions& options = {});

// fitted exponential rate of a positive series (least squares on the log)
double fitted_rate(const std::vector<double>& t, const std::vector<double>& y);

struct Stage {
  double t0 = 0.0, t1 = 0.0, lambda = 0.0, threshold = 0.0;
};

struct NullControlSchedule {
  double horizon = 1.0;
  double q = 4.0; // gain growth ratio
  std::vector<Stage> stages;
  // lambda_0 = max(4, (2/T)^2), lambda_k = lambda_0 q^k up to lambda_cap, t_k = T(1 - 2^-k)
  static NullControlSchedule standard(double horizon, double dt, double admission,
                                      double lambda_cap = 256.0);
  void validate() const;
};

struct NullControlOptions {
  double dt = 1e-4;
  int store_every = 10;
  Window window;       // default [pi/2, 2pi)
  double c0 = -1.0;    // negative: fitted
  double admission = 1e-3;
  double terminal_tol = 1e-6;
  double lambda_cap = 256.0;
};

struct NullControlResult {
  ControlRecord control; // realized sphere force, open loop
  Trajectory trajectory;
  NullControlSchedule schedule;
  std::vector<double> stage_entry; // ||v(t_k)||_{H1}
  double terminal_h1 = 0.0, terminal_hdot1 = 0.0;
  double cost_linf_l2 = 0.0;
};

NullControlResult small_time_null_control(const SphereField& u0, const Vec& target, double horizon,
                                          const NullControlOptions& options = {});

// largest amplitude of a fixed data shape for which rapid_stabilize keeps rate >= lambda/8
double admissible_amplitude(double lambda, const StabilizeOptions& options, unsigned seed = 1);

Window default_control_window(PeriodicGrid grid);

} // namespace hmhf
