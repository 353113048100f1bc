#pragma once

#include "hmhf/energy_crossing.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/geodesic_control.hpp"
#include "hmhf/stabilization.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hmhf {

enum class Phase { free_descent, crossing, decay, local_null, point_transfer, winding_lift };
const char* phase_name(Phase p);

struct PhaseRecord {
  Phase phase = Phase::free_descent;
  double t0 = 0.0, t1 = 0.0;
  double entry_energy = 0.0, exit_energy = 0.0;
  std::optional<GeodesicChart> entry_chart, exit_chart;
  int level = -1;        // harmonic level N met or crossed, -1 when none
  double epsilon = 0.0;  // crossing amplitude actually used
  double rate = 0.0;     // decay: fitted rate of E once E <= 1/(2 pi)
  double residual = 0.0; // phase-specific terminal measure
};

// Serialized one record per line as space separated key=value fields:
// phase t0 t1 e_in e_out level eps rate residual chart_in chart_out
// (charts as n:alpha:beta:phase with comma separated coordinates, "-" if absent).
struct PhaseLog {
  std::vector<PhaseRecord> records;

  // levels met by the free descents, in order
  std::vector<int> levels() const;
  bool levels_strictly_decreasing() const;
  // every crossing exits below its level
  bool crossings_exit_below() const;
  std::string to_text() const;
};

struct PipelineConfig {
  double epsilon_detect = 0.02;   // chart residual that ends a free descent
  double nu1 = 0.05;              // crossing admission radius
  double crossing_epsilon = 0.05;
  int crossing_retries = 3;       // halvings of epsilon after a failed crossing
  double decay_target = 5e-4;     // Hdot1 seminorm that ends the decay
  double max_free_time = 40.0;    // per descent level and for the decay
  double crossing_horizon = 1.0;
  double null_horizon = 1.0;
  double steer_horizon = 1.0;
  double winding_horizon = 2.0;
  double correction_horizon = 0.5;
  double terminal_tol = 1e-6;
  SolverConfig solver;            // imex_euler is required for the winding lift
  Window window;                  // default [pi/2, 2 pi)
  HumOptions hum;
  void validate() const;
};

struct PipelineResult {
  ControlRecord control; // concatenated open-loop force
  Trajectory trajectory;
  PhaseLog log;
  double terminal_error = 0.0; // H1 distance to the target harmonic map
};

class PipelineAborted : public Error {
public:
  PipelineAborted(const Error& cause, PhaseLog log, std::string stage)
      : Error(cause.kind(), stage + ": " + cause.what()), log_(std::move(log)),
        stage_(std::move(stage)) {}
  const PhaseLog& log() const noexcept { return log_; }
  const std::string& stage() const noexcept { return stage_; }

private:
  PhaseLog log_;
  std::string stage_;
};

struct DescentStep {
  std::vector<PhaseRecord> phases;
  Trajectory trajectory;
  ControlRecord control;
  SphereField state;
  int level = 0; // level met; 0 means the descent is over
  bool crossed = false;
};

// one free flow until an approximate harmonic map below max_level, then a crossing when N >= 1
DescentStep descent_step(const SphereField& u, const PipelineConfig& config, double t0,
                         int max_level);

PipelineResult run_global(const SphereField& u0, const GeodesicChart& target,
                          const PipelineConfig& config = {});

// open-loop replay of a pipeline control through the solver
Trajectory replay_pipeline(const SphereField& u0, const PipelineResult& result,
                           const PipelineConfig& config = {});

} // namespace hmhf
