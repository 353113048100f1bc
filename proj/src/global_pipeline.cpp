#include "hmhf/global_pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace hmhf {

const char* phase_name(Phase p) {
  switch (p) {
  case Phase::free_descent: return "free_descent";
  case Phase::crossing: return "crossing";
  case Phase::decay: return "decay";
  case Phase::local_null: return "local_null";
  case Phase::point_transfer: return "point_transfer";
  case Phase::winding_lift: return "winding_lift";
  }
  return "unknown";
}

std::vector<int> PhaseLog::levels() const {
  std::vector<int> out;
  for (const PhaseRecord& r : records)
    if (r.phase == Phase::free_descent && r.level >= 0) out.push_back(r.level);
  return out;
}

bool PhaseLog::levels_strictly_decreasing() const {
  const std::vector<int> l = levels();
  for (std::size_t i = 1; i < l.size(); ++i)
    if (!(l[i] < l[i - 1])) return false;
  return true;
}

bool PhaseLog::crossings_exit_below() const {
  for (const PhaseRecord& r : records)
    if (r.phase == Phase::crossing && !(r.exit_energy < kTwoPi * r.level * r.level)) return false;
  return true;
}

namespace {

std::string num(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

std::string chart_text(const std::optional<GeodesicChart>& c) {
  if (!c) return "-";
  std::string s = std::to_string(c->n) + ":";
  for (std::size_t i = 0; i < c->alpha.size(); ++i) s += (i ? "," : "") + num(c->alpha[i]);
  s += ":";
  for (std::size_t i = 0; i < c->beta.size(); ++i) s += (i ? "," : "") + num(c->beta[i]);
  return s + ":" + num(c->phase);
}

} // namespace

std::string PhaseLog::to_text() const {
  std::ostringstream os;
  for (const PhaseRecord& r : records) {
    os << "phase=" << phase_name(r.phase) << " t0=" << num(r.t0) << " t1=" << num(r.t1)
       << " e_in=" << num(r.entry_energy) << " e_out=" << num(r.exit_energy)
       << " level=" << r.level << " eps=" << num(r.epsilon) << " rate=" << num(r.rate)
       << " residual=" << num(r.residual) << " chart_in=" << chart_text(r.entry_chart)
       << " chart_out=" << chart_text(r.exit_chart) << "\n";
  }
  return os.str();
}

void PipelineConfig::validate() const {
  for (double v : {epsilon_detect, nu1, crossing_epsilon, decay_target, max_free_time,
                   crossing_horizon, null_horizon, steer_horizon, winding_horizon,
                   correction_horizon, terminal_tol})
    if (!(v > 0.0)) throw InvalidArgument("pipeline parameters must be positive");
  if (!(epsilon_detect < nu1)) throw InvalidArgument("epsilon_detect must be below nu1");
  if (crossing_retries < 0) throw InvalidArgument("crossing_retries must be >= 0");
  if (solver.scheme != Scheme::imex_euler)
    throw InvalidArgument("the pipeline runs imex_euler (the winding lift tracks Euler steps)");
  solver.validate();
}

namespace {

double last_energy(const Trajectory& tr) { return tr.diagnostics.back().energy; }

double last_flux(const Trajectory& tr) {
  return tr.diagnostics.empty() ? 0.0 : tr.diagnostics.back().flux_cum;
}

Window pipeline_window(const PipelineConfig& c, PeriodicGrid g) {
  return c.window.mask().empty() ? default_control_window(g) : c.window;
}

Vec mean_direction(const SphereField& u) {
  const Spectrum s = dft(u.field());
  Vec m(u.dim());
  for (int c = 0; c < u.dim(); ++c) m[c] = s.at(c, 0).real();
  const double n = norm(m);
  if (!(n > 1e-12)) throw DegenerateMode("state has no mean direction");
  for (double& x : m) x /= n;
  return m;
}

// H1 norm of the stereographic image seen from the mean direction
double v_norm(const SphereField& u) {
  const Field v = stereo_forward(pole_frame(mean_direction(u)).apply(u.field()));
  return sobolev_norm(v, 1);
}

struct Accumulator {
  ControlRecord control;
  Trajectory trajectory;

  void add(const Trajectory& tr, double offset = 0.0) {
    trajectory.append(tr, offset, last_flux(trajectory));
  }
  double time() const { return trajectory.final_time(); }
  const SphereField& state() const { return trajectory.final_state(); }
};

} // namespace

DescentStep descent_step(const SphereField& u, const PipelineConfig& cfg, double t0,
                         int max_level) {
  cfg.validate();
  DescentStep out;
  out.state = u;
  const double e0 = energy(u.field());
  if (e0 <= 1.0 / kTwoPi) return out;

  const PeriodicGrid grid = u.grid();
  const Window window = pipeline_window(cfg, grid);
  const int d = u.dim();
  out.control = ControlRecord(window, d);

  DetectOptions dopt;
  dopt.t0 = t0;
  dopt.max_level = max_level;
  DetectResult det = free_flow_until_approximate_harmonic(u, cfg.epsilon_detect, cfg.max_free_time,
                                                          cfg.solver, dopt);
  if (det.timeout)
    throw Timeout("no approximate harmonic map at level <= " + std::to_string(max_level) +
                  " within " + std::to_string(cfg.max_free_time));
  out.control.append(t0, Field(grid, d));
  out.control.set_end(det.time);
  PhaseRecord free;
  free.phase = Phase::free_descent;
  free.t0 = t0;
  free.t1 = det.time;
  free.entry_energy = e0;
  free.exit_energy = last_energy(det.trajectory);
  free.exit_chart = det.chart;
  free.level = det.chart->n;
  free.residual = det.residual;
  out.phases.push_back(free);
  out.trajectory = std::move(det.trajectory);
  out.state = out.trajectory.final_state();
  out.level = free.level;
  if (out.level == 0) return out;

  // cross the level, halving eps after each failure
  GeodesicChart chart = *det.chart;
  double eps = cfg.crossing_epsilon;
  CrossingOptions co;
  co.solver = cfg.solver;
  co.nu1 = cfg.nu1;
  SteerOptions so;
  so.hum = cfg.hum;
  for (int attempt = 0;; ++attempt) {
    try {
      const CrossingPlan plan = build_crossing_control(chart, eps, cfg.crossing_horizon, window, so);
      const CrossingOutcome r = execute_crossing(out.state, plan, co, det.time);
      PhaseRecord cr;
      cr.phase = Phase::crossing;
      cr.t0 = det.time;
      cr.t1 = r.trajectory.final_time();
      cr.entry_energy = energy(out.state.field());
      cr.exit_energy = last_energy(r.trajectory);
      cr.entry_chart = chart;
      cr.level = chart.n;
      cr.epsilon = eps;
      cr.residual = r.delta_e;
      out.phases.push_back(cr);
      out.control.append_record(r.applied, 0.0);
      out.trajectory.append(r.trajectory, 0.0, last_flux(out.trajectory));
      out.state = out.trajectory.final_state();
      out.crossed = true;
      return out;
    } catch (const CrossingFailed&) {
      if (attempt >= cfg.crossing_retries) throw;
      eps *= 0.5;
      chart = chart_fit(out.state, chart.n).chart;
    }
  }
}

PipelineResult run_global(const SphereField& u0, const GeodesicChart& target,
                          const PipelineConfig& cfg) {
  cfg.validate();
  const int d = u0.dim();
  if (d < 3)
    throw DimensionTooSmall("global control needs S^k with k >= 2; for k = 1 use steer_on_geodesic");
  if (target.dim() != d) throw SizeMismatch("target chart dimension differs from the state");
  const PeriodicGrid grid = u0.grid();
  const Window window = pipeline_window(cfg, grid);
  const SphereField goal = harmonic_map(target, grid);

  PipelineResult res;
  Accumulator acc;
  acc.control = ControlRecord(window, d);
  {
    Trajectory start;
    start.times.push_back(0.0);
    start.states.push_back(u0);
    DiagnosticRow row;
    const Spectrum s = dft(u0.field());
    row.energy = energy(s);
    row.h1_norm = sobolev_norm(s, 1);
    row.constraint_residual = u0.constraint_residual();
    start.diagnostics.push_back(row);
    acc.trajectory = std::move(start);
  }
  auto finish = [&]() {
    res.control = std::move(acc.control);
    res.trajectory = std::move(acc.trajectory);
    res.terminal_error = h1_distance(res.trajectory.final_state().field(), goal.field());
    return res;
  };
  if (h1_distance(u0.field(), goal.field()) <= cfg.terminal_tol) return finish();

  std::string stage;
  try {
    // descent through the harmonic levels
    stage = "descent";
    const int bound = static_cast<int>(std::ceil(std::sqrt(energy(u0.field()) / kTwoPi)));
    int max_level = bound + 1, crossings = 0;
    for (;;) {
      DescentStep ds = descent_step(acc.state(), cfg, acc.time(), max_level);
      for (const PhaseRecord& r : ds.phases) res.log.records.push_back(r);
      if (!ds.control.empty()) acc.control.append_record(ds.control, 0.0);
      if (!ds.trajectory.empty()) acc.add(ds.trajectory);
      if (!ds.crossed) break;
      if (++crossings > bound)
        throw StageFailure("descent exceeded " + std::to_string(bound) + " levels");
      max_level = ds.level - 1;
    }

    // free decay to the admission radius of the local null control
    stage = "decay";
    {
      PhaseRecord r;
      r.phase = Phase::decay;
      r.t0 = acc.time();
      r.entry_energy = energy(acc.state().field());
      const NullControlOptions probe;
      const double chunk = 0.05;
      const double tmax = acc.time() + cfg.max_free_time;
      acc.control.append(acc.time(), Field(grid, d));
      for (;;) {
        const SphereField& u = acc.state();
        if (sobolev_norm(u.field(), 1, true) <= cfg.decay_target && v_norm(u) <= probe.admission)
          break;
        if (acc.time() >= tmax) throw Timeout("decay did not reach the admission radius");
        SimulateOptions so;
        so.t0 = acc.time();
        acc.add(simulate(u, chunk, cfg.solver, so));
      }
      acc.control.set_end(acc.time());
      r.t1 = acc.time();
      r.exit_energy = energy(acc.state().field());
      std::vector<double> ts, es;
      for (const DiagnosticRow& row : acc.trajectory.diagnostics)
        if (row.t >= r.t0 - 1e-12 && row.energy <= 1.0 / kTwoPi && row.energy > 0.0) {
          ts.push_back(row.t);
          es.push_back(row.energy);
        }
      if (ts.size() >= 2) r.rate = fitted_rate(ts, es);
      r.residual = sobolev_norm(acc.state().field(), 1, true);
      r.level = 0;
      res.log.records.push_back(r);
    }

    // null control to the mean direction
    stage = "local_null";
    {
      PhaseRecord r;
      r.phase = Phase::local_null;
      r.t0 = acc.time();
      r.entry_energy = energy(acc.state().field());
      const Vec p = mean_direction(acc.state());
      NullControlOptions no;
      no.dt = cfg.solver.dt;
      no.window = window;
      const NullControlResult nr = small_time_null_control(acc.state(), p, cfg.null_horizon, no);
      ControlRecord shifted(window, d);
      shifted.append_record(nr.control, acc.time());
      SimulateOptions so;
      so.forcing = &shifted;
      so.t0 = acc.time();
      const Trajectory tr = simulate(acc.state(), cfg.null_horizon, cfg.solver, so);
      acc.control.append_record(shifted, 0.0);
      acc.add(tr);
      r.t1 = acc.time();
      r.exit_energy = energy(acc.state().field());
      r.exit_chart = chart_fit(acc.state(), 0).chart;
      r.residual = v_norm(acc.state());
      res.log.records.push_back(r);
    }

    // target frame with the phase folded in: gamma(x) = a cos(n x) + b sin(n x)
    Vec a(d), b(d);
    {
      const double c = std::cos(target.phase), s = std::sin(target.phase);
      for (int q = 0; q < d; ++q) {
        a[q] = c * target.alpha[q] + s * target.beta[q];
        b[q] = -s * target.alpha[q] + c * target.beta[q];
      }
    }
    GeodesicOptions go;
    go.solver = cfg.solver;
    go.hum = cfg.hum;

    // great circle from the reached point p to p_f = gamma(0)
    stage = "point_transfer";
    {
      PhaseRecord r;
      r.phase = Phase::point_transfer;
      r.t0 = acc.time();
      r.entry_energy = energy(acc.state().field());
      const Vec p = mean_direction(acc.state());
      Vec b1(d);
      const double pa = dot(p, a);
      for (int q = 0; q < d; ++q) b1[q] = p[q] - pa * a[q];
      if (norm(b1) < 1e-8) {
        // p = +-p_f: companion from the lowest-index basis vector not parallel to p_f
        for (int i = 0; i < d; ++i) {
          b1 = basis_vector(d, i);
          const double c = dot(b1, a);
          for (int q = 0; q < d; ++q) b1[q] -= c * a[q];
          if (norm(b1) > 0.5) break;
        }
      }
      const double nb = norm(b1);
      for (double& x : b1) x /= nb;
      Field th(grid, 1);
      const double angle = std::atan2(dot(p, b1), dot(p, a));
      for (int j = 0; j < grid.size(); ++j) th.at(0, j) = angle;
      const SphereField here = acc.state();
      const GeodesicSteer st =
          steer_on_geodesic(PolarState(th, a, b1), 0, 0.0, cfg.steer_horizon, window, go,
                            acc.time(), &here);
      acc.control.append_record(st.control, 0.0);
      acc.add(st.trajectory);
      r.t1 = acc.time();
      r.exit_energy = energy(acc.state().field());
      r.residual = st.theta_error;
      res.log.records.push_back(r);
    }

    // winding lift to the target chart, then the linearized finish
    stage = "winding_lift";
    {
      PhaseRecord r;
      r.phase = Phase::winding_lift;
      r.t0 = acc.time();
      r.entry_energy = energy(acc.state().field());
      r.level = target.n;
      r.exit_chart = target;
      if (target.n != 0) {
        const SphereField here = acc.state();
        const double t = acc.time();
        const WindingChange wc = change_winding(PolarState(Field(grid, 1), a, b), target.n,
                                                cfg.winding_horizon, window, go, {}, &here);
        acc.control.append_record(wc.control, t);
        acc.add(wc.realized, t);
      }
      const HarmonicCorrection hc =
          correct_to_harmonic(acc.state(), GeodesicChart(target.n, a, b), cfg.correction_horizon,
                              window, cfg.hum, cfg.solver, acc.time());
      acc.control.append_record(hc.applied, 0.0);
      acc.add(hc.trajectory);
      r.t1 = acc.time();
      r.exit_energy = energy(acc.state().field());
      r.residual = hc.terminal_error;
      res.log.records.push_back(r);
    }

    stage = "terminal";
    finish();
    if (!(res.terminal_error <= cfg.terminal_tol))
      throw StageFailure("terminal H1 distance " + num(res.terminal_error) + " above " +
                         num(cfg.terminal_tol));
    return res;
  } catch (const PipelineAborted&) {
    throw;
  } catch (const Error& e) {
    throw PipelineAborted(e, res.log, stage);
  }
}

Trajectory replay_pipeline(const SphereField& u0, const PipelineResult& result,
                           const PipelineConfig& cfg) {
  const double t0 = result.trajectory.start_time();
  const double horizon = result.trajectory.final_time() - t0;
  SimulateOptions so;
  so.forcing = &result.control;
  so.t0 = t0;
  return simulate(u0, horizon, cfg.solver, so);
}

} // namespace hmhf
