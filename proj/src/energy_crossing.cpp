#include "hmhf/energy_crossing.hpp"

#include "hmhf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hmhf {

CrossingPlan build_crossing_control(const GeodesicChart& chart, double epsilon, double horizon,
                                    const Window& window, const SteerOptions& steer) {
  if (chart.n < 1) throw InvalidArgument("crossing needs a chart with n >= 1");
  if (chart.dim() < 3)
    throw DimensionTooSmall("crossing needs a third direction (target sphere S^k, k >= 2)");
  if (!(epsilon > 0.0 && epsilon <= 0.1)) throw InvalidArgument("crossing epsilon must be in (0, 0.1]");
  if (window.mask().empty()) throw InvalidArgument("crossing needs a control window");
  CrossingPlan plan;
  plan.chart = chart;
  plan.epsilon = epsilon;
  plan.horizon = horizon;
  plan.window = window;
  plan.rotation = align_rotation(chart);
  SteerResult s = steer_zero_to_one(chart.n, horizon, window, steer);
  plan.linear_control = std::move(s.control);
  plan.w = std::move(s.w);
  plan.flux = s.flux;

  const int d = chart.dim();
  const Eigen::MatrixXd& a = plan.rotation.matrix();
  const PeriodicGrid grid = window.grid();
  plan.force = ControlRecord(window, d);
  const auto& ts = plan.linear_control.times();
  const auto& gs = plan.linear_control.forces();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    Field f(grid, d);
    const double* g = gs[i].comp(0);
    for (int c = 0; c < d; ++c) {
      const double e = epsilon * a(2, c);
      double* p = f.comp(c);
      for (int j = 0; j < grid.size(); ++j) p[j] = e * g[j];
    }
    plan.force.append(ts[i], std::move(f));
  }
  plan.force.set_end(plan.linear_control.end_time());
  return plan;
}

CrossingOutcome execute_crossing(const SphereField& u0, const CrossingPlan& plan,
                                 const CrossingOptions& opt, double t0) {
  const SphereField phi = harmonic_map(plan.chart, u0.grid());
  const double dist = h1_distance(u0.field(), phi.field());
  if (dist > opt.nu1)
    throw InvalidArgument("crossing start is " + std::to_string(dist) +
                          " from the chart in H1, above nu1");
  ControlRecord shifted(plan.window, plan.chart.dim());
  shifted.append_record(plan.force, t0);
  CrossingOutcome out;
  out.applied = ControlRecord(plan.window, plan.chart.dim());
  SimulateOptions so;
  so.forcing = &shifted;
  so.t0 = t0;
  so.recorder = &out.applied;
  out.trajectory = simulate(u0, plan.horizon, opt.solver, so);
  const double e0 = energy(u0.field());
  const double e1 = energy(out.trajectory.final_state().field());
  out.delta_e = e1 - e0;
  const double level = kTwoPi * plan.chart.n * plan.chart.n;
  if (!(e1 < level - opt.margin))
    throw CrossingFailed(out.delta_e, "terminal energy " + std::to_string(e1) +
                                          " not below the level " + std::to_string(level));
  return out;
}

namespace {

Field w_at(const CrossingPlan& plan, double t, PeriodicGrid grid) {
  const auto& ts = plan.w.times;
  const auto it = std::lower_bound(ts.begin(), ts.end(), t - 1e-9 * plan.horizon);
  if (it != ts.end() && std::abs(*it - t) <= 1e-9 * plan.horizon)
    return plan.w.states[static_cast<std::size_t>(it - ts.begin())];
  const Field zero(grid, 1);
  if (t <= 0.0) return zero;
  return linear_terminal(zero, plan.linear_control, plan.w.potential, t);
}

} // namespace

double remainder_norm(const Trajectory& tr, const CrossingPlan& plan) {
  if (tr.empty()) return 0.0;
  const PeriodicGrid grid = tr.states.front().grid();
  const int d = plan.chart.dim();
  const Field phi = harmonic_map(plan.chart, grid).field();
  const Eigen::MatrixXd& a = plan.rotation.matrix();
  double sup_h1 = 0.0, int_h2 = 0.0, prev_h2 = 0.0;
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    const Field w = w_at(plan, tr.times[i], grid);
    Field r = tr.states[i].field() - phi;
    for (int c = 0; c < d; ++c) {
      const double e = plan.epsilon * a(2, c);
      double* p = r.comp(c);
      const double* q = w.comp(0);
      for (int j = 0; j < grid.size(); ++j) p[j] -= e * q[j];
    }
    const Spectrum s = dft(r);
    sup_h1 = std::max(sup_h1, sobolev_norm(s, 1));
    const double h2 = std::pow(sobolev_norm(s, 2), 2);
    if (i > 0) int_h2 += 0.5 * (h2 + prev_h2) * (tr.times[i] - tr.times[i - 1]);
    prev_h2 = h2;
  }
  return sup_h1 + std::sqrt(int_h2);
}

double richardson(const std::vector<double>& v) {
  if (v.empty()) throw InvalidArgument("richardson needs values");
  std::vector<double> t = v;
  // level k removes the eps^k term; eps halves between entries
  for (std::size_t k = 1; k < v.size(); ++k) {
    const double f = std::ldexp(1.0, static_cast<int>(k));
    for (std::size_t i = 0; i + k < v.size(); ++i) t[i] = (f * t[i + 1] - t[i]) / (f - 1.0);
  }
  return t[0];
}

CrossingSweep crossing_sweep(int n, const std::vector<double>& eps, double horizon,
                             const Window& window, const CrossingOptions& opt, int dim) {
  if (eps.size() < 2) throw InvalidArgument("sweep needs at least two amplitudes");
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (std::abs(eps[i] - 0.5 * eps[i - 1]) > 1e-12 * eps[i - 1])
      throw InvalidArgument("sweep amplitudes must halve");
  CrossingSweep out;
  out.n = n;
  const GeodesicChart chart = GeodesicChart::standard(dim, n);
  const SphereField u0 = harmonic_map(chart, window.grid());
  CrossingOptions o = opt;
  o.margin = -1e300; // the sweep reports the energy drop, failures included
  std::vector<double> ratios;
  CrossingPlan plan = build_crossing_control(chart, eps[0], horizon, window);
  for (double e : eps) {
    // the linear control does not depend on eps; rescale the force
    CrossingPlan p = plan;
    p.epsilon = e;
    p.force = ControlRecord(window, dim);
    for (std::size_t i = 0; i < plan.force.size(); ++i) {
      Field f = plan.force.forces()[i];
      f *= e / plan.epsilon;
      p.force.append(plan.force.times()[i], std::move(f));
    }
    p.force.set_end(plan.force.end_time());
    const CrossingOutcome r = execute_crossing(u0, p, o);
    SweepRow row;
    row.epsilon = e;
    row.delta_e = r.delta_e;
    row.ratio = r.delta_e / (e * e);
    row.oracle = 2.0 * plan.flux;
    row.remainder = remainder_norm(r.trajectory, p);
    out.rows.push_back(row);
    ratios.push_back(row.ratio);
  }
  out.extrapolated = richardson(ratios);
  out.oracle = 2.0 * plan.flux;
  out.relative_error = std::abs(out.extrapolated - out.oracle) / std::abs(out.oracle);
  for (std::size_t i = 1; i < out.rows.size(); ++i)
    out.remainder_ratios.push_back(out.rows[i - 1].remainder / out.rows[i].remainder);
  const double n2 = static_cast<double>(n) * n;
  const double two = std::abs(out.extrapolated + 2.0 * kPi * n2) / (2.0 * kPi * n2);
  const double one = std::abs(out.extrapolated + kPi * n2) / (kPi * n2);
  if (std::min(two, one) > 0.1)
    out.matched_constant = "neither";
  else
    out.matched_constant = two < one ? "-2 pi N^2 eps^2" : "-pi N^2 eps^2";
  return out;
}

} // namespace hmhf
