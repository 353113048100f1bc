#include "hmhf/flow_solver.hpp"

#include "hmhf/errors.hpp"
#include "hmhf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hmhf {

void SolverConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  if (!(renorm_tolerance > 0.0 && renorm_tolerance <= 1e-2))
    throw InvalidArgument("renorm_tolerance must lie in (0, 1e-2]");
  if (!(dealias_margin >= 0.0 && dealias_margin < 1.0))
    throw InvalidArgument("dealias_margin must lie in [0, 1)");
  if (store_every < 1 || diag_every < 1) throw InvalidArgument("store/diag cadence must be >= 1");
}

// ---------------------------------------------------------------- records

ControlRecord::ControlRecord(Window window, int dim, Interpolation interp)
    : window_(std::move(window)), dim_(dim), interp_(interp) {
  if (dim < 1) throw InvalidArgument("ControlRecord: dim must be >= 1");
}

void ControlRecord::append(double t, Field force) {
  if (force.dim() != dim_ || force.grid() != window_.grid())
    throw SizeMismatch("ControlRecord::append: force shape does not match the record");
  if (!times_.empty() && !(t > times_.back()))
    throw InvalidArgument("ControlRecord::append: times must increase");
  const auto& m = window_.mask();
  for (int c = 0; c < dim_; ++c) {
    double* p = force.comp(c);
    for (int j = 0; j < force.size(); ++j) p[j] *= m[j];
  }
  times_.push_back(t);
  forces_.push_back(std::move(force));
  end_ = std::max(end_, t);
}

void ControlRecord::set_end(double t) {
  if (!times_.empty() && t < times_.back())
    throw InvalidArgument("ControlRecord::set_end before the last sample");
  end_ = t;
}

void ControlRecord::append_record(const ControlRecord& other, double offset) {
  if (other.empty()) return;
  if (empty()) {
    window_ = other.window_;
    dim_ = other.dim_;
    interp_ = other.interp_;
  }
  if (other.dim_ != dim_) throw SizeMismatch("append_record: dimension mismatch");
  for (std::size_t i = 0; i < other.size(); ++i) {
    double t = other.times_[i] + offset;
    if (!times_.empty() && t <= times_.back()) {
      // coincident junction: the later record wins
      if (std::abs(t - times_.back()) <= 1e-12 * std::max(1.0, std::abs(t))) {
        forces_.back() = other.forces_[i];
        continue;
      }
      throw InvalidArgument("append_record: records overlap");
    }
    times_.push_back(t);
    forces_.push_back(other.forces_[i]);
  }
  end_ = std::max(end_, other.end_ + offset);
}

int ControlRecord::locate(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return static_cast<int>(it - times_.begin()) - 1;
}

Field ControlRecord::evaluate(double t) const {
  Field out(window_.grid(), dim_);
  if (times_.empty() || t < times_.front() || t > end_) return out;
  const int i = std::max(0, locate(t));
  if (interp_ == Interpolation::piecewise_constant || i + 1 >= static_cast<int>(size())) {
    return forces_[i];
  }
  const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
  out = forces_[i];
  out *= (1.0 - w);
  out.axpy(w, forces_[i + 1]);
  return out;
}

Field ControlRecord::average(double t0, double t1) const {
  Field out(window_.grid(), dim_);
  if (times_.empty()) return out;
  const double a = std::max(t0, times_.front());
  const double b = std::min(t1, end_);
  if (!(b > a)) {
    if (t1 <= t0 && t0 >= times_.front() && t0 <= end_) return evaluate(t0);
    return out;
  }
  const int n = static_cast<int>(size());
  const int ia = std::max(0, locate(a));
  if (interp_ == Interpolation::piecewise_constant) {
    // one piece up to clock rounding: exact copy
    const double tol = 1e-9 * (b - a);
    const int im = std::max(0, locate(0.5 * (a + b)));
    const double lo = times_[im], hi = im + 1 < n ? times_[im + 1] : end_;
    if (lo <= a + tol && b - tol <= hi) return forces_[im];
    for (int i = ia; i < n; ++i) {
      const double lo = std::max(a, times_[i]);
      const double hi = std::min(b, i + 1 < n ? times_[i + 1] : end_);
      if (hi > lo) out.axpy((hi - lo) / (b - a), forces_[i]);
      if (hi >= b) break;
    }
    return out;
  }
  for (int i = ia; i < n; ++i) {
    const double seg_hi = i + 1 < n ? times_[i + 1] : end_;
    const double lo = std::max(a, times_[i]);
    const double hi = std::min(b, seg_hi);
    if (hi > lo) {
      const double w = (hi - lo) / (b - a);
      if (i + 1 < n) {
        const double mid = 0.5 * (lo + hi);
        const double s = (mid - times_[i]) / (times_[i + 1] - times_[i]);
        out.axpy(w * (1.0 - s), forces_[i]);
        out.axpy(w * s, forces_[i + 1]);
      } else {
        out.axpy(w, forces_[i]);
      }
    }
    if (seg_hi >= b) break;
  }
  return out;
}

void ControlRecord::sample(double t0, double t1, const Field&, Field& out) const {
  out = average(t0, t1);
}

double ControlRecord::linf_l2() const {
  double m = 0.0;
  for (const auto& f : forces_) m = std::max(m, std::sqrt(std::max(0.0, l2_inner(f, f))));
  return m;
}

double ControlRecord::l2l2() const {
  const int n = static_cast<int>(size());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double hi = i + 1 < n ? times_[i + 1] : end_;
    if (interp_ == Interpolation::piecewise_constant || i + 1 >= n) {
      acc += (hi - times_[i]) * l2_inner(forces_[i], forces_[i]);
    } else {
      // exact for linear in time
      const double aa = l2_inner(forces_[i], forces_[i]);
      const double bb = l2_inner(forces_[i + 1], forces_[i + 1]);
      const double ab = l2_inner(forces_[i], forces_[i + 1]);
      acc += (hi - times_[i]) * (aa + ab + bb) / 3.0;
    }
  }
  return std::sqrt(std::max(0.0, acc));
}

bool ControlRecord::zero_outside_window() const {
  const auto& m = window_.mask();
  for (const auto& f : forces_)
    for (int c = 0; c < dim_; ++c)
      for (int j = 0; j < f.size(); ++j)
        if (m[j] == 0.0 && f.at(c, j) != 0.0) return false;
  return true;
}

// ---------------------------------------------------------------- trajectory

void Trajectory::append(const Trajectory& other, double offset, double flux_offset) {
  for (std::size_t i = 0; i < other.times.size(); ++i) {
    const double t = other.times[i] + offset;
    if (!times.empty() && t <= times.back() + 1e-12) continue;
    times.push_back(t);
    states.push_back(other.states[i]);
  }
  for (const auto& r : other.diagnostics) {
    DiagnosticRow row = r;
    row.t += offset;
    row.flux_cum += flux_offset;
    if (!diagnostics.empty() && row.t <= diagnostics.back().t + 1e-12) continue;
    diagnostics.push_back(row);
  }
  drift_violations += other.drift_violations;
}

// ---------------------------------------------------------------- integrator

namespace {

double spectral_sum(const Spectrum& s, int power) {
  double acc = 0.0;
  for (int c = 0; c < s.dim(); ++c) {
    const auto* z = s.comp(c);
    for (int n = 0; n < s.modes(); ++n) {
      const double n2 = static_cast<double>(n) * n;
      const double w = power == 0 ? 1.0 : (power == 1 ? n2 : (power == 2 ? 1.0 + n2 : (1.0 + n2) * (1.0 + n2)));
      acc += s.multiplicity(n) * w * std::norm(z[n]);
    }
  }
  return kTwoPi * acc;
}

} // namespace

FlowIntegrator::FlowIntegrator(const SphereField& u0, const SolverConfig& config,
                               const Forcing* forcing, double t0, double dt)
    : cfg_(config), forcing_(forcing), t0_(t0), dt_(dt > 0 ? dt : config.dt),
      grid_(u0.grid()), dim_(u0.dim()), u_(u0.field()) {
  cfg_.validate();
  if (forcing_) {
    if (forcing_->dim() != dim_) throw SizeMismatch("forcing dimension does not match the state");
    if (forcing_->window().grid() != grid_) throw SizeMismatch("forcing grid does not match the state");
  }
  keep_ = static_cast<int>(std::floor((1.0 - cfg_.dealias_margin) * grid_.nyquist() + 1e-12));
  const int n = grid_.size();
  cur_.uh = Spectrum(n, dim_);
  cur_.nlh = Spectrum(n, dim_);
  cur_.fh = Spectrum(n, dim_);
}

void FlowIntegrator::record_forces(ControlRecord* rec) {
  if (rec && forcing_ && rec->empty()) *rec = ControlRecord(forcing_->window(), dim_);
  recorder_ = rec;
}

void FlowIntegrator::compute_nonlinear(const Field& u, Spectrum& uh, Spectrum& nlh) {
  const int n = grid_.size();
  const int ny = grid_.nyquist();
  if (ux_.dim() != dim_) {
    ux_ = Field(grid_, dim_);
    nl_ = Field(grid_, dim_);
    tmp_ = Spectrum(n, dim_);
  }
  for (int c = 0; c < dim_; ++c) {
    forward_transform(u.comp(c), uh.comp(c), n);
    const auto* z = uh.comp(c);
    auto* d = tmp_.comp(c);
    for (int k = 0; k <= ny; ++k) d[k] = (k == ny) ? 0.0 : std::complex<double>(0.0, k) * z[k];
    inverse_transform(d, ux_.comp(c), n);
  }
  kernels::grad_sq_times(ux_.data().data(), u.data().data(), dim_, n, nl_.data().data());
  for (int c = 0; c < dim_; ++c) {
    auto* z = nlh.comp(c);
    forward_transform(nl_.comp(c), z, n);
    for (int k = keep_ + 1; k <= ny; ++k) z[k] = 0.0;
  }
}

void FlowIntegrator::compute_force(double a, double b, const Field& u, Spectrum& fh) {
  const int n = grid_.size();
  if (!forcing_) {
    std::fill(fh.data().begin(), fh.data().end(), std::complex<double>(0.0));
    return;
  }
  forcing_->sample(a, b, u, raw_);
  if (raw_.dim() != dim_ || raw_.grid() != grid_)
    throw SizeMismatch("forcing returned a field of the wrong shape");
  if (fproj_.dim() != dim_) fproj_ = Field(grid_, dim_);
  kernels::masked_tangent_project(raw_.data().data(), u.data().data(),
                                  forcing_->window().mask().data(), dim_, n,
                                  fproj_.data().data());
  for (int c = 0; c < dim_; ++c) forward_transform(fproj_.comp(c), fh.comp(c), n);
  if (recorder_) {
    // the supplied force restricted to the window; replaying it projects identically
    Field rec = raw_;
    const auto& mask = forcing_->window().mask();
    for (int c = 0; c < dim_; ++c) {
      double* p = rec.comp(c);
      for (int j = 0; j < n; ++j) p[j] *= mask[j];
    }
    recorder_->append(a, std::move(rec));
    recorder_->set_end(b);
  }
}

void FlowIntegrator::prepare() {
  if (prepared_) return;
  const double t = time();
  compute_nonlinear(u_, cur_.uh, cur_.nlh);
  if (cfg_.scheme == Scheme::imex_euler) {
    compute_force(t, level_time(steps_ + 1), u_, cur_.fh);
  } else if (have_pending_) {
    std::swap(cur_.fh, pending_fh_);
    have_pending_ = false;
  } else {
    // first level of a two-step run: the starting Euler step covers [t, t + dt/2]
    compute_force(t, level_time(steps_ + 0.5), u_, cur_.fh);
  }
  cur_.energy = spectral_sum(cur_.uh, 1);
  cur_.h1 = std::sqrt(spectral_sum(cur_.uh, 2));
  cur_.h2 = std::sqrt(spectral_sum(cur_.uh, 3));
  cur_.control = std::sqrt(spectral_sum(cur_.fh, 0));
  double acc = 0.0;
  for (int c = 0; c < dim_; ++c) {
    const auto* z = cur_.uh.comp(c);
    const auto* g = cur_.nlh.comp(c);
    const auto* f = cur_.fh.comp(c);
    for (int k = 0; k < cur_.uh.modes(); ++k) {
      const double k2 = static_cast<double>(k) * k;
      acc += cur_.uh.multiplicity(k) * std::norm(-k2 * z[k] + g[k] + f[k]);
    }
  }
  cur_.ut2 = kTwoPi * acc;
  if (!std::isfinite(cur_.h2) || cur_.h2 > cfg_.h2_cap)
    throw BlowupDetected(t, "H2 norm " + std::to_string(cur_.h2) + " exceeds the cap");
  if (have_flux_) flux_ += 0.5 * dt_ * (last_ut2_ + cur_.ut2);
  last_ut2_ = cur_.ut2;
  have_flux_ = true;
  prepared_ = true;
}

DiagnosticRow FlowIntegrator::diagnose() {
  prepare();
  DiagnosticRow r;
  r.t = time();
  r.energy = cur_.energy;
  r.h1_norm = cur_.h1;
  r.flux_cum = flux_;
  double res = 0.0;
  const int n = grid_.size();
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int c = 0; c < dim_; ++c) s += u_.at(c, j) * u_.at(c, j);
    res = std::max(res, std::abs(std::sqrt(s) - 1.0));
  }
  r.constraint_residual = res;
  r.control_l2 = cur_.control;
  r.drift = drift_;
  return r;
}

void FlowIntegrator::finish(Spectrum& next) {
  const int n = grid_.size();
  const double t_next = time() + dt_;
  for (int c = 0; c < dim_; ++c) inverse_transform(next.comp(c), u_.comp(c), n);
  double mn = 0.0, mx = 0.0;
  kernels::renormalize(u_.data().data(), dim_, n, &mn, &mx);
  if (!std::isfinite(mn) || !std::isfinite(mx) || !u_.all_finite())
    throw BlowupDetected(t_next, "non-finite state");
  if (mn < cfg_.min_prenorm)
    throw BlowupDetected(t_next, "pre-renormalization norm " + std::to_string(mn) +
                                     " below " + std::to_string(cfg_.min_prenorm));
  drift_ = std::max(std::abs(mx - 1.0), std::abs(1.0 - mn));
  if (drift_ > 10.0 * dt_ * (1.0 + cur_.energy)) ++drift_violations_;
  ++steps_;
  prepared_ = false;
}

void FlowIntegrator::step() {
  prepare();
  const int ny = grid_.nyquist();
  Spectrum next(grid_.size(), dim_);
  const bool two_step = cfg_.scheme == Scheme::imex_bdf2 && have_prev_;
  if (!two_step) {
    for (int c = 0; c < dim_; ++c) {
      const auto* z = cur_.uh.comp(c);
      const auto* g = cur_.nlh.comp(c);
      const auto* f = cur_.fh.comp(c);
      auto* o = next.comp(c);
      for (int k = 0; k <= ny; ++k)
        o[k] = (z[k] + dt_ * (g[k] + f[k])) / (1.0 + dt_ * static_cast<double>(k) * k);
    }
  } else {
    // extrapolated state for the force at the new level
    Field ustar = u_;
    ustar *= 2.0;
    ustar -= u_prev_;
    double mn, mx;
    kernels::renormalize(ustar.data().data(), dim_, grid_.size(), &mn, &mx);
    if (pending_fh_.dim() != dim_) pending_fh_ = Spectrum(grid_.size(), dim_);
    compute_force(level_time(steps_ + 0.5), level_time(steps_ + 1.5), ustar, pending_fh_);
    for (int c = 0; c < dim_; ++c) {
      const auto* z = cur_.uh.comp(c);
      const auto* zp = prev_uh_.comp(c);
      const auto* g = cur_.nlh.comp(c);
      const auto* gp = prev_nlh_.comp(c);
      const auto* f = pending_fh_.comp(c);
      auto* o = next.comp(c);
      for (int k = 0; k <= ny; ++k) {
        const double k2 = static_cast<double>(k) * k;
        o[k] = (4.0 * z[k] - zp[k] + 2.0 * dt_ * (2.0 * g[k] - gp[k] + f[k])) /
               (3.0 + 2.0 * dt_ * k2);
      }
    }
    have_pending_ = true;
  }
  if (cfg_.scheme == Scheme::imex_bdf2) {
    prev_uh_ = cur_.uh;
    prev_nlh_ = cur_.nlh;
    u_prev_ = u_;
    have_prev_ = true;
  }
  finish(next);
  if (cfg_.scheme == Scheme::imex_bdf2 && !have_pending_) {
    // level 1 after the starting step: sample around it with the actual state
    if (pending_fh_.dim() != dim_) pending_fh_ = Spectrum(grid_.size(), dim_);
    compute_force(level_time(steps_ - 0.5), level_time(steps_ + 0.5), u_, pending_fh_);
    have_pending_ = true;
  }
}

// ---------------------------------------------------------------- drivers

namespace {

class ConstantForcing : public Forcing {
public:
  ConstantForcing(const Field& f, const Window& w) : f_(f), w_(w) {}
  const Window& window() const override { return w_; }
  int dim() const override { return f_.dim(); }
  void sample(double, double, const Field&, Field& out) const override { out = f_; }

private:
  const Field& f_;
  const Window& w_;
};

std::optional<int> degree_of(const Field& u, const std::optional<std::pair<Vec, Vec>>& frame) {
  if (!frame) return std::nullopt;
  try {
    return winding_degree(circle_angle(u, frame->first, frame->second));
  } catch (const Error&) {
    return std::nullopt;
  }
}

long step_count(double horizon, double dt) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be >= 0");
  if (horizon == 0.0) return 0;
  return std::max(1L, std::lround(horizon / dt));
}

} // namespace

Field circle_angle(const Field& u, const Vec& alpha, const Vec& beta) {
  if (static_cast<int>(alpha.size()) != u.dim() || static_cast<int>(beta.size()) != u.dim())
    throw SizeMismatch("circle_angle: frame dimension does not match the field");
  Field th(u.grid(), 1);
  for (int j = 0; j < u.size(); ++j) {
    double a = 0.0, b = 0.0;
    for (int c = 0; c < u.dim(); ++c) {
      a += alpha[c] * u.at(c, j);
      b += beta[c] * u.at(c, j);
    }
    th.at(0, j) = std::atan2(b, a);
  }
  return th;
}

SphereField step(const SphereField& state, double dt, const Field* force_at_t,
                 const Window* window, const SolverConfig& config) {
  SolverConfig cfg = config;
  cfg.scheme = Scheme::imex_euler;
  std::optional<ConstantForcing> cf;
  Window full;
  if (force_at_t) {
    require_same_shape(*force_at_t, state.field(), "step");
    if (!window) {
      full = Window::full(state.grid());
      window = &full;
    }
    cf.emplace(*force_at_t, *window);
  }
  FlowIntegrator it(state, cfg, cf ? &*cf : nullptr, 0.0, dt);
  it.step();
  return it.sphere_state();
}

Trajectory simulate(const SphereField& u0, double horizon, const SolverConfig& config,
                    const SimulateOptions& options) {
  config.validate();
  const long nsteps = step_count(horizon, config.dt);
  double dt = nsteps > 0 ? horizon / nsteps : config.dt;
  // a horizon that is a whole number of steps keeps the configured step bit for bit
  if (std::abs(dt - config.dt) <= 1e-12 * config.dt) dt = config.dt;
  FlowIntegrator it(u0, config, options.forcing, options.t0, dt);
  if (options.recorder) it.record_forces(options.recorder);
  Trajectory tr;
  for (long n = 0; n <= nsteps; ++n) {
    DiagnosticRow row = it.diagnose();
    if (n % config.diag_every == 0 || n == nsteps) {
      row.degree = degree_of(it.state(), options.degree_frame);
      tr.diagnostics.push_back(row);
    }
    if (n % config.store_every == 0 || n == nsteps) {
      tr.times.push_back(it.time());
      tr.states.push_back(it.sphere_state());
    }
    if (n < nsteps) it.step();
  }
  tr.drift_violations = it.drift_violations();
  return tr;
}

DetectResult free_flow_until_approximate_harmonic(const SphereField& u0, double eps,
                                                  double max_time, const SolverConfig& config,
                                                  const DetectOptions& options) {
  config.validate();
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  FlowIntegrator it(u0, config, nullptr, options.t0, config.dt);
  const long every = std::max(1L, std::lround(options.interval / config.dt));
  const long limit = step_count(max_time, config.dt);
  DetectResult out;
  Trajectory& tr = out.trajectory;
  for (long n = 0;; ++n) {
    DiagnosticRow row = it.diagnose();
    const bool probe = n % every == 0 || n == limit;
    if (n % config.diag_every == 0 || probe) tr.diagnostics.push_back(row);
    if (n % config.store_every == 0 || probe) {
      if (tr.times.empty() || tr.times.back() < it.time()) {
        tr.times.push_back(it.time());
        tr.states.push_back(it.sphere_state());
      }
    }
    if (probe) {
      const int lvl = nearest_level(row.energy);
      if (lvl <= options.max_level &&
          std::abs(row.energy - kTwoPi * lvl * lvl) <= 1.0) {
        try {
          ChartFit fit = chart_fit(it.sphere_state(), lvl);
          if (fit.residual <= eps) {
            out.chart = fit.chart;
            out.residual = fit.residual;
            out.time = it.time();
            break;
          }
        } catch (const DegenerateMode&) {
        }
      }
    }
    if (n >= limit) {
      out.timeout = true;
      out.time = it.time();
      break;
    }
    it.step();
  }
  if (tr.times.empty() || tr.times.back() < it.time()) {
    tr.times.push_back(it.time());
    tr.states.push_back(it.sphere_state());
  }
  tr.drift_violations = it.drift_violations();
  return out;
}

double trajectory_distance(const Trajectory& a, const Trajectory& b) {
  double sup = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    while (j < b.times.size() && b.times[j] < a.times[i] - 1e-9) ++j;
    if (j < b.times.size() && std::abs(b.times[j] - a.times[i]) <= 1e-9)
      sup = std::max(sup, h1_distance(a.states[i].field(), b.states[j].field()));
  }
  return sup;
}

double continuous_dependence_check(const SphereField& u0a, const SphereField& u0b,
                                   const Forcing* fa, const Forcing* fb, double horizon,
                                   const SolverConfig& config) {
  SimulateOptions oa, ob;
  oa.forcing = fa;
  ob.forcing = fb;
  const Trajectory ta = simulate(u0a, horizon, config, oa);
  const Trajectory tb = simulate(u0b, horizon, config, ob);
  return trajectory_distance(ta, tb);
}

} // namespace hmhf
