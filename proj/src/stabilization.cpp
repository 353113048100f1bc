#include "hmhf/stabilization.hpp"

#include "hmhf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace hmhf {

namespace {

const double kSqrt2Pi = std::sqrt(kTwoPi);
const double kTwoSqrtPi = 2.0 * std::sqrt(kPi);

// low-mode real coordinates (1, cos x, sin x, ...) of one component
void to_low(const std::complex<double>* c, int m, Eigen::VectorXd& a) {
  a.resize(2 * m + 1);
  a(0) = kSqrt2Pi * c[0].real();
  for (int n = 1; n <= m; ++n) {
    a(2 * n - 1) = kTwoSqrtPi * c[n].real();
    a(2 * n) = -kTwoSqrtPi * c[n].imag();
  }
}

void from_low(const Eigen::VectorXd& a, int m, std::complex<double>* c) {
  c[0] = a(0) / kSqrt2Pi;
  for (int n = 1; n <= m; ++n) c[n] = std::complex<double>(a(2 * n - 1), -a(2 * n)) / kTwoSqrtPi;
}

double h1_of(const Spectrum& s, bool homogeneous) { return sobolev_norm(s, 1, homogeneous); }

} // namespace

Window default_control_window(PeriodicGrid grid) { return Window(grid, {{kPi / 2, kTwoPi}}); }

double policy_c0(const Window& window, double lambda_max) {
  return 2.0 * fit_spectral_c0(window, lambda_max);
}

RapidFeedbackPolicy::RapidFeedbackPolicy(double lam, double c, Window w, Rotation f)
    : lambda(lam), c0(c), window(std::move(w)), frame(std::move(f)) {
  gamma = lambda * std::exp(c0 * std::sqrt(lambda));
  mu = lambda * std::exp(2.0 * c0 * std::sqrt(lambda));
  validate();
}

void RapidFeedbackPolicy::validate() const {
  if (!(lambda > 1.0)) throw InvalidArgument("policy lambda must exceed 1");
  if (!(c0 >= 0.0)) throw InvalidArgument("policy c0 must be >= 0");
  const double g = lambda * std::exp(c0 * std::sqrt(lambda));
  const double m = lambda * std::exp(2.0 * c0 * std::sqrt(lambda));
  if (std::abs(gamma - g) > 1e-12 * g || std::abs(mu - m) > 1e-12 * m)
    throw InvalidArgument("policy gains inconsistent with (lambda, c0)");
  if (lambda_cutoff(lambda) >= window.grid().nyquist())
    throw InvalidArgument("policy lambda beyond grid resolution");
}

Field v_feedback(const Field& v, const RapidFeedbackPolicy& p) {
  if (v.grid() != p.window.grid()) throw SizeMismatch("v_feedback: grid mismatch");
  Field g = p_lambda(v, p.lambda);
  const auto& mask = p.window.mask();
  for (int c = 0; c < g.dim(); ++c) {
    double* x = g.comp(c);
    for (int j = 0; j < g.size(); ++j) x[j] *= -p.gamma * mask[j];
  }
  return g;
}

double lyapunov_value(const Field& v, const RapidFeedbackPolicy& p) {
  const Spectrum s = dft(v);
  double acc = 0.0;
  for (int c = 0; c < s.dim(); ++c)
    for (int n = 0; n < s.modes(); ++n) {
      const double n2 = static_cast<double>(n) * n;
      const double w = n2 <= p.lambda ? p.mu : n2;
      acc += s.multiplicity(n) * w * std::norm(s.at(c, n));
    }
  return kTwoPi * acc;
}

Field stereo_pushforward(const Field& v, const Field& g) {
  require_same_shape(v, g, "stereo_pushforward");
  const int k = v.dim();
  Field out(v.grid(), k + 1);
  for (int j = 0; j < v.size(); ++j) {
    double s = 0.0, vg = 0.0;
    for (int c = 0; c < k; ++c) {
      s += v.at(c, j) * v.at(c, j);
      vg += v.at(c, j) * g.at(c, j);
    }
    const double d = 4.0 + s;
    for (int c = 0; c < k; ++c) out.at(c, j) = 4.0 * g.at(c, j) / d - 8.0 * vg * v.at(c, j) / (d * d);
    out.at(k, j) = -16.0 * vg / (d * d);
  }
  return out;
}

Field u_feedback(const SphereField& u, const RapidFeedbackPolicy& p) {
  if (u.dim() != p.frame.dim()) throw SizeMismatch("u_feedback: frame dimension mismatch");
  const Field v = stereo_forward(p.frame.apply(u.field()));
  const Field g = v_feedback(v, p);
  return p.frame.transpose().apply(stereo_pushforward(v, g));
}

void UFeedbackForcing::sample(double, double, const Field& u, Field& out) const {
  out = u_feedback(SphereField(u, 1e-6), p_);
}

// ---------------------------------------------------------------- v loop

VLoop::VLoop(const Field& v0, const RapidFeedbackPolicy& policy, double dt, double t0,
             double h2_cap)
    : pol_(policy), dt_(dt), t0_(t0), cap_(h2_cap), grid_(v0.grid()), k_(v0.dim()), v_(v0),
      g_(v0.grid(), v0.dim()) {
  if (!(dt > 0.0)) throw InvalidArgument("VLoop: dt must be positive");
  if (v0.grid() != policy.window.grid()) throw SizeMismatch("VLoop: grid mismatch");
  keep_ = static_cast<int>(std::floor((2.0 / 3.0) * grid_.nyquist() + 1e-12));
  factor();
}

void VLoop::set_policy(const RapidFeedbackPolicy& policy) {
  pol_ = policy;
  factor();
}

void VLoop::factor() {
  m_ = lambda_cutoff(pol_.lambda);
  const int nb = 2 * m_ + 1;
  const std::vector<double> graw = windowed_gram(m_, pol_.window);
  Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(graw.data(), nb, nb);
  a *= dt_ * pol_.gamma;
  for (int i = 0; i < nb; ++i) {
    const double n = (i + 1) / 2;
    a(i, i) += 1.0 + dt_ * n * n;
  }
  llt_.compute(a);
  if (llt_.info() != Eigen::Success) throw SingularGram("VLoop: low-block factorization failed");
}

void VLoop::step() {
  const int n = grid_.size(), ny = grid_.nyquist();
  const Spectrum vh = dft(v_);
  if (!v_.all_finite()) throw BlowupDetected(time(), "non-finite v state");
  const double h2 = sobolev_norm(vh, 2);
  if (h2 > cap_) throw BlowupDetected(time(), "v H2 norm " + std::to_string(h2) + " exceeds cap");
  const Field vx = derivative(vh, grid_, 1);
  Field a(grid_, k_);
  for (int j = 0; j < n; ++j) {
    double s = 0.0, sx = 0.0, vx2 = 0.0;
    for (int c = 0; c < k_; ++c) {
      s += v_.at(c, j) * v_.at(c, j);
      sx += 2.0 * v_.at(c, j) * vx.at(c, j);
      vx2 += vx.at(c, j) * vx.at(c, j);
    }
    const double d = 4.0 + s;
    for (int c = 0; c < k_; ++c)
      a.at(c, j) = -(2.0 * sx / d) * vx.at(c, j) + (2.0 * vx2 / d) * v_.at(c, j);
  }
  Spectrum ah = dft(a);
  Spectrum rhs = vh;
  for (int c = 0; c < k_; ++c)
    for (int q = 0; q <= ny; ++q)
      if (q <= keep_) rhs.at(c, q) += dt_ * ah.at(c, q);
  // low block: (I + dt (D + gamma G)) p = P rhs
  Spectrum low(n, k_);
  Eigen::VectorXd b;
  for (int c = 0; c < k_; ++c) {
    to_low(rhs.comp(c), m_, b);
    const Eigen::VectorXd p = llt_.solve(b);
    from_low(p, m_, low.comp(c));
  }
  Field pl = idft(low, grid_);
  const auto& mask = pol_.window.mask();
  for (int c = 0; c < k_; ++c) {
    double* x = pl.comp(c);
    for (int j = 0; j < n; ++j) x[j] *= mask[j];
  }
  const Spectrum mph = dft(pl);
  Spectrum next = low;
  for (int c = 0; c < k_; ++c)
    for (int q = m_ + 1; q <= ny; ++q)
      next.at(c, q) = (rhs.at(c, q) - dt_ * pol_.gamma * mph.at(c, q)) /
                      (1.0 + dt_ * static_cast<double>(q) * q);
  v_ = idft(next, grid_);
  g_ = pl;
  g_ *= -pol_.gamma;
  ++steps_;
  if (!v_.all_finite()) throw BlowupDetected(time(), "non-finite v state");
}

VTrajectory simulate_v_closed_loop(const Field& v0, const RapidFeedbackPolicy& policy,
                                   double horizon, double dt, int store_every) {
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  if (store_every < 1) throw InvalidArgument("store_every must be >= 1");
  VLoop loop(v0, policy, dt);
  const long nsteps = std::max(1L, std::lround(horizon / dt));
  VTrajectory tr;
  auto store = [&]() {
    const Spectrum s = dft(loop.state());
    tr.times.push_back(loop.time());
    tr.states.push_back(loop.state());
    tr.h1.push_back(h1_of(s, false));
    tr.hdot1.push_back(h1_of(s, true));
    tr.lyapunov.push_back(lyapunov_value(loop.state(), policy));
  };
  store();
  for (long i = 1; i <= nsteps; ++i) {
    loop.step();
    if (i % store_every == 0 || i == nsteps) store();
  }
  return tr;
}

double fitted_rate(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2) throw InvalidArgument("fitted_rate needs two samples");
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(y[i] > 0.0)) throw InvalidArgument("fitted_rate needs positive samples");
    const double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
  }
  return -(n * sty - st * sy) / (n * stt - st * st);
}

namespace {

Rotation frame_for(const Vec& target, int dim) {
  if (target.empty()) return pole_frame(basis_vector(dim, dim - 1));
  if (static_cast<int>(target.size()) != dim) throw SizeMismatch("target dimension mismatch");
  return pole_frame(UnitVector(target, 1e-10).coords());
}

Window window_or_default(const Window& w, PeriodicGrid g) {
  return w.mask().empty() ? default_control_window(g) : w;
}

// states and diagnostic rows of a sphere trajectory reconstructed from v
struct SphereLog {
  Trajectory tr;
  Field prev;
  double flux = 0.0;
  bool have_prev = false;

  void add(double t, const Field& u, double control, bool store) {
    if (have_prev) {
      Field d = u - prev;
      flux += l2_inner(d, d) / std::max(1e-300, t - tr_time_);
    }
    prev = u;
    have_prev = true;
    tr_time_ = t;
    if (!store) return;
    const Spectrum s = dft(u);
    DiagnosticRow r;
    r.t = t;
    r.energy = energy(s);
    r.h1_norm = sobolev_norm(s, 1);
    r.flux_cum = flux;
    r.constraint_residual = SphereField(u, 1e-6).constraint_residual();
    r.control_l2 = control;
    tr.diagnostics.push_back(r);
    tr.times.push_back(t);
    tr.states.push_back(SphereField(u, 1e-6));
  }
  double tr_time_ = 0.0;
};

} // namespace

StabilizeResult rapid_stabilize(const SphereField& u0, double lambda, double horizon,
                                const StabilizeOptions& opt) {
  const Window w = window_or_default(opt.window, u0.grid());
  const double c0 = opt.c0 >= 0.0 ? opt.c0 : policy_c0(w);
  const RapidFeedbackPolicy pol(lambda, c0, w, frame_for(opt.target, u0.dim()));
  const Field v0 = stereo_forward(pol.frame.apply(u0.field()));
  StabilizeResult out;
  out.v = simulate_v_closed_loop(v0, pol, horizon, opt.dt, opt.store_every);
  const Rotation back = pol.frame.transpose();
  SphereLog log;
  for (std::size_t i = 0; i < out.v.states.size(); ++i)
    log.add(out.v.times[i], back.apply(stereo_inverse(out.v.states[i])), 0.0, true);
  out.trajectory = std::move(log.tr);
  std::vector<double> t, a, b;
  const double fit_end = std::min(horizon, 8.0 / lambda);
  for (std::size_t i = 0; i < out.v.times.size(); ++i) {
    if (out.v.times[i] > fit_end + 1e-12) break;
    t.push_back(out.v.times[i]);
    a.push_back(out.v.h1[i]);
    b.push_back(out.v.hdot1[i]);
  }
  if (t.size() >= 2) {
    out.rate_h1 = fitted_rate(t, a);
    out.rate_hdot1 = fitted_rate(t, b);
  }
  return out;
}

// ---------------------------------------------------------------- schedule

NullControlSchedule NullControlSchedule::standard(double horizon, double dt, double admission,
                                                  double lambda_cap) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw InvalidArgument("schedule needs horizon, dt > 0");
  NullControlSchedule s;
  s.horizon = horizon;
  double lam = std::min(lambda_cap, std::max(4.0, std::pow(2.0 / horizon, 2)));
  double t = 0.0, thr = admission;
  for (int k = 0;; ++k) {
    const double next_t = horizon * (1.0 - std::ldexp(1.0, -(k + 1)));
    const double next_len = horizon * std::ldexp(1.0, -(k + 2));
    const bool last = lam * s.q > lambda_cap * (1.0 + 1e-12) || next_len < 10.0 * dt;
    Stage st;
    st.t0 = t;
    st.t1 = last ? horizon : next_t;
    st.lambda = lam;
    st.threshold = thr;
    s.stages.push_back(st);
    if (last) break;
    thr *= std::exp(-lam * (st.t1 - st.t0) / 8.0);
    t = next_t;
    lam *= s.q;
  }
  s.validate();
  return s;
}

void NullControlSchedule::validate() const {
  if (stages.empty()) throw InvalidArgument("schedule has no stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (!(stages[i].t1 > stages[i].t0)) throw InvalidArgument("schedule times must increase");
    if (i > 0 && !(stages[i].lambda > stages[i - 1].lambda))
      throw InvalidArgument("schedule gains must increase");
  }
  if (std::abs(stages.back().t1 - horizon) > 1e-12) throw InvalidArgument("schedule must end at T");
}

NullControlResult small_time_null_control(const SphereField& u0, const Vec& target, double horizon,
                                          const NullControlOptions& opt) {
  const PeriodicGrid grid = u0.grid();
  const Window w = window_or_default(opt.window, grid);
  const double c0 = opt.c0 >= 0.0 ? opt.c0 : policy_c0(w, opt.lambda_cap);
  const Rotation frame = frame_for(target, u0.dim());
  const Rotation back = frame.transpose();
  NullControlResult out;
  out.schedule = NullControlSchedule::standard(horizon, opt.dt, opt.admission, opt.lambda_cap);
  out.control = ControlRecord(w, u0.dim());
  const Field v0 = stereo_forward(frame.apply(u0.field()));
  {
    const double e0 = sobolev_norm(v0, 1);
    if (e0 > opt.admission)
      throw ScheduleExhausted(0, "initial v norm " + std::to_string(e0) +
                                     " exceeds the admission threshold");
  }
  std::unique_ptr<VLoop> loop;
  SphereLog log;
  long step_index = 0;
  for (std::size_t k = 0; k < out.schedule.stages.size(); ++k) {
    const Stage& st = out.schedule.stages[k];
    const RapidFeedbackPolicy pol(st.lambda, c0, w, frame);
    if (!loop)
      loop = std::make_unique<VLoop>(v0, pol, opt.dt);
    else
      loop->set_policy(pol);
    const double entry = sobolev_norm(loop->state(), 1);
    out.stage_entry.push_back(entry);
    if (entry > st.threshold * (1.0 + 1e-12))
      throw ScheduleExhausted(static_cast<int>(k), "stage entry norm " + std::to_string(entry) +
                                                       " above threshold " +
                                                       std::to_string(st.threshold));
    if (k == 0) log.add(0.0, back.apply(stereo_inverse(loop->state())), 0.0, true);
    const long end_index = std::lround(st.t1 / opt.dt);
    while (step_index < end_index) {
      const double ta = step_index * opt.dt;
      loop->step();
      ++step_index;
      const Field f = back.apply(stereo_pushforward(loop->state(), loop->last_control()));
      const double fl2 = std::sqrt(std::max(0.0, l2_inner(f, f)));
      out.control.append(ta, f);
      out.control.set_end(step_index * opt.dt);
      const bool store = step_index % opt.store_every == 0 || step_index == end_index;
      log.add(step_index * opt.dt, back.apply(stereo_inverse(loop->state())), fl2, store);
    }
  }
  const Spectrum sv = dft(loop->state());
  out.terminal_h1 = sobolev_norm(sv, 1);
  out.terminal_hdot1 = sobolev_norm(sv, 1, true);
  if (out.terminal_h1 > opt.terminal_tol)
    throw ScheduleExhausted(static_cast<int>(out.schedule.stages.size()) - 1,
                            "terminal v norm " + std::to_string(out.terminal_h1) + " above " +
                                std::to_string(opt.terminal_tol));
  out.cost_linf_l2 = out.control.linf_l2();
  // snap to the exact target point
  Field snapped(grid, u0.dim());
  const Vec p = back.apply(basis_vector(u0.dim(), u0.dim() - 1));
  for (int c = 0; c < u0.dim(); ++c)
    for (int j = 0; j < grid.size(); ++j) snapped.at(c, j) = p[c];
  out.trajectory = std::move(log.tr);
  out.trajectory.states.back() = SphereField(snapped);
  return out;
}

double admissible_amplitude(double lambda, const StabilizeOptions& opt, unsigned seed) {
  const PeriodicGrid grid = opt.window.mask().empty() ? PeriodicGrid(256) : opt.window.grid();
  const int dim = opt.target.empty() ? 3 : static_cast<int>(opt.target.size());
  // unit-H1 data shape in v-coordinates
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Field shape(grid, dim - 1);
  for (int c = 0; c < dim - 1; ++c)
    for (int m = 0; m <= 4; ++m) {
      const double a = nd(rng) / (1.0 + m * m), b = nd(rng) / (1.0 + m * m);
      for (int j = 0; j < grid.size(); ++j)
        shape.at(c, j) += a * std::cos(m * grid.node(j)) + b * std::sin(m * grid.node(j));
    }
  shape *= 1.0 / sobolev_norm(shape, 1);
  const Window w = window_or_default(opt.window, grid);
  const Rotation frame = frame_for(opt.target, dim);
  StabilizeOptions o = opt;
  o.window = w;
  if (o.c0 < 0.0) o.c0 = policy_c0(w);
  auto ok = [&](double amp) {
    Field v = shape;
    v *= amp;
    const SphereField u0(frame.transpose().apply(stereo_inverse(v)), 1e-8);
    try {
      const StabilizeResult r = rapid_stabilize(u0, lambda, 8.0 / lambda, o);
      return r.rate_h1 >= lambda / 8.0;
    } catch (const BlowupDetected&) {
      return false;
    }
  };
  double lo = 0.0, hi = 1e-4;
  while (hi < 64.0 && ok(hi)) {
    lo = hi;
    hi *= 4.0;
  }
  if (lo == 0.0) return 0.0;
  for (int it = 0; it < 8; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (ok(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

} // namespace hmhf
