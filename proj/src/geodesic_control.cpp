#include "hmhf/geodesic_control.hpp"

#include "hmhf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hmhf {

namespace {

void check_frame(const Vec& a, const Vec& b) {
  if (a.size() != b.size() || a.size() < 2) throw SizeMismatch("circle frame dimension mismatch");
  if (std::abs(norm(a) - 1.0) > 1e-10 || std::abs(norm(b) - 1.0) > 1e-10 ||
      std::abs(dot(a, b)) > 1e-10)
    throw InvalidArgument("circle frame is not orthonormal");
}

double wrap_pi(double x) { return std::remainder(x, kTwoPi); }

} // namespace

PolarState::PolarState(Field th, Vec a, Vec b)
    : theta(std::move(th)), alpha(std::move(a)), beta(std::move(b)) {
  if (theta.dim() != 1) throw SizeMismatch("PolarState: theta must be scalar");
  check_frame(alpha, beta);
  winding = winding_degree(theta);
}

PolarState PolarState::from_sphere(const SphereField& u, const Vec& alpha, const Vec& beta) {
  check_frame(alpha, beta);
  const double off = off_circle_distance(u.field(), alpha, beta);
  if (off > 1e-6) throw InvalidArgument("state is not on the circle (distance " + std::to_string(off) + ")");
  return PolarState(unwrap_angle(circle_angle(u.field(), alpha, beta)), alpha, beta);
}

SphereField PolarState::to_sphere() const {
  const int d = static_cast<int>(alpha.size());
  Field u(theta.grid(), d);
  for (int j = 0; j < theta.size(); ++j) {
    const double c = std::cos(theta.at(0, j)), s = std::sin(theta.at(0, j));
    for (int q = 0; q < d; ++q) u.at(q, j) = c * alpha[q] + s * beta[q];
  }
  return SphereField(std::move(u));
}

double off_circle_distance(const Field& u, const Vec& alpha, const Vec& beta) {
  const int d = u.dim();
  if (static_cast<int>(alpha.size()) != d) throw SizeMismatch("off_circle_distance: dimension");
  double worst = 0.0;
  for (int j = 0; j < u.size(); ++j) {
    double a = 0.0, b = 0.0;
    for (int q = 0; q < d; ++q) {
      a += u.at(q, j) * alpha[q];
      b += u.at(q, j) * beta[q];
    }
    const double r = std::hypot(a, b);
    if (r == 0.0) return std::sqrt(2.0);
    double dist2 = 0.0;
    for (int q = 0; q < d; ++q) {
      const double e = u.at(q, j) - (a * alpha[q] + b * beta[q]) / r;
      dist2 += e * e;
    }
    worst = std::max(worst, std::sqrt(dist2));
  }
  return worst;
}

TorqueForcing::TorqueForcing(ControlRecord h, Field source, Vec alpha, Vec beta)
    : h_(std::move(h)), source_(std::move(source)), alpha_(std::move(alpha)),
      beta_(std::move(beta)) {
  check_frame(alpha_, beta_);
  if (h_.dim() != 1) throw SizeMismatch("TorqueForcing: h must be scalar");
  if (source_.dim() != 0 && (source_.dim() != 1 || source_.grid() != h_.window().grid()))
    throw SizeMismatch("TorqueForcing: source shape");
}

void TorqueForcing::sample(double t0, double t1, const Field& u, Field& out) const {
  const Field h = h_.average(t0, t1);
  const int d = dim();
  if (out.dim() != d || out.grid() != u.grid()) out = Field(u.grid(), d);
  const bool src = source_.dim() == 1;
  for (int j = 0; j < u.size(); ++j) {
    const double hv = h.at(0, j) + (src ? source_.at(0, j) : 0.0);
    double a = 0.0, b = 0.0;
    for (int q = 0; q < d; ++q) {
      a += u.at(q, j) * alpha_[q];
      b += u.at(q, j) * beta_[q];
    }
    for (int q = 0; q < d; ++q) out.at(q, j) = hv * (a * beta_[q] - b * alpha_[q]);
  }
}

namespace {

// drive theta to target (unwrapped, same winding) with theta_t - theta_xx = 1_omega (h + source)
GeodesicSteer steer_theta(const PolarState& th0, const Field& target, const Field& source,
                          double horizon, const Window& window, const GeodesicOptions& opt,
                          double t0, const SphereField* start) {
  const PeriodicGrid grid = th0.theta.grid();
  const int d = static_cast<int>(th0.alpha.size());
  Field w0 = th0.theta - target;
  double mean = 0.0;
  for (int j = 0; j < grid.size(); ++j) mean += w0.at(0, j);
  mean /= grid.size();
  const double shift = kTwoPi * std::round(mean / kTwoPi);
  for (int j = 0; j < grid.size(); ++j) w0.at(0, j) -= shift;

  LinearControlProblem pb;
  pb.initial = w0;
  pb.horizon = horizon;
  pb.window = window;
  const HumResult hum = hum_null_control(pb, opt.hum);

  GeodesicSteer out;
  out.torque = ControlRecord(window, 1);
  out.torque.append_record(hum.control, t0);
  Field src = source;
  if (src.dim() == 1)
    for (int j = 0; j < grid.size(); ++j) src.at(0, j) *= window.mask()[j];
  const TorqueForcing force(out.torque, src, th0.alpha, th0.beta);
  out.control = ControlRecord(window, d);
  SimulateOptions so;
  so.forcing = &force;
  so.t0 = t0;
  so.degree_frame = std::make_pair(th0.alpha, th0.beta);
  so.recorder = &out.control;
  out.trajectory = simulate(start ? *start : th0.to_sphere(), horizon, opt.solver, so);

  const Field tf = circle_angle(out.trajectory.final_state().field(), th0.alpha, th0.beta);
  for (int j = 0; j < grid.size(); ++j)
    out.theta_error = std::max(out.theta_error, std::abs(wrap_pi(tf.at(0, j) - target.at(0, j))));
  for (const SphereField& s : out.trajectory.states)
    out.off_circle = std::max(out.off_circle, off_circle_distance(s.field(), th0.alpha, th0.beta));
  for (const DiagnosticRow& r : out.trajectory.diagnostics)
    if (!r.degree || *r.degree != th0.winding) out.winding_constant = false;
  return out;
}

} // namespace

GeodesicSteer steer_on_geodesic(const PolarState& theta0, int n, double r, double horizon,
                                const Window& window, const GeodesicOptions& opt, double t0,
                                const SphereField* start) {
  if (theta0.winding != n)
    throw DegreeMismatch("winding " + std::to_string(theta0.winding) +
                         " cannot be steered to " + std::to_string(n) + " along the circle");
  const PeriodicGrid grid = theta0.theta.grid();
  Field target(grid, 1);
  for (int j = 0; j < grid.size(); ++j) target.at(0, j) = n * grid.node(j) + r;
  return steer_theta(theta0, target, Field(), horizon, window, opt, t0, start);
}

double smoothstep5(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

ThetaJet build_theta1(int n, int n1, double delta, PeriodicGrid grid) {
  if (!(delta > 0.0 && delta < kPi)) throw InvalidArgument("build_theta1: delta must be in (0, pi)");
  ThetaJet j{Field(grid, 1), Field(grid, 1), Field(grid, 1)};
  const double a = kTwoPi - delta, h = 0.5 * delta;
  const double jump = kTwoPi * (n1 - n);
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i);
    double v = n1 * x, dv = n1, ddv = 0.0;
    if (x > a) {
      const double s = std::min(1.0, (x - a) / h);
      const double b0 = smoothstep5(s);
      const double b1 = 30.0 * s * s * (1.0 - s) * (1.0 - s);
      const double b2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
      v -= jump * b0;
      dv -= jump * b1 / h;
      ddv = -jump * b2 / (h * h);
    }
    j.value.at(0, i) = v;
    j.dx.at(0, i) = dv;
    j.dxx.at(0, i) = ddv;
  }
  return j;
}

CurveJet circle_jet(const ThetaJet& th, const Vec& alpha, const Vec& beta) {
  check_frame(alpha, beta);
  const PeriodicGrid grid = th.value.grid();
  const int d = static_cast<int>(alpha.size());
  CurveJet c{Field(grid, d), Field(grid, d), Field(grid, d)};
  for (int j = 0; j < grid.size(); ++j) {
    const double t = th.value.at(0, j), t1 = th.dx.at(0, j), t2 = th.dxx.at(0, j);
    const double cs = std::cos(t), sn = std::sin(t);
    for (int q = 0; q < d; ++q) {
      const double u = cs * alpha[q] + sn * beta[q];
      const double tau = -sn * alpha[q] + cs * beta[q];
      c.u.at(q, j) = u;
      c.ux.at(q, j) = t1 * tau;
      c.uxx.at(q, j) = t2 * tau - t1 * t1 * u;
    }
  }
  return c;
}

TrackingForcing::TrackingForcing(std::function<Field(double)> path, Window window, int dim,
                                 double margin)
    : path_(std::move(path)), window_(std::move(window)), dim_(dim) {
  keep_ = static_cast<int>(std::floor((1.0 - margin) * window_.grid().nyquist() + 1e-12));
}

void TrackingForcing::sample(double t0, double t1, const Field& u, Field& out) const {
  const double dt = t1 - t0;
  if (!(dt > 0.0)) throw InvalidArgument("TrackingForcing needs a positive step");
  const PeriodicGrid grid = u.grid();
  const int ny = grid.nyquist();
  const Spectrum uh = dft(u);
  Spectrum dh = uh;
  for (int c = 0; c < dim_; ++c)
    for (int k = 0; k <= ny; ++k)
      dh.at(c, k) = k == ny ? 0.0 : std::complex<double>(0.0, k) * uh.at(c, k);
  const Field ux = idft(dh, grid);
  Field nl(grid, dim_);
  for (int j = 0; j < grid.size(); ++j) {
    double g = 0.0;
    for (int c = 0; c < dim_; ++c) g += ux.at(c, j) * ux.at(c, j);
    for (int c = 0; c < dim_; ++c) nl.at(c, j) = g * u.at(c, j);
  }
  const Spectrum nh = dft(nl);
  const Spectrum ph = dft(path_(t1));
  Spectrum gh(grid.size(), dim_);
  for (int c = 0; c < dim_; ++c)
    for (int k = 0; k <= ny; ++k) {
      const std::complex<double> n = k <= keep_ ? nh.at(c, k) : 0.0;
      gh.at(c, k) = ((1.0 + dt * static_cast<double>(k) * k) * ph.at(c, k) - uh.at(c, k)) / dt - n;
    }
  out = idft(gh, grid);
}

namespace {

// plane jet of a curve: c = stereo_forward(F u) with two x-derivatives
struct PlaneJet {
  Field c, cx, cxx;
};

PlaneJet plane_jet(const CurveJet& cu, const Rotation& frame) {
  const Field y = frame.apply(cu.u), yx = frame.apply(cu.ux), yxx = frame.apply(cu.uxx);
  const int d = y.dim(), k = d - 1;
  const PeriodicGrid grid = y.grid();
  PlaneJet p{Field(grid, k), Field(grid, k), Field(grid, k)};
  for (int j = 0; j < grid.size(); ++j) {
    const double e = 1.0 + y.at(k, j), e1 = yx.at(k, j), e2 = yxx.at(k, j);
    for (int i = 0; i < k; ++i) {
      const double v = y.at(i, j), v1 = yx.at(i, j), v2 = yxx.at(i, j);
      p.c.at(i, j) = 2.0 * v / e;
      p.cx.at(i, j) = 2.0 * v1 / e - 2.0 * v * e1 / (e * e);
      p.cxx.at(i, j) = 2.0 * v2 / e - 4.0 * v1 * e1 / (e * e) - 2.0 * v * e2 / (e * e) +
                       4.0 * v * e1 * e1 / (e * e * e);
    }
  }
  return p;
}

Vec choose_pole(const CurveJet& a, const CurveJet& b, double clearance) {
  const int d = a.u.dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (const Field* f : {&a.u, &b.u})
    for (int j = 0; j < f->size(); ++j)
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) m(p, q) += f->at(p, j) * f->at(q, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Vec nrm(d);
  for (int q = 0; q < d; ++q) nrm[q] = es.eigenvectors()(q, 0);
  int big = 0;
  for (int q = 1; q < d; ++q)
    if (std::abs(nrm[q]) > std::abs(nrm[big])) big = q;
  if (nrm[big] < 0.0)
    for (double& x : nrm) x = -x;
  std::vector<Vec> cand;
  Vec neg = nrm;
  for (double& x : neg) x = -x;
  cand.push_back(neg);
  cand.push_back(nrm);
  for (int i = d - 1; i >= 0; --i) {
    Vec e = basis_vector(d, i);
    cand.push_back(e);
    for (double& x : e) x = -x;
    cand.push_back(e);
  }
  double best = -1.0;
  Vec pick;
  for (const Vec& q : cand) {
    double dmin = 1e300;
    for (const Field* f : {&a.u, &b.u})
      for (int j = 0; j < f->size(); ++j) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += (f->at(c, j) - q[c]) * (f->at(c, j) - q[c]);
        dmin = std::min(dmin, std::sqrt(s));
      }
    if (dmin > best + 1e-12) {
      best = dmin;
      pick = q;
    }
  }
  if (best < clearance)
    throw PoleOnCurve("no projection pole keeps distance " + std::to_string(clearance) +
                      " from both curves");
  return pick;
}

struct Homotopy {
  PlaneJet a, b;
  Rotation back;
  double t0, duration;
  int k;

  // state and analytic induced force at time t
  void eval(double t, Field* state, Field* force) const {
    const double s = std::clamp((t - t0) / duration, 0.0, 1.0);
    const double sig = smoothstep5(s);
    const double sig1 = 30.0 * s * s * (1.0 - s) * (1.0 - s) / duration;
    const PeriodicGrid grid = a.c.grid();
    Field u(grid, k + 1), ux(grid, k + 1), uxx(grid, k + 1), ut(grid, k + 1);
    for (int j = 0; j < grid.size(); ++j) {
      double c[16], cx[16], cxx[16], ct[16];
      double ss = 0.0, s1 = 0.0, s2 = 0.0, sct = 0.0;
      for (int i = 0; i < k; ++i) {
        c[i] = (1.0 - sig) * a.c.at(i, j) + sig * b.c.at(i, j);
        cx[i] = (1.0 - sig) * a.cx.at(i, j) + sig * b.cx.at(i, j);
        cxx[i] = (1.0 - sig) * a.cxx.at(i, j) + sig * b.cxx.at(i, j);
        ct[i] = sig1 * (b.c.at(i, j) - a.c.at(i, j));
        ss += c[i] * c[i];
        s1 += 2.0 * c[i] * cx[i];
        s2 += 2.0 * (cx[i] * cx[i] + c[i] * cxx[i]);
        sct += 2.0 * c[i] * ct[i];
      }
      const double dd = 4.0 + ss, d2 = dd * dd, d3 = d2 * dd;
      for (int i = 0; i < k; ++i) {
        u.at(i, j) = 4.0 * c[i] / dd;
        ux.at(i, j) = 4.0 * cx[i] / dd - 4.0 * c[i] * s1 / d2;
        uxx.at(i, j) = 4.0 * cxx[i] / dd - 8.0 * cx[i] * s1 / d2 - 4.0 * c[i] * s2 / d2 +
                       8.0 * c[i] * s1 * s1 / d3;
        ut.at(i, j) = 4.0 * ct[i] / dd - 4.0 * c[i] * sct / d2;
      }
      u.at(k, j) = (4.0 - ss) / dd;
      ux.at(k, j) = -8.0 * s1 / d2;
      uxx.at(k, j) = -8.0 * s2 / d2 + 16.0 * s1 * s1 / d3;
      ut.at(k, j) = -8.0 * sct / d2;
    }
    if (state) *state = back.apply(u);
    if (!force) return;
    Field f(grid, k + 1);
    for (int j = 0; j < grid.size(); ++j) {
      double g = 0.0;
      for (int q = 0; q <= k; ++q) g += ux.at(q, j) * ux.at(q, j);
      for (int q = 0; q <= k; ++q) f.at(q, j) = ut.at(q, j) - uxx.at(q, j) - g * u.at(q, j);
    }
    *force = back.apply(f);
  }
};

DiagnosticRow row_of(double t, const SphereField& u, double flux, double control) {
  const Spectrum s = dft(u.field());
  DiagnosticRow r;
  r.t = t;
  r.energy = energy(s);
  r.h1_norm = sobolev_norm(s, 1);
  r.constraint_residual = u.constraint_residual();
  r.flux_cum = flux;
  r.control_l2 = control;
  return r;
}

// constructed trajectory from sampled states; flux from difference quotients
Trajectory constructed(const std::vector<double>& times, const std::vector<SphereField>& states,
                       const std::vector<Field>* force) {
  Trajectory tr;
  double flux = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i > 0) {
      Field du = states[i].field() - states[i - 1].field();
      flux += l2_inner(du, du) / (times[i] - times[i - 1]);
    }
    const double fl = force ? std::sqrt(std::max(0.0, l2_inner((*force)[i], (*force)[i]))) : 0.0;
    tr.times.push_back(times[i]);
    tr.states.push_back(states[i]);
    tr.diagnostics.push_back(row_of(times[i], states[i], flux, fl));
  }
  return tr;
}

SolverConfig tracking_config(const SolverConfig& base, double dt, int store_every) {
  SolverConfig c = base;
  c.scheme = Scheme::imex_euler;
  c.dt = dt;
  c.store_every = store_every;
  c.diag_every = store_every;
  return c;
}

} // namespace

DeformationPath deformation_homotopy(const CurveJet& u1, const CurveJet& u2, double duration,
                                     const Window& window, const DeformationOptions& opt,
                                     double t0, const SphereField* start) {
  const int d = u1.u.dim();
  if (u2.u.dim() != d || u1.u.grid() != u2.u.grid() || window.grid() != u1.u.grid())
    throw SizeMismatch("deformation_homotopy: curve shapes differ");
  if (d < 3) throw DimensionTooSmall("deformation needs S^k with k >= 2");
  if (d > 16) throw InvalidArgument("deformation_homotopy supports dimension <= 16");
  if (!(duration > 0.0) || !(opt.dt > 0.0)) throw InvalidArgument("duration and dt must be positive");
  const auto& mask = window.mask();
  for (int j = 0; j < u1.u.size(); ++j) {
    if (mask[j] != 0.0) continue;
    for (int q = 0; q < d; ++q)
      if (std::abs(u1.u.at(q, j) - u2.u.at(q, j)) > 1e-10)
        throw InvalidArgument("deformation endpoints differ outside the window");
  }
  DeformationPath path;
  path.pole = choose_pole(u1, u2, opt.pole_clearance);
  Vec np = path.pole;
  for (double& x : np) x = -x;
  const Rotation frame = pole_frame(np);
  const Homotopy hom{plane_jet(u1, frame), plane_jet(u2, frame), frame.transpose(), t0, duration,
                     d - 1};

  const long nsteps = std::max(1L, std::lround(duration / opt.dt));
  double h = duration / static_cast<double>(nsteps);
  if (std::abs(h - opt.dt) <= 1e-12 * opt.dt) h = opt.dt;
  for (long i = 0; i <= nsteps; ++i) {
    if (i % opt.store_every != 0 && i != nsteps) continue;
    const double t = t0 + i * h;
    Field st, f;
    hom.eval(t, &st, &f);
    path.times.push_back(t);
    path.states.push_back(SphereField(std::move(st), 1e-10));
    path.induced_force.push_back(std::move(f));
  }

  const TrackingForcing track(
      [&hom](double t) {
        Field s;
        hom.eval(t, &s, nullptr);
        return s;
      },
      window, d);
  path.control = ControlRecord(window, d);
  SimulateOptions so;
  so.forcing = &track;
  so.t0 = t0;
  so.recorder = &path.control;
  const SphereField u0 = start ? *start : SphereField(u1.u, 1e-10);
  path.realized = simulate(u0, duration, tracking_config({}, h, opt.store_every), so);
  Trajectory built = constructed(path.times, path.states, nullptr);
  path.tracking_error = trajectory_distance(path.realized, built);
  return path;
}

namespace {

// theta_1 + w(t) with w_t - w_xx = 1_omega h, w(0) = w0, propagated exactly per mode
class HeatPath {
public:
  HeatPath(Field theta1, Field w0, const ControlRecord& h, Vec alpha, Vec beta)
      : th1_(std::move(theta1)), w0_(dft(w0)), w_(w0_), h_(h), alpha_(std::move(alpha)),
        beta_(std::move(beta)) {
    for (const Field& f : h_.forces()) gh_.push_back(dft(f));
  }

  Field theta(double t) {
    if (t < tw_) {
      w_ = w0_;
      tw_ = 0.0;
    }
    const auto& ts = h_.times();
    while (tw_ < t) {
      // constant piece containing tw_
      const int i = static_cast<int>(std::upper_bound(ts.begin(), ts.end(), tw_) - ts.begin()) - 1;
      bool active = false;
      double next = t;
      if (i < 0) {
        if (!ts.empty()) next = std::min(t, ts.front());
      } else if (tw_ < h_.end_time()) {
        active = true;
        next = std::min(t, i + 1 < static_cast<int>(ts.size()) ? ts[i + 1] : h_.end_time());
      }
      const double tau = next - tw_;
      for (int k = 0; k < w_.modes(); ++k) {
        const double k2 = static_cast<double>(k) * k;
        const double e = std::exp(-k2 * tau);
        const double phi = k == 0 ? tau : -std::expm1(-k2 * tau) / k2;
        w_.at(0, k) = e * w_.at(0, k) + (active ? phi * gh_[i].at(0, k) : 0.0);
      }
      tw_ = next;
    }
    Field th = idft(w_, th1_.grid());
    th += th1_;
    return th;
  }

  Field state(double t) {
    return PolarState(theta(t), alpha_, beta_).to_sphere().field();
  }

private:
  Field th1_;
  Spectrum w0_, w_;
  double tw_ = 0.0;
  const ControlRecord& h_;
  std::vector<Spectrum> gh_;
  Vec alpha_, beta_;
};

} // namespace

WindingChange change_winding(const PolarState& theta0, int n1, double horizon,
                             const Window& window, const GeodesicOptions& opt,
                             const DeformationOptions& dopt, const SphereField* start) {
  const int d = static_cast<int>(theta0.alpha.size());
  if (d < 3) throw DimensionTooSmall("changing the winding needs S^k with k >= 2");
  if (!window.single_arc()) throw InvalidArgument("change_winding needs a single-arc window");
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  const PeriodicGrid grid = theta0.theta.grid();
  const auto arc = window.arcs().front();
  const double delta = 0.5 * (arc.second - arc.first);
  for (int j = 0; j < grid.size(); ++j) {
    const double x = grid.node(j);
    if (x > kTwoPi - delta && x < kTwoPi - 0.5 * delta && !window.contains_node(j))
      throw InvalidArgument("window does not contain the deformation arc");
  }
  const int n = theta0.winding;
  ThetaJet th1 = build_theta1(n, n1, delta, grid);
  Field w0 = theta0.theta - th1.value;
  {
    double mean = 0.0;
    for (int j = 0; j < grid.size(); ++j) mean += w0.at(0, j);
    const double shift = kTwoPi * std::round(mean / grid.size() / kTwoPi);
    for (int j = 0; j < grid.size(); ++j) {
      th1.value.at(0, j) += shift;
      w0.at(0, j) -= shift;
    }
  }
  const double half = 0.5 * horizon;
  const SolverConfig cfg = tracking_config(opt.solver, opt.solver.dt, opt.solver.store_every);

  WindingChange out;
  // stage A: heat control of theta - theta_1, the source -theta_1'' sits in the blend arc
  LinearControlProblem pb;
  pb.initial = w0;
  pb.horizon = half;
  pb.window = window;
  out.torque = hum_null_control(pb, opt.hum).control;
  HeatPath nominal(th1.value, w0, out.torque, theta0.alpha, theta0.beta);
  const TrackingForcing track_a([&nominal](double t) { return nominal.state(t); }, window, d,
                                cfg.dealias_margin);
  out.control = ControlRecord(window, d);
  SimulateOptions so;
  so.forcing = &track_a;
  so.recorder = &out.control;
  so.degree_frame = std::make_pair(theta0.alpha, theta0.beta);
  out.realized = simulate(start ? *start : theta0.to_sphere(), half, cfg, so);
  {
    std::vector<SphereField> st;
    for (double t : out.realized.times) st.push_back(SphereField(nominal.state(t), 1e-10));
    out.trajectory = constructed(out.realized.times, st, nullptr);
  }

  const CurveJet c1 = circle_jet(th1, theta0.alpha, theta0.beta);
  out.stage_a_residual = h1_distance(out.trajectory.final_state().field(), c1.u);
  ThetaJet th2{Field(grid, 1), Field(grid, 1), Field(grid, 1)};
  for (int j = 0; j < grid.size(); ++j) {
    th2.value.at(0, j) = n1 * grid.node(j);
    th2.dx.at(0, j) = n1;
  }
  const CurveJet c2 = circle_jet(th2, theta0.alpha, theta0.beta);

  DeformationOptions dd = dopt;
  dd.dt = cfg.dt;
  dd.store_every = cfg.store_every;
  const SphereField mid = out.realized.final_state();
  out.stage_b = deformation_homotopy(c1, c2, half, window, dd, half, &mid);

  out.control.append_record(out.stage_b.control, 0.0);
  const double fa = out.trajectory.diagnostics.back().flux_cum;
  out.trajectory.append(constructed(out.stage_b.times, out.stage_b.states,
                                    &out.stage_b.induced_force),
                        0.0, fa);
  out.realized.append(out.stage_b.realized, 0.0, out.realized.diagnostics.back().flux_cum);
  out.tracking_error = trajectory_distance(out.realized, out.trajectory);
  const SphereField target = harmonic_map(GeodesicChart(n1, theta0.alpha, theta0.beta), grid);
  out.terminal_error = h1_distance(out.trajectory.final_state().field(), target.field());
  out.realized_terminal_error = h1_distance(out.realized.final_state().field(), target.field());
  return out;
}

HarmonicCorrection correct_to_harmonic(const SphereField& u0, const GeodesicChart& target,
                                       double horizon, const Window& window,
                                       const HumOptions& hum, const SolverConfig& solver,
                                       double t0) {
  const int d = target.dim();
  if (u0.dim() != d || window.grid() != u0.grid())
    throw SizeMismatch("correct_to_harmonic: state and chart shapes differ");
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  const PeriodicGrid grid = u0.grid();
  const int n = grid.size();
  const SphereField phi = harmonic_map(target, grid);
  HarmonicCorrection out;
  out.entry_error = h1_distance(u0.field(), phi.field());

  // tangent frame along phi: the circle direction, then the fixed normals
  const Rotation frame = align_rotation(target);
  const Eigen::MatrixXd& a = frame.matrix();
  std::vector<Field> dirs;
  {
    Field tau(grid, d);
    for (int j = 0; j < n; ++j) {
      const double th = target.n * grid.node(j) + target.phase;
      for (int q = 0; q < d; ++q)
        tau.at(q, j) = -std::sin(th) * target.alpha[q] + std::cos(th) * target.beta[q];
    }
    dirs.push_back(std::move(tau));
  }
  for (int r = 2; r < d; ++r) {
    Field nr(grid, d);
    for (int j = 0; j < n; ++j)
      for (int q = 0; q < d; ++q) nr.at(q, j) = a(r, q);
    dirs.push_back(std::move(nr));
  }

  std::vector<ControlRecord> g;
  for (std::size_t m = 0; m < dirs.size(); ++m) {
    LinearControlProblem pb;
    pb.initial = Field(grid, 1);
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int q = 0; q < d; ++q) s += (u0.field().at(q, j) - phi.field().at(q, j)) * dirs[m].at(q, j);
      pb.initial.at(0, j) = s;
    }
    pb.horizon = horizon;
    pb.window = window;
    pb.potential = m == 0 ? 0.0 : static_cast<double>(target.n) * target.n;
    g.push_back(hum_null_control(pb, hum).control);
  }

  // all records share the piece layout of the first
  out.control = ControlRecord(window, d);
  const auto& ts = g.front().times();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    Field f(grid, d);
    for (std::size_t m = 0; m < dirs.size(); ++m) {
      const Field& gm = g[m].forces()[i];
      for (int q = 0; q < d; ++q)
        for (int j = 0; j < n; ++j) f.at(q, j) += gm.at(0, j) * dirs[m].at(q, j);
    }
    out.control.append(t0 + ts[i], std::move(f));
  }
  out.control.set_end(t0 + g.front().end_time());

  out.applied = ControlRecord(window, d);
  SimulateOptions so;
  so.forcing = &out.control;
  so.t0 = t0;
  so.recorder = &out.applied;
  out.trajectory = simulate(u0, horizon, solver, so);
  out.terminal_error = h1_distance(out.trajectory.final_state().field(), phi.field());
  return out;
}

} // namespace hmhf
