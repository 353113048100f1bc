#include "hmhf/linear_heat_control.hpp"

#include "hmhf/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace hmhf {

namespace {

// int_0^d e^{-a s} ds
double phi(double a, double d) {
  if (a == 0.0) return d;
  return -std::expm1(-a * d) / a;
}

// real orthonormal coordinates of a scalar spectrum: Euclidean norm = L2 norm
Eigen::VectorXd to_real(const Spectrum& s) {
  const int n = s.size();
  const int ny = n / 2;
  Eigen::VectorXd r(n);
  const double a = std::sqrt(kTwoPi), b = std::sqrt(2.0 * kTwoPi);
  r(0) = a * s.at(0, 0).real();
  for (int k = 1; k < ny; ++k) {
    r(2 * k - 1) = b * s.at(0, k).real();
    r(2 * k) = b * s.at(0, k).imag();
  }
  r(n - 1) = a * s.at(0, ny).real();
  return r;
}

int mode_of(int index, int n) {
  if (index == 0) return 0;
  if (index == n - 1) return n / 2;
  return (index + 1) / 2;
}

void check_scalar(const Field& f, const PeriodicGrid& g, const char* what) {
  if (f.dim() != 1) throw SizeMismatch(std::string(what) + ": expected a scalar field");
  if (f.grid() != g) throw SizeMismatch(std::string(what) + ": grid mismatch");
}

// advance a scalar spectrum by d under constant forcing gh
void advance(Spectrum& w, const Spectrum* gh, double potential, double d) {
  const int ny = w.size() / 2;
  auto* z = w.comp(0);
  for (int k = 0; k <= ny; ++k) {
    const double a = static_cast<double>(k) * k - potential;
    z[k] = std::exp(-a * d) * z[k];
    if (gh) z[k] += phi(a, d) * gh->at(0, k);
  }
}

struct Piece {
  double a, b;
  int index; // record piece, -1 for free
};

std::vector<Piece> pieces_of(const ControlRecord& g, double horizon) {
  std::vector<Piece> out;
  double t = 0.0;
  const int n = static_cast<int>(g.size());
  for (int i = 0; i < n; ++i) {
    const double lo = std::max(0.0, g.times()[i]);
    const double hi = std::min(horizon, i + 1 < n ? g.times()[i + 1] : g.end_time());
    if (!(hi > lo)) continue;
    if (lo > t) out.push_back({t, lo, -1});
    out.push_back({lo, hi, i});
    t = hi;
  }
  if (horizon > t) out.push_back({t, horizon, -1});
  return out;
}

} // namespace

LinearTrajectory linear_forward(const Field& initial, const ControlRecord& g, double potential,
                                double horizon) {
  if (!(horizon > 0.0)) throw InvalidArgument("linear_forward: horizon must be positive");
  const PeriodicGrid grid = initial.grid();
  check_scalar(initial, grid, "linear_forward");
  if (!g.empty() && (g.dim() != 1 || g.window().grid() != grid))
    throw SizeMismatch("linear_forward: control shape mismatch");
  LinearTrajectory tr;
  tr.potential = potential;
  Spectrum w = dft(initial);
  tr.times.push_back(0.0);
  tr.states.push_back(initial);
  for (const Piece& p : pieces_of(g, horizon)) {
    Spectrum gh;
    if (p.index >= 0) gh = dft(g.forces()[p.index]);
    const double h = 0.5 * (p.b - p.a);
    advance(w, p.index >= 0 ? &gh : nullptr, potential, h);
    tr.times.push_back(0.5 * (p.a + p.b));
    tr.states.push_back(idft(w, grid));
    advance(w, p.index >= 0 ? &gh : nullptr, potential, p.b - p.a - h);
    tr.times.push_back(p.b);
    tr.states.push_back(idft(w, grid));
  }
  return tr;
}

Field linear_terminal(const Field& initial, const ControlRecord& g, double potential,
                      double horizon) {
  if (!(horizon > 0.0)) throw InvalidArgument("linear_terminal: horizon must be positive");
  const PeriodicGrid grid = initial.grid();
  check_scalar(initial, grid, "linear_terminal");
  Spectrum w = dft(initial);
  for (const Piece& p : pieces_of(g, horizon)) {
    Spectrum gh;
    if (p.index >= 0) gh = dft(g.forces()[p.index]);
    advance(w, p.index >= 0 ? &gh : nullptr, potential, p.b - p.a);
  }
  return idft(w, grid);
}

HumResult hum_null_control(const LinearControlProblem& pb, const HumOptions& opt) {
  const PeriodicGrid grid = pb.window.grid();
  check_scalar(pb.initial, grid, "hum_null_control");
  if (!(pb.horizon > 0.0)) throw InvalidArgument("hum_null_control: horizon must be positive");
  if (!(pb.window.measure() > 0.0)) throw InvalidArgument("hum_null_control: empty window");
  if (!pb.target.data().empty()) check_scalar(pb.target, grid, "hum_null_control target");
  const int m = opt.basis.modes, np = opt.basis.pieces;
  if (m < 0 || m >= grid.nyquist()) throw InvalidArgument("control basis modes beyond Nyquist");
  if (np < 1) throw InvalidArgument("control basis needs at least one time piece");
  if (!(opt.rho > 0.0)) throw InvalidArgument("rho must be positive");
  const int n = grid.size();

  // spatial basis: windowed trig functions orthonormalized on the window
  const int nb0 = 2 * m + 1;
  const std::vector<double> graw = windowed_gram(m, pb.window);
  Eigen::MatrixXd gm = Eigen::Map<const Eigen::MatrixXd>(graw.data(), nb0, nb0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ges(gm);
  std::vector<Field> psi;
  const auto& mask = pb.window.mask();
  for (int i = nb0 - 1; i >= 0; --i) {
    const double lam = ges.eigenvalues()(i);
    if (lam < 1e-13) continue;
    Field f(grid, 1);
    for (int j = 0; j < n; ++j) {
      if (mask[j] == 0.0) continue;
      double s = 0.0;
      for (int a = 0; a < nb0; ++a) s += ges.eigenvectors()(a, i) * real_mode(a, grid.node(j));
      f.at(0, j) = s / std::sqrt(lam);
    }
    psi.push_back(std::move(f));
  }
  const int nb = static_cast<int>(psi.size());
  Eigen::MatrixXd ps(n, nb);
  for (int i = 0; i < nb; ++i) ps.col(i) = to_real(dft(psi[i]));

  const double tt = pb.horizon, dp = tt / np;
  Eigen::VectorXd av(n);
  for (int r = 0; r < n; ++r) {
    const double k = mode_of(r, n);
    av(r) = k * k - pb.potential;
  }
  // free terminal state minus target
  Eigen::VectorXd z = to_real(dft(pb.initial));
  for (int r = 0; r < n; ++r) z(r) *= std::exp(-av(r) * tt);
  if (!pb.target.data().empty()) z -= to_real(dft(pb.target));

  Eigen::MatrixXd fp(n, np);
  for (int p = 0; p < np; ++p)
    for (int r = 0; r < n; ++r)
      fp(r, p) = std::exp(-av(r) * (tt - (p + 1) * dp)) * phi(av(r), dp);

  HumResult out;
  out.basis_size = nb;
  out.control = ControlRecord(pb.window, 1);
  // K K^T as a Hadamard product of the spatial and temporal Gram factors
  const Eigen::MatrixXd a = (ps * ps.transpose()).cwiseProduct(fp * fp.transpose());
  Eigen::MatrixXd sys = a;
  sys.diagonal().array() += dp / opt.rho;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys);
  const double emin = es.eigenvalues().minCoeff(), emax = es.eigenvalues().maxCoeff();
  out.condition = emin > 0.0 ? emax / emin : INFINITY;
  if (!(out.condition <= opt.max_condition))
    throw IllConditioned("HUM normal equations have condition number " +
                         std::to_string(out.condition));
  const Eigen::VectorXd y = es.eigenvectors() *
                            (es.eigenvectors().transpose() * z).cwiseQuotient(es.eigenvalues());
  for (int p = 0; p < np; ++p) {
    const Eigen::VectorXd c = -(ps.transpose() * fp.col(p).cwiseProduct(y));
    Field g(grid, 1);
    for (int i = 0; i < nb; ++i) g.axpy(c(i), psi[i]);
    out.control.append(p * dp, std::move(g));
  }
  out.control.set_end(tt);
  out.terminal = linear_terminal(pb.initial, out.control, pb.potential, tt);
  Field mis = out.terminal;
  if (!pb.target.data().empty()) mis -= pb.target;
  out.terminal_norm = std::sqrt(std::max(0.0, l2_inner(mis, mis)));
  return out;
}

SteerResult steer_zero_to_one(int n_potential, double horizon, const Window& window,
                              const SteerOptions& opt) {
  if (n_potential < 0) throw InvalidArgument("steer_zero_to_one: N must be >= 0");
  if (!(horizon > 0.0)) throw InvalidArgument("steer_zero_to_one: horizon must be positive");
  if (!(opt.sub_interval > 0.0)) throw InvalidArgument("sub_interval must be positive");
  const PeriodicGrid grid = window.grid();
  const double n2 = static_cast<double>(n_potential) * n_potential;

  // plain heat null control from the constant -1; scaled by e^{-N^2 T} later
  LinearControlProblem pb;
  pb.initial = Field(grid, 1);
  for (double& v : pb.initial.data()) v = -1.0;
  pb.horizon = horizon;
  pb.window = window;
  const HumResult h1 = hum_null_control(pb, opt.hum);
  const int np = static_cast<int>(h1.control.size());
  const double dp = horizon / np;
  const int sub = std::max(1, static_cast<int>(std::ceil(dp / opt.sub_interval - 1e-9)));
  const double ds = dp / sub;

  SteerResult out;
  out.control = ControlRecord(window, 1);
  // exact solve with the continuous g = e^{N^2 (t-T)} h1 next to the substituted z1
  Spectrum wx(grid.size(), 1);
  Spectrum z1 = dft(pb.initial);
  double gap = 0.0;
  auto compare = [&](double t) {
    Field w = idft(wx, grid);
    Field z = idft(z1, grid);
    const double s = std::exp(n2 * (t - horizon));
    for (int j = 0; j < grid.size(); ++j)
      gap = std::max(gap, std::abs(w.at(0, j) - s * (z.at(0, j) + 1.0)));
  };
  auto exact_step = [&](const Spectrum& hh, double t, double d) {
    const double e = std::exp(n2 * (t + d - horizon));
    auto* w = wx.comp(0);
    auto* z = z1.comp(0);
    for (int k = 0; k <= grid.nyquist(); ++k) {
      const double kk = static_cast<double>(k) * k;
      w[k] = std::exp(-(kk - n2) * d) * w[k] + e * phi(kk, d) * hh.at(0, k);
      z[k] = std::exp(-kk * d) * z[k] + phi(kk, d) * hh.at(0, k);
    }
  };
  compare(0.0);
  for (int p = 0; p < np; ++p) {
    const Field& hp = h1.control.forces()[p];
    const Spectrum hh = dft(hp);
    for (int s = 0; s < sub; ++s) {
      const double a = p * dp + s * ds, b = (s + 1 == sub) ? (p + 1) * dp : a + ds;
      // cell average of e^{N^2 (t - T)} over [a, b]
      const double d = b - a;
      const double avg = n2 == 0.0 ? 1.0 : std::exp(n2 * (a - horizon)) * std::expm1(n2 * d) / (n2 * d);
      Field g = hp;
      g *= avg;
      out.control.append(a, std::move(g));
      exact_step(hh, a, 0.5 * d);
      compare(a + 0.5 * d);
      exact_step(hh, a + 0.5 * d, d - 0.5 * d);
      compare(b);
    }
  }
  out.control.set_end(horizon);
  out.substitution_gap = gap;
  out.w = linear_forward(Field(grid, 1), out.control, n2, horizon);
  Field mis = out.w.states.back();
  for (double& v : mis.data()) v -= 1.0;
  out.terminal_error = std::sqrt(std::max(0.0, l2_inner(mis, mis)));
  out.flux = flux_functional(out.w, out.control);
  return out;
}

double quadratic_energy(const Field& w, double potential) {
  return 0.5 * (energy(w) - potential * l2_inner(w, w));
}

double flux_functional(const LinearTrajectory& w, const ControlRecord& g) {
  const std::size_t n = w.times.size();
  if (n < 3 || n % 2 == 0)
    throw InvalidArgument("flux_functional: trajectory needs endpoint and midpoint samples");
  double acc = 0.0;
  for (std::size_t i = 0; i + 2 < n; i += 2) {
    const double a = w.times[i], b = w.times[i + 2];
    const Field gv = g.empty() ? Field(w.states[i].grid(), 1) : g.average(a, b);
    double vals[3];
    for (int q = 0; q < 3; ++q) {
      const Field& s = w.states[i + q];
      Field wt = derivative(s, 2);
      wt.axpy(w.potential, s);
      wt += gv;
      vals[q] = -l2_inner(wt, wt) + l2_inner(wt, gv);
    }
    acc += (b - a) / 6.0 * (vals[0] + 4.0 * vals[1] + vals[2]);
  }
  return acc;
}

} // namespace hmhf
