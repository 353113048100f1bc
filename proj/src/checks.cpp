#include "hmhf/checks.hpp"

#include "hmhf/energy_crossing.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/geodesic_control.hpp"
#include "hmhf/global_pipeline.hpp"
#include "hmhf/scenario.hpp"
#include "hmhf/stabilization.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

namespace hmhf {

namespace {

const PeriodicGrid kGrid(256);
constexpr double kDt = 1e-4;

int worker_count(int threads, std::size_t jobs) {
  int n = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(1, n);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(jobs, 1)));
}

// runs body(i) for i < count on up to threads workers; the first error is rethrown
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const int workers = worker_count(threads, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (std::size_t i; !failed && (i = next++) < count;) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

class Detail {
public:
  Detail& operator()(const std::string& key, double v) {
    char b[48];
    std::snprintf(b, sizeof b, "%.4g", v);
    return add(key, b);
  }
  Detail& operator()(const std::string& key, const std::string& v) { return add(key, v); }
  std::string str() const { return os_.str(); }

private:
  Detail& add(const std::string& key, const std::string& v) {
    if (os_.tellp() > 0) os_ << ' ';
    os_ << key << '=' << v;
    return *this;
  }
  std::ostringstream os_;
};

SolverConfig solver(double dt = kDt, int store_every = 100) {
  SolverConfig c;
  c.dt = dt;
  c.store_every = store_every;
  return c;
}

// ---------------------------------------------------------------------------

bool harmonic_levels(Detail& d, int) {
  double worst = 0.0;
  for (int n = 1; n <= 8; ++n) {
    const double e = energy(harmonic_map(GeodesicChart::standard(3, n), kGrid).field());
    worst = std::max(worst, std::abs(e - kTwoPi * n * n) / (kTwoPi * n * n));
  }
  d("max_rel_error", worst)("tol", 1e-8);
  return worst <= 1e-8;
}

bool stationarity(Detail& d, int threads) {
  std::vector<double> drift(8, 0.0);
  parallel_for(8, threads, [&](std::size_t i) {
    const SphereField phi = harmonic_map(GeodesicChart::standard(3, static_cast<int>(i) + 1), kGrid);
    const Trajectory tr = simulate(phi, 1.0, solver(kDt, 500));
    for (const SphereField& s : tr.states) drift[i] = std::max(drift[i], h1_distance(s.field(), phi.field()));
  });
  const double worst = *std::max_element(drift.begin(), drift.end());
  d("levels", "1..8")("max_h1_drift", worst)("tol", 1e-8);
  return worst <= 1e-8;
}

double dissipation_residual(const SphereField& u0, double horizon, double dt) {
  const Trajectory tr = simulate(u0, horizon, solver(dt, 1 << 30));
  const DiagnosticRow& a = tr.diagnostics.front();
  const DiagnosticRow& b = tr.diagnostics.back();
  return std::abs(a.energy - b.energy - 2.0 * b.flux_cum) / a.energy;
}

bool dissipation(Detail& d, int threads) {
  const std::vector<unsigned> seeds{1, 2, 3};
  std::vector<double> coarse(seeds.size()), fine(seeds.size());
  parallel_for(2 * seeds.size(), threads, [&](std::size_t i) {
    const std::size_t s = i / 2;
    const SphereField u0 = random_fourier(4.0 * kPi, 4, seeds[s], 2, kGrid);
    (i % 2 ? fine : coarse)[s] = dissipation_residual(u0, 0.2, i % 2 ? kDt : 2.0 * kDt);
  });
  double worst = 0.0, qlo = 1e300, qhi = 0.0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    worst = std::max(worst, fine[s]);
    const double q = fine[s] / coarse[s];
    qlo = std::min(qlo, q);
    qhi = std::max(qhi, q);
  }
  // rougher data (modes up to 8), reported only: same first order, larger constant
  const SphereField rough = random_fourier(4.0 * kPi, 8, seeds[0], 2, kGrid);
  const double r1 = dissipation_residual(rough, 0.2, kDt), r2 = dissipation_residual(rough, 0.2, 0.5 * kDt);
  // first order: halving dt halves the residual (ratio 0.5 up to higher-order terms)
  d("seeds", 3)("energy", 4.0 * kPi)("mode_cap", 4)("max_residual", worst)("tol", 1e-3)(
      "halving_ratio_min", qlo)("halving_ratio_max", qhi)("ratio_band", "[0.4,0.6]")(
      "cap8_residual", r1)("cap8_residual_half_dt", r2);
  return worst <= 1e-3 && qlo >= 0.4 && qhi <= 0.6;
}

bool local_decay(Detail& d, int threads) {
  const std::vector<unsigned> seeds{4, 5, 6};
  std::vector<double> worst(seeds.size(), 0.0), e0s(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    const SphereField u0 = random_fourier(0.15, 6, seeds[i], 2, kGrid);
    const Trajectory tr = simulate(u0, 5.0, solver(kDt, 1 << 30));
    const double e0 = tr.diagnostics.front().energy;
    e0s[i] = e0;
    for (const DiagnosticRow& r : tr.diagnostics)
      worst[i] = std::max(worst[i], r.energy / (e0 * std::exp(-r.t / (2.0 * kPi * kPi))));
  });
  const double w = *std::max_element(worst.begin(), worst.end());
  const double emax = *std::max_element(e0s.begin(), e0s.end());
  d("seeds", 3)("max_initial_energy", emax)("max_ratio_to_bound", w)("allowed", 1.05);
  return emax <= 1.0 / kTwoPi && w <= 1.05;
}

bool convergence_detection(Detail& d, int threads) {
  constexpr int count = 20;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ue(kTwoPi + 0.5, 4.0 * kTwoPi - 0.5);
  std::vector<double> targets(count);
  for (double& e : targets) e = ue(rng);
  std::vector<int> ok(count, 0), level(count, -1);
  std::vector<double> resid(count, 0.0), when(count, 0.0);
  parallel_for(count, threads, [&](std::size_t i) {
    const SphereField u0 = random_fourier(targets[i], 8, 100 + static_cast<unsigned>(i), 2, kGrid);
    const DetectResult r = free_flow_until_approximate_harmonic(u0, 0.05, 40.0, solver(kDt, 1 << 30));
    if (r.timeout || !r.chart) return;
    const double e = energy(r.trajectory.final_state().field());
    level[i] = r.chart->n;
    resid[i] = r.residual;
    when[i] = r.time;
    ok[i] = r.residual <= 0.05 && std::abs(e - kTwoPi * r.chart->n * r.chart->n) <= 0.5 ? 1 : 0;
  });
  const int passed = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
  std::string levels;
  for (int l : level) levels += (levels.empty() ? "" : ",") + std::to_string(l);
  d("states", count)("reached", passed)("levels", levels)(
      "max_residual", *std::max_element(resid.begin(), resid.end()))(
      "max_time", *std::max_element(when.begin(), when.end()))("budget", 40.0);
  return passed == count;
}

bool spectral_constant_check(Detail& d, int) {
  const Window w(kGrid, {{0.0, kPi / 2}});
  double prev = -1.0, ratio_max = 0.0, ratio_low = 0.0;
  bool in_range = true, monotone = true;
  for (int m = 1; m <= 32; ++m) {
    const double lambda = double(m) * m;
    const double l = spectral_log_constant_exact(lambda, w); // -log c
    in_range = in_range && std::isfinite(l) && l >= 0.0;
    monotone = monotone && l >= prev;
    prev = l;
    const double r = l / std::sqrt(lambda);
    ratio_max = std::max(ratio_max, r);
    if (lambda <= 256.0) ratio_low = std::max(ratio_low, r);
  }
  // bounded: no growth of -log c / sqrt(lambda) beyond the range the schedule uses
  const bool bounded = ratio_max <= 1.1 * ratio_low;
  d("window", "[0,pi/2)")("lambda", "1..1024")("c_in_0_1", in_range ? "yes" : "no")(
      "nonincreasing", monotone ? "yes" : "no")("sup_ratio_le256", ratio_low)("sup_ratio", ratio_max);
  return in_range && monotone && bounded;
}

bool rapid_stabilization(Detail& d, int threads) {
  const std::vector<double> lambdas{4.0, 16.0};
  std::vector<double> rate(2);
  parallel_for(2, threads, [&](std::size_t i) {
    Field v = smooth_noise(kGrid, 2, 21, 4);
    v *= 1e-3 / sobolev_norm(v, 1);
    const SphereField u0(stereo_inverse(v), 1e-8);
    rate[i] = rapid_stabilize(u0, lambdas[i], 8.0 / lambdas[i]).rate_hdot1;
  });
  d("rate_lambda4", rate[0])("required4", 0.5)("rate_lambda16", rate[1])("required16", 2.0);
  return rate[0] >= 0.5 && rate[1] >= 2.0;
}

struct CostFit {
  double terminal = 0.0, slope = 0.0, r2 = 0.0;
};

// log of the sup-in-time control norm against 1/T at T = 1, 0.5, 0.25
CostFit null_control_fit(double dt, int threads) {
  const std::vector<double> hs{1.0, 0.5, 0.25};
  std::vector<double> term(3), cost(3);
  parallel_for(3, threads, [&](std::size_t i) {
    Field v = smooth_noise(kGrid, 2, 13, 4);
    v *= 1e-4 / sobolev_norm(v, 1);
    const SphereField u0(stereo_inverse(v), 1e-8);
    NullControlOptions o;
    o.dt = dt;
    const NullControlResult r = small_time_null_control(u0, basis_vector(3, 2), hs[i], o);
    term[i] = r.terminal_hdot1;
    cost[i] = r.cost_linf_l2;
  });
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < 3; ++i) {
    const double x = 1.0 / hs[i], y = std::log(cost[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, syy += y * y;
  }
  const double cxx = sxx - sx * sx / 3, cxy = sxy - sx * sy / 3, cyy = syy - sy * sy / 3;
  return {*std::max_element(term.begin(), term.end()), cxy / cxx, cxy * cxy / (cxx * cyy)};
}

bool null_control(Detail& d, int threads) {
  // At dt = 1e-4 the implicit feedback caps the realized force near |v|/dt once
  // gamma dt >> 1, which flattens the T = 0.25 cost; the fit uses a step that
  // resolves it better and the coarse value is reported alongside.
  const double fine_dt = 2.5e-5;
  const CostFit f = null_control_fit(fine_dt, threads);
  const CostFit c = null_control_fit(kDt, threads);
  d("dt", fine_dt)("max_terminal", f.terminal)("tol", 1e-6)("slope", f.slope)("r2", f.r2)(
      "coarse_dt", kDt)("coarse_max_terminal", c.terminal)("coarse_slope", c.slope)("coarse_r2", c.r2);
  return f.terminal <= 1e-6 && c.terminal <= 1e-6 && f.slope > 0.0 && f.r2 >= 0.9;
}

bool flux_oracle(Detail& d, int) {
  const Window w = default_control_window(kGrid);
  double worst = 0.0;
  for (int n : {1, 2}) {
    const SteerResult s = steer_zero_to_one(n, 1.0, w);
    const double oracle = -kPi * n * n;
    const double rel = std::abs(s.flux - oracle) / std::abs(oracle);
    d("flux_N" + std::to_string(n), s.flux)("oracle_N" + std::to_string(n), oracle);
    worst = std::max(worst, rel);
  }
  d("max_rel_error", worst)("tol", 0.02);
  return worst <= 0.02;
}

bool energy_crossing(Detail& d, int threads) {
  std::vector<CrossingSweep> sw(2);
  parallel_for(2, threads, [&](std::size_t i) {
    CrossingOptions o;
    o.solver = solver(kDt, 100);
    sw[i] = crossing_sweep(static_cast<int>(i) + 1, {0.02, 0.01, 0.005}, 1.0,
                           default_control_window(kGrid), o);
  });
  bool ok = true;
  for (const CrossingSweep& s : sw) {
    const std::string n = std::to_string(s.n);
    d("coef_N" + n, s.extrapolated)("oracle_N" + n, s.oracle)("rel_N" + n, s.relative_error);
    ok = ok && s.relative_error <= 0.1;
    for (std::size_t k = 0; k < s.remainder_ratios.size(); ++k) {
      const double q = s.remainder_ratios[k];
      d("ratio_N" + n + "_" + std::to_string(k), q);
      ok = ok && q >= 3.0 && q <= 5.0;
    }
  }
  d("matched_constant", sw[0].matched_constant);
  return ok;
}

bool geodesic_steering(Detail& d, int threads) {
  const Window w = default_control_window(kGrid);
  struct Case {
    int n;
    double r;
    std::function<double(double)> theta;
  };
  const std::vector<Case> cases{
      {1, 0.0, [](double x) { return x + 0.4 * std::sin(2 * x); }},
      {0, 2.0, [](double) { return 0.3; }},
      {-1, 1.0, [](double x) { return -x + 0.2 * std::cos(x); }},
  };
  std::vector<GeodesicSteer> out(cases.size());
  parallel_for(cases.size(), threads, [&](std::size_t i) {
    Field t(kGrid, 1);
    for (int j = 0; j < kGrid.size(); ++j) t.at(0, j) = cases[i].theta(kGrid.node(j));
    out[i] = steer_on_geodesic(PolarState(t, basis_vector(3, 0), basis_vector(3, 1)), cases[i].n,
                               cases[i].r, 1.0, w);
  });
  double te = 0.0, oc = 0.0;
  bool wc = true;
  for (const GeodesicSteer& s : out) {
    te = std::max(te, s.theta_error);
    oc = std::max(oc, s.off_circle);
    wc = wc && s.winding_constant;
  }
  d("cases", static_cast<double>(cases.size()))("max_theta_error", te)("tol_theta", 1e-4)(
      "max_off_circle", oc)("tol_off", 1e-8)("winding_constant", wc ? "yes" : "no");
  return te <= 1e-4 && oc <= 1e-8 && wc;
}

bool winding_change(Detail& d, int threads) {
  const Window w = default_control_window(kGrid);
  const Vec a = basis_vector(3, 0), b = basis_vector(3, 1);
  const std::vector<std::pair<int, int>> cases{{0, 1}, {1, -1}};
  struct Out {
    double terminal = 0, corrected = 0, outside = 0, replay = 0;
  };
  std::vector<Out> out(2);
  parallel_for(2, threads, [&](std::size_t i) {
    Field t(kGrid, 1);
    for (int j = 0; j < kGrid.size(); ++j) t.at(0, j) = cases[i].first * kGrid.node(j);
    const PolarState th0(t, a, b);
    const WindingChange wc = change_winding(th0, cases[i].second, 2.0, w);
    SolverConfig sc = solver();
    SimulateOptions so;
    so.forcing = &wc.control;
    const Trajectory rep = simulate(th0.to_sphere(), 2.0, sc, so);
    const HarmonicCorrection hc = correct_to_harmonic(
        wc.realized.final_state(), GeodesicChart(cases[i].second, a, b), 0.5, w, {}, sc, 2.0);
    Out& o = out[i];
    o.terminal = wc.terminal_error;
    o.corrected = hc.terminal_error;
    o.replay = trajectory_distance(rep, wc.trajectory);
    const auto& mask = w.mask();
    for (const Field& f : wc.stage_b.induced_force)
      for (int c = 0; c < f.dim(); ++c)
        for (int j = 0; j < f.size(); ++j)
          if (mask[j] == 0.0) o.outside = std::max(o.outside, std::abs(f.at(c, j)));
  });
  bool ok = true;
  const char* tags[] = {"0to1", "1to-1"};
  for (int i = 0; i < 2; ++i) {
    const Out& o = out[i];
    d(std::string("terminal_") + tags[i], o.terminal)(std::string("corrected_") + tags[i], o.corrected)(
        std::string("outside_") + tags[i], o.outside)(std::string("replay_") + tags[i], o.replay);
    ok = ok && o.terminal <= 1e-8 && o.corrected <= 1e-8 && o.outside <= 1e-9 && o.replay <= 10 * kDt;
  }
  d("tol_terminal", 1e-8)("tol_outside", 1e-9)("tol_replay", 10 * kDt);
  return ok;
}

bool topology_family(Detail& d, int) {
  double worst = 0.0, emax = 0.0;
  for (int i = 0; i < 32; ++i) {
    const double s = kTwoPi * (i + 0.5) / 32;
    const double e = energy(family_gamma(2, {s}, kGrid).field());
    worst = std::max(worst, std::abs(e - kTwoPi * std::sin(s) * std::sin(s)));
    emax = std::max(emax, e);
  }
  d("samples", 32)("max_error", worst)("tol", 1e-8)("max_energy", emax);
  return worst <= 1e-8 && emax <= kTwoPi + 1e-8;
}

bool global_pipeline(Detail& d, int) {
  const auto start = std::chrono::steady_clock::now();
  const SphereField u0 =
      perturb_tangent(harmonic_map(GeodesicChart::standard(3, 1), kGrid), 0.2, 1);
  const PipelineResult r = run_global(u0, GeodesicChart::standard(3, 2));
  const Trajectory rep = replay_pipeline(u0, r);
  const double gap = trajectory_distance(rep, r.trajectory);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string levels;
  for (int l : r.log.levels()) levels += (levels.empty() ? "" : ",") + std::to_string(l);
  d("terminal_h1", r.terminal_error)("tol", 1e-6)("levels", levels)(
      "decreasing", r.log.levels_strictly_decreasing() ? "yes" : "no")("replay", gap)(
      "tol_replay", 1e-4)("seconds", secs);
  return r.terminal_error <= 1e-6 && r.log.levels_strictly_decreasing() && gap <= 1e-4 &&
         secs <= 600.0;
}

struct Entry {
  CheckInfo info;
  bool (*fn)(Detail&, int);
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e = {
      {{1, "harmonic_levels", "E(phi_N) = 2 pi N^2, N = 1..8, rel 1e-8"}, harmonic_levels},
      {{2, "stationarity", "free flow from phi_N drifts <= 1e-8 in H1 on [0, 1]"}, stationarity},
      {{3, "dissipation_identity", "energy identity residual <= 1e-3, halves with dt"}, dissipation},
      {{4, "local_decay", "E(t) <= 1.05 E(0) exp(-t/(2 pi^2)) on [0, 5] below 1/(2 pi)"}, local_decay},
      {{5, "convergence_detection", "20 random states reach a harmonic level, residual <= 0.05"},
       convergence_detection},
      {{6, "spectral_constant", "c in (0,1], nonincreasing, -log c/sqrt(lambda) bounded"},
       spectral_constant_check},
      {{7, "rapid_stabilization", "Hdot1 decay rate >= lambda/8 for lambda = 4, 16"},
       rapid_stabilization},
      {{8, "null_control", "terminal Hdot1 <= 1e-6 at T = 1, 0.5, 0.25; log cost vs 1/T"}, null_control},
      {{9, "flux_oracle", "steer_zero_to_one flux = -pi N^2 within 2%"}, flux_oracle},
      {{10, "energy_crossing", "delta_E/eps^2 vs 2 flux within 10%, remainder ratios in [3, 5]"},
       energy_crossing},
      {{11, "geodesic_steering", "theta error <= 1e-4, winding constant, off circle <= 1e-8"},
       geodesic_steering},
      {{12, "winding_change", "0 -> 1 and 1 -> -1 within 1e-8, force outside <= 1e-9, replay <= 10 dt"},
       winding_change},
      {{13, "topology_family", "E(gamma_s) = 2 pi sin^2 s on 32 values, E <= 2 pi"}, topology_family},
      {{14, "global_pipeline", "phi(x) + 0.2 perturbation to phi(2x): terminal <= 1e-6, replay <= 1e-4"},
       global_pipeline},
  };
  return e;
}

} // namespace

const std::vector<CheckInfo>& check_catalog() {
  static const std::vector<CheckInfo> c = [] {
    std::vector<CheckInfo> v;
    for (const Entry& e : entries()) v.push_back(e.info);
    return v;
  }();
  return c;
}

CheckResult run_check(int id, int threads) {
  const auto& e = entries();
  if (id < 1 || id > static_cast<int>(e.size())) throw InvalidArgument("unknown check id " + std::to_string(id));
  const Entry& en = e[static_cast<std::size_t>(id - 1)];
  CheckResult r;
  r.id = id;
  r.name = en.info.name;
  const auto start = std::chrono::steady_clock::now();
  Detail d;
  try {
    r.pass = en.fn(d, threads);
    r.detail = d.str();
  } catch (const Error& err) {
    r.pass = false;
    r.detail = "error=" + err.kind() + " message=\"" + err.what() + "\"";
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<CheckResult> run_checks(const std::vector<int>& ids, int threads) {
  std::vector<CheckResult> out(ids.size());
  const int workers = worker_count(threads, ids.size());
  // each check also fans out internally; split the workers between the two levels
  const int inner = std::max(1, worker_count(threads, 64) / workers);
  parallel_for(ids.size(), workers, [&](std::size_t i) { out[i] = run_check(ids[i], inner); });
  return out;
}

std::string check_line(const CheckResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "%s %02d %s", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str());
  char secs[32];
  std::snprintf(secs, sizeof secs, " seconds=%.1f", r.seconds);
  return std::string(head) + " " + r.detail + secs;
}

} // namespace hmhf
