#include "hmhf/scenario.hpp"

#include "hmhf/checks.hpp"
#include "hmhf/energy_crossing.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/geodesic_control.hpp"
#include "hmhf/global_pipeline.hpp"
#include "hmhf/io.hpp"
#include "hmhf/stabilization.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace hmhf {

using json = nlohmann::ordered_json;

const char* kind_name(ScenarioKind k) {
  switch (k) {
  case ScenarioKind::simulate: return "simulate";
  case ScenarioKind::stabilize: return "stabilize";
  case ScenarioKind::null_control: return "null_control";
  case ScenarioKind::cross_energy: return "cross_energy";
  case ScenarioKind::geodesic_steer: return "geodesic_steer";
  case ScenarioKind::change_winding: return "change_winding";
  case ScenarioKind::global: return "global";
  case ScenarioKind::verify: return "verify";
  }
  return "unknown";
}

ScenarioKind parse_kind(const std::string& s) {
  for (ScenarioKind k : {ScenarioKind::simulate, ScenarioKind::stabilize, ScenarioKind::null_control,
                         ScenarioKind::cross_energy, ScenarioKind::geodesic_steer,
                         ScenarioKind::change_winding, ScenarioKind::global, ScenarioKind::verify})
    if (s == kind_name(k)) return k;
  throw InvalidArgument("unknown scenario kind '" + s + "'");
}

const char* seed_name(SeedKind k) {
  switch (k) {
  case SeedKind::harmonic: return "harmonic";
  case SeedKind::perturbed_harmonic: return "perturbed_harmonic";
  case SeedKind::random_fourier: return "random_fourier";
  case SeedKind::family_gamma: return "family_gamma";
  case SeedKind::snapshot: return "snapshot";
  }
  return "unknown";
}

namespace {

SeedKind parse_seed(const std::string& s) {
  for (SeedKind k : {SeedKind::harmonic, SeedKind::perturbed_harmonic, SeedKind::random_fourier,
                     SeedKind::family_gamma, SeedKind::snapshot})
    if (s == seed_name(k)) return k;
  throw InvalidArgument("unknown seed_kind '" + s + "'");
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double parse_plain(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != s.size()) throw InvalidArgument("bad number '" + s + "' for " + key);
  return v;
}

// number, or [number]pi[/number]
double parse_real(const std::string& raw, const std::string& key) {
  const std::string s = trim(raw);
  const std::size_t p = s.find("pi");
  if (p == std::string::npos) return parse_plain(s, key);
  const std::string head = trim(s.substr(0, p));
  std::string tail = trim(s.substr(p + 2));
  double v = kPi;
  if (!head.empty()) v *= parse_plain(head == "-" ? "-1" : head, key);
  if (!tail.empty()) {
    if (tail[0] != '/') throw InvalidArgument("bad number '" + raw + "' for " + key);
    v /= parse_plain(trim(tail.substr(1)), key);
  }
  if (!std::isfinite(v)) throw InvalidArgument("bad number '" + raw + "' for " + key);
  return v;
}

int parse_int(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(trim(s), &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != trim(s).size()) throw InvalidArgument("bad integer '" + s + "' for " + key);
  return static_cast<int>(v);
}

unsigned parse_seed_value(const std::string& s, const std::string& key) {
  const int v = parse_int(s, key);
  if (v < 0) throw InvalidArgument(key + " must be >= 0");
  return static_cast<unsigned>(v);
}

Eigen::MatrixXd random_orthogonal(int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // fix the sign ambiguity of QR so the draw is a function of the seed only
  for (int j = 0; j < d; ++j)
    if (qr.matrixQR()(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

} // namespace

Rotation FrameSpec::rotation(int dim) const {
  if (kind == "identity") return Rotation::identity(dim);
  if (kind == "random") return Rotation(random_orthogonal(dim, seed));
  throw InvalidArgument("unknown frame '" + kind + "' (identity or random)");
}

namespace {

// normal Fourier draws on modes first..modes with weight w(m)
Field fourier_noise(PeriodicGrid g, int dim, unsigned seed, int modes, int first,
                    double (*w)(int)) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Field f(g, dim);
  for (int c = 0; c < dim; ++c)
    for (int m = first; m <= modes; ++m) {
      const double a = w(m) * nd(rng), b = w(m) * nd(rng);
      for (int j = 0; j < g.size(); ++j) {
        const double x = g.node(j);
        f.at(c, j) += a * std::cos(m * x) + (m ? b * std::sin(m * x) : 0.0);
      }
    }
  return f;
}

} // namespace

Field smooth_noise(PeriodicGrid g, int dim, unsigned seed, int modes, int first) {
  return fourier_noise(g, dim, seed, modes, first, [](int m) { return 1.0 / (1.0 + m * m); });
}

SphereField perturb_tangent(const SphereField& u, double amplitude, unsigned seed, int modes) {
  if (!(amplitude >= 0.0)) throw InvalidArgument("perturbation amplitude must be >= 0");
  if (amplitude == 0.0) return u;
  Field p = tangent_project(smooth_noise(u.grid(), u.dim(), seed, modes), u.field());
  const double n = sobolev_norm(p, 1);
  if (!(n > 0.0)) throw DegenerateMode("tangent noise vanished");
  p *= amplitude / n;
  Field v = u.field();
  v += p;
  return SphereField::normalized(v);
}

SphereField random_fourier(double energy_target, int mode_cap, unsigned seed, int k,
                           PeriodicGrid grid, const Vec& base) {
  if (!(energy_target > 0.0)) throw InvalidArgument("energy_target must be positive");
  if (mode_cap < 1) throw InvalidArgument("mode_cap must be >= 1");
  if (mode_cap > grid.nyquist() / 2) throw InvalidArgument("mode_cap above the resolved band");
  // 1/m weights: the steeper smooth_noise spectrum cannot reach the higher levels
  const Field v = fourier_noise(grid, k, seed, mode_cap, 1, [](int m) { return 1.0 / m; });
  const Rotation back = base.empty() ? Rotation::identity(k + 1) : pole_frame(base).transpose();
  auto lift = [&](double s) { return SphereField(back.apply(stereo_inverse(s * v)), 1e-9); };
  auto e = [&](double s) { return energy(lift(s).field()); };
  // E(s) rises from 0 and eventually falls again as the curve collapses to the south pole
  double lo = 0.0, hi = 1e-3, best = 0.0;
  bool found = false;
  for (int i = 0; i < 120; ++i, hi *= 1.25) {
    const double ei = e(hi);
    best = std::max(best, ei);
    if (ei >= energy_target) {
      found = true;
      break;
    }
    lo = hi;
  }
  if (!found)
    throw EnergyUnreachable("random_fourier with mode_cap " + std::to_string(mode_cap) +
                            " reaches at most E = " + std::to_string(best));
  for (int it = 0; it < 80 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (e(mid) < energy_target ? lo : hi) = mid;
  }
  return lift(hi);
}

SphereField seed_state(const SeedSpec& spec, int k, PeriodicGrid grid) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  const int d = k + 1;
  auto chart = [&]() {
    const Rotation r = spec.frame.rotation(d);
    return GeodesicChart(spec.n, r.apply(basis_vector(d, 0)), r.apply(basis_vector(d, 1)),
                         spec.phase);
  };
  switch (spec.kind) {
  case SeedKind::harmonic: return harmonic_map(chart(), grid);
  case SeedKind::perturbed_harmonic:
    return perturb_tangent(harmonic_map(chart(), grid), spec.amplitude, spec.seed);
  case SeedKind::random_fourier: {
    const Vec base =
        spec.frame.kind == "identity" ? Vec{} : spec.frame.rotation(d).apply(basis_vector(d, k));
    return random_fourier(spec.energy_target, spec.mode_cap, spec.seed, k, grid, base);
  }
  case SeedKind::family_gamma: {
    Vec s = spec.s;
    if (s.empty()) s.assign(static_cast<std::size_t>(k - 1), kPi / 2);
    return family_gamma(k, s, grid);
  }
  case SeedKind::snapshot: {
    Snapshot snap = read_snapshot(spec.input);
    if (snap.state.dim() != d || snap.state.grid() != grid)
      throw SizeMismatch("snapshot shape (k = " + std::to_string(snap.state.dim() - 1) +
                         ", grid = " + std::to_string(snap.state.size()) +
                         ") differs from the configuration");
    return snap.state;
  }
  }
  throw InvalidArgument("unknown seed kind");
}

const std::vector<KeyInfo>& scenario_keys() {
  static const std::vector<KeyInfo> keys = {
      {"kind", "scenario: simulate stabilize null_control cross_energy geodesic_steer change_winding global verify"},
      {"k", "target sphere S^k"},
      {"grid", "number of grid nodes (even)"},
      {"dt", "time step"},
      {"horizon", "run length (per-kind default when unset)"},
      {"window", "control arcs a:b;c:d (numbers or multiples of pi)"},
      {"scheme", "imex_euler or imex_bdf2"},
      {"store_every", "steps between stored states"},
      {"snapshot_every", "stored states between snapshots, 0 for none"},
      {"seed_kind", "harmonic perturbed_harmonic random_fourier family_gamma snapshot"},
      {"n", "winding N of the seed (and of the crossing level)"},
      {"phase", "phase of the seed chart"},
      {"frame", "seed frame: identity or random"},
      {"frame_seed", "seed of the random frame"},
      {"amplitude", "H1 size of the seed perturbation"},
      {"energy_target", "random_fourier energy"},
      {"mode_cap", "random_fourier highest mode"},
      {"seed", "random seed of the state"},
      {"s", "family_gamma parameters, comma separated"},
      {"input", "snapshot file for seed_kind=snapshot"},
      {"lambda", "stabilization rate"},
      {"epsilon", "single crossing amplitude"},
      {"eps_sweep", "crossing amplitudes, halving, comma separated"},
      {"n1", "target winding for change_winding"},
      {"target_n", "winding of the target chart"},
      {"target_phase", "phase of the target chart (target angle for geodesic_steer)"},
      {"target_frame", "target frame: identity or random"},
      {"target_frame_seed", "seed of the random target frame"},
      {"checks", "verify: comma separated criterion ids, empty for all"},
      {"threads", "verify: worker threads, 0 for hardware concurrency"},
      {"output", "output directory (relative paths resolve against HMHF_OUTPUT_ROOT)"},
  };
  return keys;
}

void ScenarioConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(raw_value);
  if (key == "kind") kind = parse_kind(v);
  else if (key == "k") k = parse_int(v, key);
  else if (key == "grid") grid = parse_int(v, key);
  else if (key == "dt") dt = parse_real(v, key);
  else if (key == "horizon") horizon = parse_real(v, key);
  else if (key == "window") {
    window.clear();
    for (const std::string& arc : split(v, ';')) {
      const std::vector<std::string> ab = split(arc, ':');
      if (ab.size() != 2) throw InvalidArgument("window arc '" + arc + "' is not a:b");
      window.emplace_back(parse_real(ab[0], key), parse_real(ab[1], key));
    }
    if (window.empty()) throw InvalidArgument("window needs at least one arc");
  } else if (key == "scheme") {
    if (v != "imex_euler" && v != "imex_bdf2") throw InvalidArgument("scheme must be imex_euler or imex_bdf2");
    scheme = v;
  } else if (key == "store_every") store_every = parse_int(v, key);
  else if (key == "snapshot_every") snapshot_every = parse_int(v, key);
  else if (key == "seed_kind") state.kind = parse_seed(v);
  else if (key == "n") state.n = parse_int(v, key);
  else if (key == "phase") state.phase = parse_real(v, key);
  else if (key == "frame") state.frame.kind = v;
  else if (key == "frame_seed") state.frame.seed = parse_seed_value(v, key);
  else if (key == "amplitude") state.amplitude = parse_real(v, key);
  else if (key == "energy_target") state.energy_target = parse_real(v, key);
  else if (key == "mode_cap") state.mode_cap = parse_int(v, key);
  else if (key == "seed") state.seed = parse_seed_value(v, key);
  else if (key == "s") {
    state.s.clear();
    for (const std::string& x : split(v, ',')) state.s.push_back(parse_real(x, key));
  } else if (key == "input") state.input = v;
  else if (key == "lambda") lambda = parse_real(v, key);
  else if (key == "epsilon") epsilon = parse_real(v, key);
  else if (key == "eps_sweep") {
    eps_sweep.clear();
    for (const std::string& x : split(v, ',')) eps_sweep.push_back(parse_real(x, key));
  } else if (key == "n1") n1 = parse_int(v, key);
  else if (key == "target_n") target_n = parse_int(v, key);
  else if (key == "target_phase") target_phase = parse_real(v, key);
  else if (key == "target_frame") target_frame.kind = v;
  else if (key == "target_frame_seed") target_frame.seed = parse_seed_value(v, key);
  else if (key == "checks") {
    checks.clear();
    if (v != "all")
      for (const std::string& x : split(v, ',')) checks.push_back(parse_int(x, key));
  } else if (key == "threads") threads = parse_int(v, key);
  else if (key == "output") output = v;
  else throw InvalidArgument("unknown key '" + key + "'");
  given.insert(key);
}

void ScenarioConfig::load_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("line " + std::to_string(no) + ": expected key=value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void ScenarioConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  load_text(ss.str());
}

void ScenarioConfig::validate() const {
  if (!kind) throw InvalidArgument("kind is required");
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (grid < 8 || grid % 2 != 0) throw InvalidArgument("grid must be even and >= 8");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (horizon && !(*horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  if (store_every < 1) throw InvalidArgument("store_every must be >= 1");
  if (snapshot_every < 0) throw InvalidArgument("snapshot_every must be >= 0");
  for (const auto& [a, b] : window)
    if (!(0.0 <= a && a < b && b <= kTwoPi + 1e-12))
      throw InvalidArgument("window arcs need 0 <= a < b <= 2 pi");
  if (!(state.amplitude >= 0.0)) throw InvalidArgument("amplitude must be >= 0");
  if (state.kind == SeedKind::snapshot && state.input.empty())
    throw InvalidArgument("seed_kind=snapshot needs input");
  if (state.frame.kind != "identity" && state.frame.kind != "random")
    throw InvalidArgument("frame must be identity or random");
  if (target_frame.kind != "identity" && target_frame.kind != "random")
    throw InvalidArgument("target_frame must be identity or random");
  if (threads < 0) throw InvalidArgument("threads must be >= 0");
  switch (*kind) {
  case ScenarioKind::stabilize:
    if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
    break;
  case ScenarioKind::cross_energy:
    if (state.n < 1) throw InvalidArgument("cross_energy needs n >= 1");
    if (epsilon) {
      if (!(*epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    } else {
      if (eps_sweep.size() < 3) throw InvalidArgument("eps_sweep needs at least 3 values");
      for (std::size_t i = 1; i < eps_sweep.size(); ++i)
        if (std::abs(eps_sweep[i] - 0.5 * eps_sweep[i - 1]) > 1e-12 * eps_sweep[i - 1])
          throw InvalidArgument("eps_sweep must halve from one value to the next");
    }
    break;
  case ScenarioKind::global:
    if (k < 2) throw DimensionTooSmall("global needs k >= 2; use geodesic_steer for k = 1");
    break;
  case ScenarioKind::change_winding:
    if (k < 2) throw DimensionTooSmall("change_winding needs k >= 2");
    break;
  case ScenarioKind::verify:
    for (int id : checks)
      if (id < 1 || id > static_cast<int>(check_catalog().size()))
        throw InvalidArgument("unknown check id " + std::to_string(id));
    break;
  default: break;
  }
}

double ScenarioConfig::horizon_or_default() const {
  if (horizon) return *horizon;
  switch (kind.value_or(ScenarioKind::simulate)) {
  case ScenarioKind::stabilize: return 8.0 / lambda;
  case ScenarioKind::change_winding: return 2.0;
  default: return 1.0;
  }
}

std::filesystem::path ScenarioConfig::output_dir() const {
  std::filesystem::path p = output;
  if (p.empty()) p = std::filesystem::path("out") / kind_name(kind.value_or(ScenarioKind::simulate));
  if (p.is_relative())
    if (const char* root = std::getenv("HMHF_OUTPUT_ROOT"); root && *root) p = std::filesystem::path(root) / p;
  return p;
}

GeodesicChart ScenarioConfig::target_chart() const {
  const int d = k + 1;
  const Rotation r = target_frame.rotation(d);
  return GeodesicChart(target_n, r.apply(basis_vector(d, 0)), r.apply(basis_vector(d, 1)),
                       target_phase);
}

std::string error_line(const std::string& kind, const std::string& stage,
                       const std::string& message) {
  std::string m = message;
  for (char& c : m)
    if (c == '\n' || c == '\r') c = ' ';
  return "error kind=" + kind + " stage=" + stage + " message=" + m;
}

namespace {

struct Run {
  const ScenarioConfig& cfg;
  std::filesystem::path dir;
  json summary;
  bool pass = true;

  PeriodicGrid grid() const { return PeriodicGrid(cfg.grid); }
  Window window() const {
    return cfg.window.empty() ? default_control_window(grid()) : Window(grid(), cfg.window);
  }
  SolverConfig solver() const {
    SolverConfig s;
    s.dt = cfg.dt;
    s.scheme = cfg.scheme == "imex_bdf2" ? Scheme::imex_bdf2 : Scheme::imex_euler;
    s.store_every = cfg.store_every;
    s.validate();
    return s;
  }
  SeedSpec seed(SeedKind kind, int n, double amplitude) const {
    SeedSpec s = cfg.state;
    if (!cfg.given.count("seed_kind")) s.kind = kind;
    if (!cfg.given.count("n")) s.n = n;
    if (!cfg.given.count("amplitude")) s.amplitude = amplitude;
    return s;
  }
  void property(const char* key, bool ok) {
    summary["properties"][key] = ok;
    pass = pass && ok;
  }
  void artifacts(const Trajectory& tr) {
    write_trajectory_csv(dir / "trajectory.csv", tr);
    if (cfg.snapshot_every > 0 && !tr.states.empty()) {
      write_snapshot_series(dir / "snapshots", tr.states, tr.times, cfg.snapshot_every);
      write_snapshot(dir / "final.bin", tr.final_state(), tr.final_time());
    }
  }
};

// the constant the n = 0 seed perturbs
Vec base_point(const SeedSpec& spec, int k) {
  const Rotation r = spec.frame.rotation(k + 1);
  return GeodesicChart(0, r.apply(basis_vector(k + 1, 0)), r.apply(basis_vector(k + 1, 1)),
                       spec.phase)
      .point(0.0);
}

void put_chart(json& j, const GeodesicChart& c) {
  j = {{"n", c.n}, {"alpha", c.alpha}, {"beta", c.beta}, {"phase", c.phase}};
}

void run_simulate(Run& r) {
  const SeedSpec spec = r.seed(SeedKind::harmonic, 1, 0.1);
  const SphereField u0 = seed_state(spec, r.cfg.k, r.grid());
  SimulateOptions so;
  if (spec.kind == SeedKind::harmonic || spec.kind == SeedKind::perturbed_harmonic) {
    const Rotation fr = spec.frame.rotation(r.cfg.k + 1);
    so.degree_frame = std::make_pair(fr.apply(basis_vector(r.cfg.k + 1, 0)),
                                     fr.apply(basis_vector(r.cfg.k + 1, 1)));
  }
  const Trajectory tr = simulate(u0, r.cfg.horizon_or_default(), r.solver(), so);
  r.artifacts(tr);
  const DiagnosticRow& a = tr.diagnostics.front();
  const DiagnosticRow& b = tr.diagnostics.back();
  double drift = 0.0, emin = a.energy, emax = a.energy;
  for (const auto& row : tr.diagnostics) {
    emin = std::min(emin, row.energy);
    emax = std::max(emax, row.energy);
  }
  for (const SphereField& s : tr.states) drift = std::max(drift, h1_distance(s.field(), u0.field()));
  std::vector<double> ts, es;
  for (const auto& row : tr.diagnostics)
    if (row.energy > 0.0) {
      ts.push_back(row.t);
      es.push_back(row.energy);
    }
  r.summary["seed_kind"] = seed_name(spec.kind);
  r.summary["energy_initial"] = a.energy;
  r.summary["energy_final"] = b.energy;
  r.summary["energy_min"] = emin;
  r.summary["energy_max"] = emax;
  r.summary["h1_drift_max"] = drift;
  r.summary["decay_rate"] = ts.size() >= 2 ? fitted_rate(ts, es) : 0.0;
  r.summary["dissipation_residual"] =
      a.energy > 0.0 ? std::abs(a.energy - b.energy - 2.0 * b.flux_cum) / a.energy : 0.0;
  r.summary["drift_violations"] = tr.drift_violations;
  r.property("energy_nonincreasing", b.energy <= a.energy * (1.0 + 1e-10) + 1e-14);
}

void run_stabilize(Run& r) {
  const SeedSpec spec = r.seed(SeedKind::perturbed_harmonic, 0, 1e-3);
  const SphereField u0 = seed_state(spec, r.cfg.k, r.grid());
  StabilizeOptions o;
  o.dt = r.cfg.dt;
  o.store_every = r.cfg.store_every;
  o.window = r.window();
  o.target = base_point(spec, r.cfg.k);
  const StabilizeResult s = rapid_stabilize(u0, r.cfg.lambda, r.cfg.horizon_or_default(), o);
  r.artifacts(s.trajectory);
  r.summary["lambda"] = r.cfg.lambda;
  r.summary["decay_rate_h1"] = s.rate_h1;
  r.summary["decay_rate_hdot1"] = s.rate_hdot1;
  r.summary["required_rate"] = r.cfg.lambda / 8.0;
  r.summary["v_h1_initial"] = s.v.h1.front();
  r.summary["v_h1_terminal"] = s.v.h1.back();
  r.property("rate_at_least_lambda_over_8", s.rate_h1 >= r.cfg.lambda / 8.0);
}

void run_null_control(Run& r) {
  const SeedSpec spec = r.seed(SeedKind::perturbed_harmonic, 0, 1e-4);
  const SphereField u0 = seed_state(spec, r.cfg.k, r.grid());
  NullControlOptions o;
  o.dt = r.cfg.dt;
  o.store_every = r.cfg.store_every;
  o.window = r.window();
  const Vec p = base_point(spec, r.cfg.k);
  const NullControlResult n = small_time_null_control(u0, p, r.cfg.horizon_or_default(), o);
  r.artifacts(n.trajectory);
  r.summary["horizon"] = r.cfg.horizon_or_default();
  r.summary["terminal_h1"] = n.terminal_h1;
  r.summary["terminal_hdot1"] = n.terminal_hdot1;
  r.summary["control_cost_linf_l2"] = n.cost_linf_l2;
  r.summary["control_l2l2"] = n.control.l2l2();
  json st = json::array();
  for (std::size_t i = 0; i < n.schedule.stages.size(); ++i) {
    const Stage& s = n.schedule.stages[i];
    st.push_back({{"t0", s.t0}, {"t1", s.t1}, {"lambda", s.lambda}, {"threshold", s.threshold},
                  {"entry", i < n.stage_entry.size() ? n.stage_entry[i] : 0.0}});
  }
  r.summary["stages"] = st;
  r.property("terminal_hdot1_below_1e-6", n.terminal_hdot1 <= 1e-6);
}

void run_cross_energy(Run& r) {
  const int n = r.cfg.state.n;
  CrossingOptions o;
  o.solver = r.solver();
  const double horizon = r.cfg.horizon_or_default();
  const Window w = r.window();
  const int d = r.cfg.k + 1;
  if (r.cfg.epsilon) {
    const GeodesicChart chart = GeodesicChart::standard(d, n);
    const CrossingPlan plan = build_crossing_control(chart, *r.cfg.epsilon, horizon, w);
    const CrossingOutcome out = execute_crossing(harmonic_map(chart, r.grid()), plan, o);
    r.artifacts(out.trajectory);
    const double level = kTwoPi * n * n;
    const double e1 = out.trajectory.diagnostics.back().energy;
    r.summary["n"] = n;
    r.summary["epsilon"] = *r.cfg.epsilon;
    r.summary["delta_e"] = out.delta_e;
    r.summary["delta_e_over_eps2"] = out.delta_e / (*r.cfg.epsilon * *r.cfg.epsilon);
    r.summary["oracle"] = 2.0 * plan.flux;
    r.summary["remainder"] = remainder_norm(out.trajectory, plan);
    r.summary["energy_final"] = e1;
    r.property("exit_below_level", e1 < level);
    return;
  }
  const CrossingSweep s = crossing_sweep(n, r.cfg.eps_sweep, horizon, w, o, d);
  json rows = json::array();
  for (const SweepRow& row : s.rows)
    rows.push_back({{"epsilon", row.epsilon}, {"delta_e", row.delta_e}, {"ratio", row.ratio},
                    {"remainder", row.remainder}});
  r.summary["n"] = n;
  r.summary["rows"] = rows;
  r.summary["extrapolated_coefficient"] = s.extrapolated;
  r.summary["oracle"] = s.oracle;
  r.summary["relative_error"] = s.relative_error;
  r.summary["remainder_ratios"] = s.remainder_ratios;
  r.summary["matched_constant"] = s.matched_constant;
  bool ratios = true;
  for (double q : s.remainder_ratios) ratios = ratios && q >= 3.0 && q <= 5.0;
  r.property("coefficient_within_10_percent", s.relative_error <= 0.1);
  r.property("remainder_quadratic", ratios);
  std::ofstream csv(r.dir / "sweep.csv");
  csv << "epsilon,delta_e,ratio,oracle,remainder\n";
  for (const SweepRow& row : s.rows)
    csv << format_number(row.epsilon) << ',' << format_number(row.delta_e) << ','
        << format_number(row.ratio) << ',' << format_number(row.oracle) << ','
        << format_number(row.remainder) << '\n';
}

void run_geodesic_steer(Run& r) {
  const SeedSpec spec = r.seed(SeedKind::harmonic, 1, 0.3);
  const int d = r.cfg.k + 1;
  const Rotation fr = spec.frame.rotation(d);
  const Vec a = fr.apply(basis_vector(d, 0)), b = fr.apply(basis_vector(d, 1));
  Field th = smooth_noise(r.grid(), 1, spec.seed, 4, 1);
  const double sz = max_abs(th);
  if (sz > 0.0) th *= spec.amplitude / sz;
  for (int j = 0; j < r.grid().size(); ++j) th.at(0, j) += spec.n * r.grid().node(j) + spec.phase;
  GeodesicOptions go;
  go.solver = r.solver();
  if (!r.cfg.given.count("scheme")) go.solver.scheme = Scheme::imex_bdf2;
  const GeodesicSteer s = steer_on_geodesic(PolarState(th, a, b), spec.n, r.cfg.target_phase,
                                            r.cfg.horizon_or_default(), r.window(), go);
  r.artifacts(s.trajectory);
  r.summary["n"] = spec.n;
  r.summary["target_phase"] = r.cfg.target_phase;
  r.summary["theta_error"] = s.theta_error;
  r.summary["off_circle"] = s.off_circle;
  r.summary["winding_constant"] = s.winding_constant;
  r.summary["control_linf_l2"] = s.control.linf_l2();
  r.property("theta_error_below_1e-4", s.theta_error <= 1e-4);
  r.property("off_circle_below_1e-8", s.off_circle <= 1e-8);
  r.property("winding_constant", s.winding_constant);
}

void run_change_winding(Run& r) {
  const SeedSpec spec = r.seed(SeedKind::harmonic, 0, 0.0);
  const int d = r.cfg.k + 1;
  const Rotation fr = spec.frame.rotation(d);
  const Vec a = fr.apply(basis_vector(d, 0)), b = fr.apply(basis_vector(d, 1));
  Field th(r.grid(), 1);
  for (int j = 0; j < r.grid().size(); ++j) th.at(0, j) = spec.n * r.grid().node(j) + spec.phase;
  GeodesicOptions go;
  go.solver = r.solver();
  DeformationOptions dop;
  dop.dt = r.cfg.dt;
  const double horizon = r.cfg.horizon_or_default();
  const Window w = r.window();
  const PolarState th0(th, a, b);
  const WindingChange wc = change_winding(th0, r.cfg.n1, horizon, w, go, dop);
  SolverConfig sc = go.solver;
  sc.scheme = Scheme::imex_euler;
  SimulateOptions so;
  so.forcing = &wc.control;
  const Trajectory rep = simulate(th0.to_sphere(), horizon, sc, so);
  const GeodesicChart target(r.cfg.n1, a, b, spec.phase);
  const HarmonicCorrection hc =
      correct_to_harmonic(wc.realized.final_state(), target, 0.5, w, {}, sc, horizon);
  Trajectory all = wc.realized;
  all.append(hc.trajectory, 0.0, all.diagnostics.back().flux_cum);
  r.artifacts(all);
  write_snapshot_series(r.dir / "deformation", wc.stage_b.states, wc.stage_b.times,
                        std::max(1, r.cfg.snapshot_every));
  double outside = 0.0;
  const auto& mask = w.mask();
  for (const Field& f : wc.stage_b.induced_force)
    for (int c = 0; c < f.dim(); ++c)
      for (int j = 0; j < f.size(); ++j)
        if (mask[j] == 0.0) outside = std::max(outside, std::abs(f.at(c, j)));
  const double gap = trajectory_distance(rep, wc.trajectory);
  r.summary["n"] = spec.n;
  r.summary["n1"] = r.cfg.n1;
  r.summary["terminal_constructed"] = wc.terminal_error;
  r.summary["terminal_realized"] = wc.realized_terminal_error;
  r.summary["terminal_corrected"] = hc.terminal_error;
  r.summary["replay_vs_constructed"] = gap;
  r.summary["replay_vs_realized"] = trajectory_distance(rep, wc.realized);
  r.summary["induced_force_outside_window"] = outside;
  r.summary["tracking_error"] = wc.tracking_error;
  r.property("terminal_below_1e-8", wc.terminal_error <= 1e-8 && hc.terminal_error <= 1e-8);
  r.property("induced_force_outside_below_1e-9", outside <= 1e-9);
  r.property("replay_within_10dt", gap <= 10.0 * r.cfg.dt);
}

void run_global_kind(Run& r) {
  const SeedSpec spec = r.seed(SeedKind::perturbed_harmonic, 1, 0.2);
  const SphereField u0 = seed_state(spec, r.cfg.k, r.grid());
  PipelineConfig pc;
  pc.solver = r.solver();
  pc.window = r.window();
  const GeodesicChart target = r.cfg.target_chart();
  PipelineResult res;
  try {
    res = run_global(u0, target, pc);
  } catch (const PipelineAborted& e) {
    write_phase_log(r.dir / "phases.txt", e.log());
    throw;
  }
  r.artifacts(res.trajectory);
  write_phase_log(r.dir / "phases.txt", res.log);
  const Trajectory rep = replay_pipeline(u0, res, pc);
  const double gap = trajectory_distance(rep, res.trajectory);
  r.summary["energy_initial"] = energy(u0.field());
  put_chart(r.summary["target"], target);
  r.summary["terminal_h1"] = res.terminal_error;
  r.summary["replay_distance"] = gap;
  r.summary["total_time"] = res.trajectory.final_time();
  r.summary["levels"] = res.log.levels();
  r.summary["phases"] = res.log.records.size();
  for (const PhaseRecord& p : res.log.records)
    if (p.phase == Phase::decay) r.summary["decay_rate"] = p.rate;
  r.property("terminal_below_1e-6", res.terminal_error <= 1e-6);
  r.property("levels_strictly_decreasing", res.log.levels_strictly_decreasing());
  r.property("crossings_exit_below", res.log.crossings_exit_below());
  r.property("replay_within_1e-4", gap <= 1e-4);
}

void run_verify(Run& r, std::ostream& out) {
  std::vector<int> ids = r.cfg.checks;
  if (ids.empty())
    for (const CheckInfo& c : check_catalog()) ids.push_back(c.id);
  const std::vector<CheckResult> res = run_checks(ids, r.cfg.threads);
  json arr = json::array();
  for (const CheckResult& c : res) {
    out << check_line(c) << "\n";
    arr.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    r.pass = r.pass && c.pass;
  }
  r.summary["checks"] = arr;
}

} // namespace

int run_scenario(const ScenarioConfig& cfg, std::ostream& out, std::ostream& err) {
  std::string stage = "validate";
  try {
    cfg.validate();
    Run r{cfg, cfg.output_dir(), json::object()};
    std::filesystem::create_directories(r.dir);
    r.summary["kind"] = kind_name(*cfg.kind);
    r.summary["k"] = cfg.k;
    r.summary["grid"] = cfg.grid;
    r.summary["dt"] = cfg.dt;
    stage = kind_name(*cfg.kind);
    switch (*cfg.kind) {
    case ScenarioKind::simulate: run_simulate(r); break;
    case ScenarioKind::stabilize: run_stabilize(r); break;
    case ScenarioKind::null_control: run_null_control(r); break;
    case ScenarioKind::cross_energy: run_cross_energy(r); break;
    case ScenarioKind::geodesic_steer: run_geodesic_steer(r); break;
    case ScenarioKind::change_winding: run_change_winding(r); break;
    case ScenarioKind::global: run_global_kind(r); break;
    case ScenarioKind::verify: run_verify(r, out); break;
    }
    r.summary["status"] = r.pass ? "pass" : "fail";
    write_text(r.dir / "summary.json", r.summary.dump(2) + "\n");
    out << "result kind=" << kind_name(*cfg.kind) << " status=" << (r.pass ? "pass" : "fail")
        << " output=" << r.dir.string() << "\n";
    return r.pass ? 0 : 3;
  } catch (const PipelineAborted& e) {
    err << error_line(e.kind(), stage + "/" + e.stage(), e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    const bool validation = stage == "validate" || e.kind() == "InvalidArgument" ||
                            e.kind() == "SizeMismatch" || e.kind() == "FormatError" ||
                            e.kind() == "IoError";
    err << error_line(e.kind(), stage, e.what()) << "\n";
    return validation ? 1 : 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << error_line("IoError", stage, e.what()) << "\n";
    return 1;
  }
}

} // namespace hmhf
