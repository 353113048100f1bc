#pragma once

#include "hmhf/sphere_geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hmhf {

enum class ScenarioKind {
  simulate,
  stabilize,
  null_control,
  cross_energy,
  geodesic_steer,
  change_winding,
  global,
  verify
};
const char* kind_name(ScenarioKind k);
ScenarioKind parse_kind(const std::string& s);

enum class SeedKind { harmonic, perturbed_harmonic, random_fourier, family_gamma, snapshot };
const char* seed_name(SeedKind k);

// frame "identity" or "random" (orthogonal matrix drawn from frame_seed)
struct FrameSpec {
  std::string kind = "identity";
  unsigned seed = 1;
  Rotation rotation(int dim) const;
};

struct SeedSpec {
  SeedKind kind = SeedKind::harmonic;
  int n = 1;
  double phase = 0.0;
  FrameSpec frame;
  double amplitude = 0.1;     // H1 size of the perturbation
  double energy_target = 4.0 * kPi;
  int mode_cap = 8;
  unsigned seed = 1;
  Vec s;                      // family parameters, k - 1 of them
  std::filesystem::path input; // snapshot file
};

SphereField seed_state(const SeedSpec& spec, int k, PeriodicGrid grid);

// tangent noise around a base point lifted by stereo_inverse and rescaled
// until the energy matches; EnergyUnreachable when the family cannot reach it
SphereField random_fourier(double energy_target, int mode_cap, unsigned seed, int k,
                           PeriodicGrid grid, const Vec& base = {});

// smooth noise: modes first..modes weighted by 1/(1+m^2), normal draws from seed
Field smooth_noise(PeriodicGrid grid, int dim, unsigned seed, int modes, int first = 0);

// u + tangent noise of the given H1 norm, renormalized
SphereField perturb_tangent(const SphereField& u, double amplitude, unsigned seed, int modes = 4);

struct ScenarioConfig {
  std::optional<ScenarioKind> kind;
  int k = 2;
  int grid = 256;
  double dt = 1e-4;
  std::optional<double> horizon; // per kind default when unset
  std::vector<std::pair<double, double>> window; // empty: [pi/2, 2pi)
  SeedSpec state;
  std::string scheme = "imex_euler";
  int store_every = 100;
  int snapshot_every = 10;       // stored states between snapshots, 0 for none
  double lambda = 4.0;
  std::optional<double> epsilon;
  std::vector<double> eps_sweep{0.02, 0.01, 0.005};
  int n1 = 1;
  int target_n = 2;
  double target_phase = 0.0;
  FrameSpec target_frame;
  std::vector<int> checks;       // verify: empty means all
  int threads = 0;               // verify: 0 means hardware concurrency
  std::filesystem::path output;
  std::set<std::string> given; // keys set explicitly

  // applies one key=value pair; InvalidArgument for unknown keys or bad values
  void set(const std::string& key, const std::string& value);
  void load_text(const std::string& text);
  void load_file(const std::filesystem::path& path);
  void validate() const;

  double horizon_or_default() const;
  // output resolved against HMHF_OUTPUT_ROOT when relative
  std::filesystem::path output_dir() const;
  GeodesicChart target_chart() const;
};

struct KeyInfo {
  const char* key;
  const char* help;
};
const std::vector<KeyInfo>& scenario_keys();

// Runs one scenario: artifacts under output_dir(), headline lines on out,
// a single-line error on err. Exit code 0 pass, 1 validation error,
// 2 stage failure, 3 property failure.
int run_scenario(const ScenarioConfig& config, std::ostream& out, std::ostream& err);

// "error kind=<Kind> stage=<stage> message=<text>" on one line
std::string error_line(const std::string& kind, const std::string& stage,
                       const std::string& message);

} // namespace hmhf
