#include "doctest.h"

#include "hmhf/checks.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/io.hpp"
#include "hmhf/scenario.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

using namespace hmhf;
namespace fs = std::filesystem;

namespace {

const PeriodicGrid kGrid(64);

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("hmhf_cli_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

ScenarioConfig simulate_config(const fs::path& out) {
  ScenarioConfig c;
  c.load_text("kind=simulate\nn=1\nhorizon=0.02\ngrid=64\nstore_every=10\n");
  c.set("output", out.string());
  return c;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("snapshot round trip is bit exact") {
  const SphereField u = perturb_tangent(harmonic_map(GeodesicChart::standard(3, 2), kGrid), 0.1, 7);
  std::stringstream ss;
  write_snapshot(ss, u, 0.125);
  const Snapshot s = read_snapshot(ss);
  CHECK(s.time == 0.125);
  CHECK(s.state.dim() == 3);
  CHECK(s.state.size() == 64);
  CHECK(s.state.field().data() == u.field().data());

  const std::string bytes = [&] {
    std::stringstream o;
    write_snapshot(o, u, 0.125);
    return o.str();
  }();
  CHECK(bytes.size() == 4 + 4 + 4 + 4 + 8 + 8 * 3 * 64);
  CHECK(bytes.substr(0, 4) == "HMHF");

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream b1(bad);
  CHECK_THROWS_AS(read_snapshot(b1), FormatError);

  std::istringstream b2(bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(read_snapshot(b2), FormatError);

  std::istringstream b3(bytes + "z");
  CHECK_THROWS_AS(read_snapshot(b3), FormatError);

  CHECK_THROWS_AS(read_snapshot(fs::path("/nonexistent/dir/state.bin")), IoError);
}

TEST_CASE("snapshot series and file round trip") {
  TempDir dir("series");
  const SphereField a = harmonic_map(GeodesicChart::standard(3, 1), kGrid);
  const SphereField b = harmonic_map(GeodesicChart::standard(3, 2), kGrid);
  const auto paths = write_snapshot_series(dir.path / "snaps", {a, b, a}, {0.0, 0.5, 1.0}, 2);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0].filename() == "state_00000.bin");
  CHECK(paths[1].filename() == "state_00001.bin");
  const Snapshot last = read_snapshot(paths[1]);
  CHECK(last.time == 1.0);
  CHECK(last.state.field().data() == a.field().data());
}

TEST_CASE("numbers keep 17 significant digits") {
  CHECK(std::stod(format_number(kPi)) == kPi);
  CHECK(std::stod(format_number(0.1)) == 0.1);
  CHECK(format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("config parsing") {
  ScenarioConfig c;
  c.load_text("# comment\nkind = cross_energy\n\nn=3\nhorizon=2pi\nepsilon=pi/2\n"
              "window=0:pi/2;pi:3pi/2\neps-sweep=0.04,0.02\n");
  REQUIRE(c.kind.has_value());
  CHECK(*c.kind == ScenarioKind::cross_energy);
  CHECK(c.state.n == 3);
  CHECK(c.horizon_or_default() == doctest::Approx(2 * kPi).epsilon(1e-15));
  REQUIRE(c.epsilon.has_value());
  CHECK(*c.epsilon == doctest::Approx(kPi / 2).epsilon(1e-15));
  REQUIRE(c.window.size() == 2);
  CHECK(c.window[0].first == 0.0);
  CHECK(c.window[0].second == doctest::Approx(kPi / 2).epsilon(1e-15));
  CHECK(c.window[1].second == doctest::Approx(1.5 * kPi).epsilon(1e-15));
  CHECK(c.eps_sweep == std::vector<double>{0.04, 0.02});
  CHECK(c.given.count("eps_sweep") == 1);
  CHECK(c.given.count("dt") == 0);

  c.set("n", "5");
  CHECK(c.state.n == 5);

  CHECK_THROWS_AS(c.set("no_such_key", "1"), InvalidArgument);
  CHECK_THROWS_AS(c.set("grid", "abc"), InvalidArgument);
  CHECK_THROWS_AS(c.set("kind", "bogus"), InvalidArgument);
  CHECK_THROWS_AS(c.load_text("just words\n"), InvalidArgument);
}

TEST_CASE("per kind defaults and validation") {
  ScenarioConfig c;
  CHECK_THROWS_AS(c.validate(), InvalidArgument); // no kind
  c.set("kind", "stabilize");
  CHECK(c.horizon_or_default() == doctest::Approx(2.0));
  c.set("lambda", "16");
  CHECK(c.horizon_or_default() == doctest::Approx(0.5));
  c.set("kind", "change_winding");
  CHECK(c.horizon_or_default() == doctest::Approx(2.0));
  c.set("kind", "simulate");
  CHECK(c.horizon_or_default() == doctest::Approx(1.0));
  CHECK_NOTHROW(c.validate());
  c.set("grid", "7");
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("output root") {
  ScenarioConfig c;
  c.set("kind", "simulate");
  ::setenv("HMHF_OUTPUT_ROOT", "/tmp/hmhf_root", 1);
  CHECK(c.output_dir() == fs::path("/tmp/hmhf_root/out/simulate"));
  c.set("output", "runs/a");
  CHECK(c.output_dir() == fs::path("/tmp/hmhf_root/runs/a"));
  c.set("output", "/abs/b");
  CHECK(c.output_dir() == fs::path("/abs/b"));
  ::unsetenv("HMHF_OUTPUT_ROOT");
}

TEST_CASE("seeds") {
  SeedSpec s;
  s.kind = SeedKind::harmonic;
  s.n = 2;
  const SphereField h = seed_state(s, 2, kGrid);
  const SphereField phi = harmonic_map(GeodesicChart::standard(3, 2), kGrid);
  CHECK(max_abs(h.field() - phi.field()) == 0.0);

  const SphereField r1 = random_fourier(4 * kPi, 4, 11, 2, kGrid);
  const SphereField r2 = random_fourier(4 * kPi, 4, 11, 2, kGrid);
  CHECK(r1.field().data() == r2.field().data());
  CHECK(energy(r1.field()) == doctest::Approx(4 * kPi).epsilon(0.01));
  CHECK(r1.constraint_residual() < 1e-12);

  const SphereField r3 = random_fourier(4 * kPi, 4, 12, 2, kGrid);
  CHECK(r3.field().data() != r1.field().data());

  CHECK_THROWS_AS(random_fourier(4 * kPi, 40, 11, 2, kGrid), InvalidArgument);
  CHECK_THROWS_AS(random_fourier(1e6, 1, 11, 2, kGrid), EnergyUnreachable);
}

TEST_CASE("simulate writes artifacts deterministically") {
  TempDir dir("sim");
  std::ostringstream out1, err1, out2, err2;
  CHECK(run_scenario(simulate_config(dir.path / "a"), out1, err1) == 0);
  CHECK(run_scenario(simulate_config(dir.path / "b"), out2, err2) == 0);
  CHECK(err1.str().empty());
  CHECK(out1.str().find("result kind=simulate status=pass") != std::string::npos);

  const std::string csv = slurp(dir.path / "a" / "trajectory.csv");
  const auto rows = lines(csv);
  REQUIRE(rows.size() > 2);
  CHECK(rows[0] == "t,energy,h1_norm,flux_cum,constraint_residual,control_l2,degree");
  const double e0 = energy(harmonic_map(GeodesicChart::standard(3, 1), kGrid).field());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cols = split(rows[i], ',');
    REQUIRE(cols.size() == 7);
    CHECK(std::abs(std::stod(cols[1]) - e0) < 1e-8);
  }
  CHECK(std::stod(split(rows.back(), ',')[0]) == doctest::Approx(0.02).epsilon(1e-12));

  CHECK(csv == slurp(dir.path / "b" / "trajectory.csv"));
  CHECK(slurp(dir.path / "a" / "final.bin") == slurp(dir.path / "b" / "final.bin"));
  CHECK(fs::exists(dir.path / "a" / "snapshots" / "state_00000.bin"));

  const std::string summary = slurp(dir.path / "a" / "summary.json");
  CHECK(summary.find("\"status\": \"pass\"") != std::string::npos);
  CHECK(summary.find("\"properties\"") != std::string::npos);

  const Snapshot fin = read_snapshot(dir.path / "a" / "final.bin");
  CHECK(fin.time == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(fin.state.constraint_residual() < 1e-12);
}

TEST_CASE("snapshot seed resumes a saved state") {
  TempDir dir("resume");
  const SphereField u = perturb_tangent(harmonic_map(GeodesicChart::standard(3, 1), kGrid), 0.05, 3);
  write_snapshot(dir.path / "seed.bin", u, 0.0);
  SeedSpec s;
  s.kind = SeedKind::snapshot;
  s.input = dir.path / "seed.bin";
  CHECK(seed_state(s, 2, kGrid).field().data() == u.field().data());
  CHECK_THROWS_AS(seed_state(s, 3, kGrid), SizeMismatch);
}

TEST_CASE("errors map to exit codes") {
  TempDir dir("err");
  ScenarioConfig c = simulate_config(dir.path / "x");
  c.set("grid", "7");
  std::ostringstream out, err;
  CHECK(run_scenario(c, out, err) == 1);
  const auto el = lines(err.str());
  REQUIRE(el.size() == 1);
  CHECK(el[0].rfind("error kind=InvalidArgument stage=", 0) == 0);

  CHECK(error_line("Timeout", "descend", "x") == "error kind=Timeout stage=descend message=x");
}

TEST_CASE("verify runs selected checks") {
  TempDir dir("verify");
  ScenarioConfig c;
  c.load_text("kind=verify\nchecks=1,13\nthreads=1\n");
  c.set("output", (dir.path / "v").string());
  std::ostringstream out, err;
  CHECK(run_scenario(c, out, err) == 0);
  const std::string s = out.str();
  CHECK(s.find("PASS 01 ") != std::string::npos);
  CHECK(s.find("PASS 13 ") != std::string::npos);
  CHECK(s.find("FAIL") == std::string::npos);
  CHECK(check_catalog().size() == 14);
}

}
