#pragma once

#include "hmhf/flow_solver.hpp"
#include "hmhf/global_pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hmhf {

// Binary state file: "HMHF", u32 version, u32 k, u32 grid size, f64 time,
// then grid * (k + 1) little-endian f64, component-major.
constexpr std::uint32_t kSnapshotVersion = 1;

struct Snapshot {
  SphereField state;
  double time = 0.0;
};

void write_snapshot(std::ostream& os, const SphereField& u, double time);
void write_snapshot(const std::filesystem::path& path, const SphereField& u, double time);
Snapshot read_snapshot(std::istream& is);
Snapshot read_snapshot(const std::filesystem::path& path);

// state_00000.bin, state_00001.bin, ... in dir; returns the paths written
std::vector<std::filesystem::path> write_snapshot_series(const std::filesystem::path& dir,
                                                         const std::vector<SphereField>& states,
                                                         const std::vector<double>& times,
                                                         int every = 1);

// columns t, energy, h1_norm, flux_cum, constraint_residual, control_l2, degree
// (blank when not tracked), 17 significant digits
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr);
std::string format_number(double x);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_phase_log(const std::filesystem::path& path, const PhaseLog& log);

} // namespace hmhf
