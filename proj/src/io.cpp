#include "hmhf/io.hpp"

#include "hmhf/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

namespace hmhf {

namespace {

constexpr char kMagic[4] = {'H', 'M', 'H', 'F'};

template <class T> void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T> T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw FormatError("snapshot truncated");
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, mode);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

} // namespace

void write_snapshot(std::ostream& os, const SphereField& u, double time) {
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kSnapshotVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.dim() - 1));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.size()));
  put_le<double>(os, time);
  for (double x : u.field().data()) put_le<double>(os, x);
  if (!os) throw IoError("snapshot write failed");
}

void write_snapshot(const std::filesystem::path& path, const SphereField& u, double time) {
  std::ofstream os = open_out(path, std::ios::binary);
  write_snapshot(os, u, time);
}

Snapshot read_snapshot(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("not a snapshot (bad magic)");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kSnapshotVersion)
    throw FormatError("unsupported snapshot version " + std::to_string(version));
  const auto k = get_le<std::uint32_t>(is);
  const auto size = get_le<std::uint32_t>(is);
  if (k < 1 || size < 4 || size % 2 != 0 || k > 1024 || size > (1u << 24))
    throw FormatError("implausible snapshot header");
  const double time = get_le<double>(is);
  const PeriodicGrid grid(static_cast<int>(size));
  std::vector<double> data(static_cast<std::size_t>(size) * (k + 1));
  for (double& x : data) x = get_le<double>(is);
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after payload");
  return {SphereField(Field(grid, static_cast<int>(k + 1), std::move(data)), 1e-6), time};
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  return read_snapshot(is);
}

std::vector<std::filesystem::path> write_snapshot_series(const std::filesystem::path& dir,
                                                         const std::vector<SphereField>& states,
                                                         const std::vector<double>& times,
                                                         int every) {
  if (states.size() != times.size()) throw SizeMismatch("states and times differ in length");
  if (every < 1) throw InvalidArgument("snapshot cadence must be >= 1");
  std::vector<std::filesystem::path> out;
  char name[32];
  int idx = 0;
  for (std::size_t i = 0; i < states.size(); i += static_cast<std::size_t>(every)) {
    std::snprintf(name, sizeof name, "state_%05d.bin", idx++);
    out.push_back(dir / name);
    write_snapshot(out.back(), states[i], times[i]);
  }
  return out;
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,energy,h1_norm,flux_cum,constraint_residual,control_l2,degree\n";
  for (const DiagnosticRow& r : tr.diagnostics) {
    os << format_number(r.t) << ',' << format_number(r.energy) << ',' << format_number(r.h1_norm)
       << ',' << format_number(r.flux_cum) << ',' << format_number(r.constraint_residual) << ','
       << format_number(r.control_l2) << ',';
    if (r.degree) os << *r.degree;
    os << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr) {
  std::ofstream os = open_out(path, std::ios::out);
  write_trajectory_csv(os, tr);
  if (!os) throw IoError("write failed: " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os = open_out(path, std::ios::out);
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

void write_phase_log(const std::filesystem::path& path, const PhaseLog& log) {
  write_text(path, log.to_text());
}

} // namespace hmhf
