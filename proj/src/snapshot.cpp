#include "siv/snapshot.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace siv {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'I', 'V', '2'};
constexpr std::array<char, 4> kSpectralMagic = {'S', 'I', 'V', 'S'};

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw Error("SIV2: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot) {
  if (snapshot.components.empty()) throw Error("SIV2: snapshot has no components");
  const int n = snapshot.components.front().n();
  for (const auto& c : snapshot.components)
    if (c.n() != n) throw Error("SIV2: components differ in grid size");

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("SIV2: cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(n));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(snapshot.components.size()));
  put_le<double>(os, snapshot.time);
  for (const auto& c : snapshot.components)
    for (double v : c.values()) put_le<double>(os, v);
  if (!os) throw Error("SIV2: write failed for " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("SIV2: cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw Error("SIV2: bad magic in " + path.string());
  const auto n = get_le<std::uint32_t>(is);
  const auto count = get_le<std::uint32_t>(is);
  require_grid_size(static_cast<int>(n));
  Snapshot snap;
  snap.time = get_le<double>(is);
  snap.components.reserve(count);
  for (std::uint32_t c = 0; c < count; ++c) {
    PhysicalField field(static_cast<int>(n));
    for (double& v : field.values()) v = get_le<double>(is);
    snap.components.push_back(std::move(field));
  }
  return snap;
}

void write_spectral_record(const std::filesystem::path& path, const SpectralRecord& record) {
  if (record.fields.empty()) throw Error("SIVS: record has no fields");
  const int n = record.fields.front().n();
  for (const auto& f : record.fields)
    if (f.n() != n) throw Error("SIVS: fields differ in grid size");

  // Write to a sibling and rename, so an interrupted run never leaves a
  // half-written checkpoint behind.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("SIVS: cannot open " + tmp.string() + " for writing");
    os.write(kSpectralMagic.data(), kSpectralMagic.size());
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(n));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(record.fields.size()));
    put_le<double>(os, record.time);
    for (const auto& f : record.fields)
      for (const Complex& c : f.data()) {
        put_le<double>(os, c.real());
        put_le<double>(os, c.imag());
      }
    if (!os) throw Error("SIVS: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SpectralRecord read_spectral_record(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("SIVS: cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kSpectralMagic)
    throw Error("SIVS: bad magic in " + path.string());
  const auto n = get_le<std::uint32_t>(is);
  const auto count = get_le<std::uint32_t>(is);
  require_grid_size(static_cast<int>(n));
  SpectralRecord rec;
  rec.time = get_le<double>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    SpectralField f(static_cast<int>(n));
    for (Complex& c : f.data()) {
      const double re = get_le<double>(is);
      const double im = get_le<double>(is);
      c = Complex(re, im);
    }
    rec.fields.push_back(std::move(f));
  }
  return rec;
}

std::filesystem::path snapshot_path(const std::filesystem::path& dir, long step) {
  std::ostringstream name;
  name << "step_" << std::setw(6) << std::setfill('0') << step << ".siv2";
  return dir / name.str();
}

}  // namespace siv
