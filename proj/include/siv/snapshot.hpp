#pragma once

#include <filesystem>
#include <vector>

#include "siv/spectral.hpp"

namespace siv {

/// One SIV2 record: a time stamp and any number of same-size real fields.
///
/// On disk: magic "SIV2", u32 n, u32 component count, f64 time, then each
/// component as n*n row-major f64 values. All integers and floats are
/// little-endian.
struct Snapshot {
  double time = 0.0;
  std::vector<PhysicalField> components;
};

void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot);
Snapshot read_snapshot(const std::filesystem::path& path);

/// Exact spectral record used for checkpoints and saved controls: magic
/// "SIVS", u32 n, u32 field count, f64 time, then each field's half
/// spectrum as (re, im) f64 pairs in storage order, little-endian.
struct SpectralRecord {
  double time = 0.0;
  std::vector<SpectralField> fields;
};

void write_spectral_record(const std::filesystem::path& path, const SpectralRecord& record);
SpectralRecord read_spectral_record(const std::filesystem::path& path);

/// Snapshot file name for step index `step` inside a trajectory directory.
std::filesystem::path snapshot_path(const std::filesystem::path& dir, long step);

}  // namespace siv
