#pragma once

#include <filesystem>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "siv/harness.hpp"
#include "siv/local_recovery.hpp"

namespace siv {

/// Run directory layout:
///   config                       experiment config (key=value)
///   truth/step_NNNNNN.siv2       ux, uy, phi on n_truth every sample_stride steps
///   measurement/step_NNNNNN.siv2 phi truncated to n_rec at every step
///   checkpoint.sivs              truth restart point while generation runs
///   reconstruction/segment_NNNN  optimised controls and their logs
/// The truth and measurement manifests are written last and mark a finished run.
namespace run_layout {
inline std::filesystem::path config(const std::filesystem::path& run) { return run / "config"; }
inline std::filesystem::path truth(const std::filesystem::path& run) { return run / "truth"; }
inline std::filesystem::path measurement(const std::filesystem::path& run) { return run / "measurement"; }
inline std::filesystem::path checkpoint(const std::filesystem::path& run) { return run / "checkpoint.sivs"; }
inline std::filesystem::path reconstruction(const std::filesystem::path& run) { return run / "reconstruction"; }
}  // namespace run_layout

using Progress = std::function<void(const std::string&)>;

void save_cursor(const std::filesystem::path& path, const TruthCursor& cursor);
TruthCursor load_cursor(const std::filesystem::path& path, double dt);

/// Config keys that change the truth run. Everything else may differ
/// between generation and reconstruction.
bool same_truth(const ExperimentConfig& a, const ExperimentConfig& b);

/// Integrates the truth and writes the run directory. With `resume`, picks
/// up from the checkpoint of an interrupted run with the same config; a
/// finished run is left alone. Returns false when nothing had to be done.
bool generate_truth(const ExperimentConfig& cfg, const std::filesystem::path& run, bool resume,
                    const Progress& progress = {});

/// Config and truth record of a finished run directory.
ExperimentConfig load_run_config(const std::filesystem::path& run);
TruthRecord load_truth(const std::filesystem::path& run, const ExperimentConfig& cfg);

void save_segment_result(const std::filesystem::path& dir, std::size_t index, const SegmentResult& result);
std::optional<SegmentResult> load_segment_result(const std::filesystem::path& dir, std::size_t index);

/// Twin experiment on a run directory. Every finished segment is saved; with
/// `resume` the leading saved segments are reused and the optimisation
/// continues from the propagated endpoint of the last one.
TwinResult reconstruct_run(const ExperimentConfig& cfg, const std::filesystem::path& run, bool resume,
                           const Progress& progress = {});

void save_stability_record(const std::filesystem::path& path, const StabilityRecord& record);
std::optional<StabilityRecord> load_stability_record(const std::filesystem::path& path);

struct LocalRecoverOptions {
  /// Centre of the scalar window; snapped to a stored truth sample. NaN
  /// selects the sample nearest T / 2.
  double time = NAN;
  double x_sigma = -kPi / 2;
  /// Apex row; NaN picks the row of largest |d_y psi| on the line.
  double y0 = NAN;
  double max_width = kPi / 2;
  /// Snapshots on each side of the centre (spacing dt).
  int half_window = 2;
  std::vector<double> deltas{1e-4, 1e-3, 1e-2};
};

struct LocalRecoverResult {
  ConeRegion cone;
  double time = 0.0;
  double epsilon_floor = 0.0;
  int flagged = 0;
  std::vector<double> x, y, theta, ux, uy, ux_true, uy_true;
  std::vector<unsigned char> valid;
  /// L2(cone) norms of u - v and of v over the valid points.
  double l2_error = 0.0;
  double l2_true = 0.0;
  std::vector<ProbeReport> probes;
};

/// Local stream-function recovery on a stored truth: the line data come from
/// the truth velocity, the scalar from the measurement. The probes perturb
/// the scalar window by delta cos(2x + y).
LocalRecoverResult local_recover(const ExperimentConfig& cfg, const TruthRecord& truth,
                                 const LocalRecoverOptions& options);

/// CSV `x,y,theta,ux,uy,ux_true,uy_true,valid`.
void write_recovery_csv(std::ostream& os, const LocalRecoverResult& result);
KeyValues recovery_manifest(const LocalRecoverResult& result);

}  // namespace siv
