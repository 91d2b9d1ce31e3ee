#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "siv/keyvalue.hpp"
#include "siv/optimizer.hpp"

namespace siv {

struct ExperimentConfig {
  int n_truth = 128;
  int n_rec = 64;
  double T = 2.0;
  double tau = 0.08;
  double dt = 1e-3;
  /// Desk-scale diffusion: four times the 256/128 values (nu = 1e-3,
  /// lambda = 2e-3) since the dissipation scales go as sqrt(nu) and the
  /// grids are halved. Schmidt number stays 1/2.
  double nu = 4e-3;
  double lambda = 8e-3;
  std::uint64_t seed = 1;
  /// Random initial spectrum |a(k)| ~ k exp(-(k/k0)^2) on k_min <= |k| <= k_max.
  double k0 = 4.0;
  double k_min = 1.0;
  double k_max = 12.0;
  std::vector<double> deltas{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  /// Averaging window for the sweep; defaults to the final quarter of T.
  double window_lo = 1.5;
  double window_hi = 2.0;
  /// Regime split of the slope fits, on psi_diff_sq.
  double slope_split = 1e-4;
  /// Steps between stored velocity samples (epsilon curve, truth snapshots).
  int sample_stride = 10;
  int max_cg_iters = 30;
  double rel_tol = 0.01;

  /// Unknown keys are rejected.
  static ExperimentConfig from_keyvalues(const KeyValues& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  KeyValues to_keyvalues() const;
  void validate() const;

  long total_steps() const;
  int segment_steps() const;
  int segment_count() const;
  SegmentConfig truth_segment() const;
  SegmentConfig reconstruction_segment() const;
  OptimizerConfig optimizer() const;
};

/// Random field with the configured band spectrum and uniform phases. The
/// coefficients depend only on the RNG stream, not on n.
SpectralField band_field(int n, std::uint64_t seed, const ExperimentConfig& cfg);

/// Solenoidal v0 and scalar psi0, each normalised to unit RMS norm,
/// (1/|Omega|) int |v|^2 = 1. The harness norms below are all domain averages.
FlowState initial_truth(const ExperimentConfig& cfg, int n);

/// (v0 + delta xi) / ||v0 + delta xi|| with xi a fresh unit band-spectrum
/// solenoidal field drawn from `xi_seed`. The scalar is left unchanged.
FlowState perturb_velocity(const FlowState& base, double delta, std::uint64_t xi_seed, const ExperimentConfig& cfg);

/// Position of a running truth integration. `prev` holds the advection
/// tendency of the previous step (empty at step 0).
struct TruthCursor {
  long step = 0;
  FlowState state;
  std::optional<Tendency> prev;
};

/// Advances the truth from `cursor` to the end of the horizon at n_truth,
/// calling `visit` on the starting cursor and after every step.
void integrate_truth(const ExperimentConfig& cfg, TruthCursor cursor,
                     const std::function<void(const TruthCursor&)>& visit);

/// Truth data needed by the twin experiment, truncated to n_rec: the scalar
/// at every step and the velocity every sample_stride steps.
struct TruthRecord {
  double dt = 0.0;
  int stride = 1;
  std::vector<SpectralField> psi;
  std::vector<SpectralField> vx, vy;

  double sample_time(std::size_t i) const { return static_cast<double>(i) * stride * dt; }
};

TruthRecord record_truth(const ExperimentConfig& cfg, const FlowState& initial);

/// Splits the recorded scalar into measurement segments of length tau,
/// restricted to the dealiased band of the reconstruction grid.
std::vector<Trajectory> measurement_segments(const ExperimentConfig& cfg, const TruthRecord& truth);

struct TwinResult {
  std::vector<SegmentResult> segments;
  /// epsilon(t) = ||u - v||^2 at the truth sample times.
  std::vector<double> times;
  std::vector<double> epsilon;
  /// Mean epsilon over the samples inside each segment.
  std::vector<double> segment_epsilon;
  /// Reconstructed velocity at the sample times.
  std::vector<SpectralField> ux, uy;
};

TwinResult twin_experiment(const ExperimentConfig& cfg, const TruthRecord& truth,
                           const ReconstructOptions& options = {});

/// Rebuilds the epsilon curve from per-segment optimised controls.
TwinResult evaluate_reconstruction(const ExperimentConfig& cfg, const TruthRecord& truth,
                                   std::vector<SegmentResult> segments);

/// CSV `t,epsilon`.
void write_epsilon_csv(std::ostream& os, const TwinResult& result);

struct StabilityRecord {
  double delta = 0.0;
  double psi_diff_sq = 0.0;
  double u_diff_sq = 0.0;
  double v_diff_sq = 0.0;
  bool failed = false;
  std::string failure;
};

struct SlopeFit {
  std::string regime;
  double slope = 0.0;
  double intercept = 0.0;
  int npoints = 0;
};

/// Least squares of log10(u_diff_sq) against log10(psi_diff_sq), split into
/// "lower" (psi_diff_sq < split) and "upper". Slope and intercept are NaN
/// with fewer than two points; records with zero entries are skipped.
std::vector<SlopeFit> fit_slopes(const std::vector<StabilityRecord>& records, double split);

/// Window averages of the squared differences between two twin experiments.
StabilityRecord compare_experiments(const ExperimentConfig& cfg, const TruthRecord& a, const TwinResult& ra,
                                    const TruthRecord& b, const TwinResult& rb);

struct SweepResult {
  TwinResult baseline;
  std::vector<StabilityRecord> records;
  std::vector<SlopeFit> fits;
};

/// Seed of the perturbation direction for sweep entry `index`.
std::uint64_t perturbation_seed(std::uint64_t seed, std::size_t index);

struct SweepOptions {
  int threads = 1;
  std::function<void(const std::string&)> progress;
  /// Entries finished by an earlier run; consulted before running a delta.
  std::function<std::optional<StabilityRecord>(std::size_t)> cached;
  /// Called (serialised) when an entry finishes.
  std::function<void(std::size_t, const StabilityRecord&)> on_record;
};

/// Baseline twin experiment plus one perturbed twin experiment per delta.
/// Perturbed runs share the worker threads; failures are recorded per
/// delta. The baseline is skipped when every entry is cached.
SweepResult stability_sweep(const ExperimentConfig& cfg, const SweepOptions& options = {});

void write_sweep_csv(std::ostream& os, const std::vector<StabilityRecord>& records);
void write_slopes_csv(std::ostream& os, const std::vector<SlopeFit>& fits);

/// Worker count: hardware concurrency capped by SIV_THREADS when set.
int worker_threads();

/// Stream function of a divergence-free field, u = (d_y Theta, -d_x Theta),
/// with zero mean.
SpectralField stream_function(const SpectralField& ux, const SpectralField& uy);

struct GradientCheckRecord {
  int direction = 0;
  double adjoint = 0.0;
  double finite_difference = 0.0;
  double relative_error = 0.0;
};

/// Directional derivatives of the segment cost: adjoint <grad J, d> against
/// central differences with step `fd_step`, for `count` random unit
/// directions. The measurement comes from the seeded truth; the control is
/// a second, independent draw.
std::vector<GradientCheckRecord> gradient_check(const ExperimentConfig& cfg, const SegmentConfig& seg, int count,
                                                double fd_step = 1e-3);

}  // namespace siv
