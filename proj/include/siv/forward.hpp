#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "siv/spectral.hpp"

namespace siv {

/// One optimisation segment [t0, t0 + tau] and the physics it is solved with.
struct SegmentConfig {
  double t0 = 0.0;
  double tau = 0.08;
  double dt = 1e-3;
  double nu = 1e-3;
  double lambda = 2e-3;
  int n = 64;

  /// tau / dt, validated to be a positive integer.
  int steps() const;
  void validate() const;
};

/// Velocity (divergence free) and scalar at one instant. Pressure is not
/// carried: it is eliminated by the Leray projection.
struct FlowState {
  SpectralField ux, uy, phi;
  double time = 0.0;

  static FlowState zero(int n, double time = 0.0);
  int n() const { return phi.n(); }
};

/// An element of control space: the segment initial condition (u0, phi0).
/// Gradients and CG search directions live in the same space.
struct ControlVector {
  SpectralField ux, uy, phi;

  static ControlVector zero(int n);
  static ControlVector from_state(const FlowState& s) { return {s.ux, s.uy, s.phi}; }
  FlowState to_state(double time) const { return {ux, uy, phi, time}; }
  int n() const { return phi.n(); }

  ControlVector& operator+=(const ControlVector& o);
  ControlVector& operator-=(const ControlVector& o);
  ControlVector& operator*=(double s);
  ControlVector& axpy(double s, const ControlVector& o);
  friend ControlVector operator+(ControlVector a, const ControlVector& b) { return a += b; }
  friend ControlVector operator-(ControlVector a, const ControlVector& b) { return a -= b; }
  friend ControlVector operator*(double s, ControlVector a) { return a *= s; }
  ControlVector operator-() const { return -1.0 * (*this); }

  /// Re-imposes the divergence-free and dealiased invariants.
  void project();
};

using Gradient = ControlVector;

/// Sum of the L2(Omega) inner products of the three components.
double dot(const ControlVector& a, const ControlVector& b);
double norm(const ControlVector& a);

/// Advection tendencies -P[(u.grad)u] and -u.grad(phi), dealiased.
struct Tendency {
  SpectralField ux, uy, phi;
};

/// Evaluates the advection tendencies of `state`. When max_speed is non-null
/// it receives max |u| over the grid.
Tendency advection_tendency(const FlowState& state, double* max_speed = nullptr);

struct StepResult {
  FlowState state;
  /// Tendency evaluated at the input state; feed it back as `prev` next step.
  Tendency advection;
  /// max|u| dt n / (2 pi) at the input state.
  double cfl = 0.0;
};

/// Per-mode Crank-Nicolson factors for one diffusivity.
class DiffusionFactors {
 public:
  DiffusionFactors() = default;
  DiffusionFactors(int n, double kappa, double dt);
  /// (1 - kappa k^2 dt / 2) / (1 + kappa k^2 dt / 2)
  double amplification(int ikx, int iky) const { return explicit_[index(ikx, iky)] * implicit_[index(ikx, iky)]; }
  /// u_new = implicit * (explicit * u + dt * forcing)
  void apply(SpectralField& field, const SpectralField& forcing, double dt) const;

 private:
  std::size_t index(int ikx, int iky) const { return static_cast<std::size_t>(iky) * (n_ / 2 + 1) + ikx; }
  int n_ = 0;
  std::vector<double> explicit_, implicit_;
};

/// AB2 on advection, CN on diffusion. Without `prev` the advective part is a
/// forward-Euler step. Emits a warning when the CFL number exceeds 0.5.
StepResult step(const FlowState& state, const Tendency* prev, const SegmentConfig& cfg);

/// Time-ordered states at spacing dt.
struct Trajectory {
  double dt = 0.0;
  std::vector<FlowState> states;

  std::size_t size() const { return states.size(); }
  const FlowState& front() const { return states.front(); }
  const FlowState& back() const { return states.back(); }
  /// Throws unless consecutive stamps differ by dt to 1e-12.
  void validate() const;
};

/// Integrates the coupled Navier-Stokes + scalar system over the segment.
Trajectory run_forward(const ControlVector& control, const SegmentConfig& cfg);
/// Same integration, returning only the final state.
FlowState propagate(const ControlVector& control, const SegmentConfig& cfg);

/// J = 1/2 int ||phi - psi||^2 dt, trapezoidal in time.
double cost(const Trajectory& traj, const Trajectory& measurement);
/// Cost of a forward run from `control` without storing the trajectory.
double cost_of(const ControlVector& control, const SegmentConfig& cfg, const Trajectory& measurement);

double kinetic_energy(const FlowState& s);
/// Spectral max-norm of div u.
double max_divergence(const SpectralField& ux, const SpectralField& uy);

/// Trajectory directory: one SIV2 snapshot per step (ux, uy, phi) plus a
/// `manifest` with n, dt, t0, tau, nu, lambda, count.
void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj, const SegmentConfig& cfg);
Trajectory load_trajectory(const std::filesystem::path& dir, SegmentConfig* cfg = nullptr);

}  // namespace siv
