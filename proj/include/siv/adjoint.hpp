#pragma once

#include "siv/forward.hpp"

namespace siv {

/// Lagrange multipliers for velocity and scalar. The adjoint pressure is
/// eliminated by projection, like the forward pressure.
struct AdjointState {
  SpectralField ux, uy, phi;
  double time = 0.0;

  static AdjointState zero(int n, double time);
};

/// Backward-time (s = t1 - t) tendencies of the adjoint system, excluding
/// diffusion:
///   velocity: P[ u_j d_j a_i + u_j d_i a_j + phi d_i aphi ]
///   scalar:   u . grad(aphi) + (psi - phi)
struct AdjointTendency {
  SpectralField ux, uy, phi;
};

AdjointTendency adjoint_rhs(const AdjointState& adj, const FlowState& fwd, const SpectralField& psi);

/// Integrates the adjoint system from zero at t1 back to t0 with AB2 (in
/// reversed time) on transport and forcing, CN on diffusion.
AdjointState run_adjoint(const Trajectory& traj, const Trajectory& measurement, const SegmentConfig& cfg);

struct GradientResult {
  Gradient gradient;
  double cost = 0.0;
};

/// dJ/dw0 = (-a_u(t0), -a_phi(t0)) together with J.
GradientResult gradient(const ControlVector& control, const SegmentConfig& cfg, const Trajectory& measurement);

}  // namespace siv
