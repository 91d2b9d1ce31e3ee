#include "siv/adjoint.hpp"

#include <cmath>
#include <optional>

namespace siv {

namespace {

void add_product(PhysicalField& out, const PhysicalField& a, const PhysicalField& b) {
  auto o = out.values();
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += x[i] * y[i];
}

}  // namespace

AdjointState AdjointState::zero(int n, double time) {
  return {SpectralField(n), SpectralField(n), SpectralField(n), time};
}

AdjointTendency adjoint_rhs(const AdjointState& adj, const FlowState& fwd, const SpectralField& psi) {
  if (std::abs(adj.time - fwd.time) > 1e-9)
    throw Error("adjoint_rhs: adjoint time " + std::to_string(adj.time) + " does not match forward time " +
                std::to_string(fwd.time));
  const int n = fwd.n();
  if (adj.phi.n() != n || psi.n() != n) throw Error("adjoint_rhs: grid mismatch");

  const PhysicalField ux = inverse(fwd.ux);
  const PhysicalField uy = inverse(fwd.uy);
  const PhysicalField phi = inverse(fwd.phi);
  const PhysicalField dax_dx = inverse(derivative(adj.ux, Axis::X));
  const PhysicalField dax_dy = inverse(derivative(adj.ux, Axis::Y));
  const PhysicalField day_dx = inverse(derivative(adj.uy, Axis::X));
  const PhysicalField day_dy = inverse(derivative(adj.uy, Axis::Y));
  const PhysicalField dap_dx = inverse(derivative(adj.phi, Axis::X));
  const PhysicalField dap_dy = inverse(derivative(adj.phi, Axis::Y));

  PhysicalField gx(n), gy(n), gp(n);
  // u_j d_j a_x + u_j d_x a_j + phi d_x aphi
  add_product(gx, ux, dax_dx);
  add_product(gx, uy, dax_dy);
  add_product(gx, ux, dax_dx);
  add_product(gx, uy, day_dx);
  add_product(gx, phi, dap_dx);
  // u_j d_j a_y + u_j d_y a_j + phi d_y aphi
  add_product(gy, ux, day_dx);
  add_product(gy, uy, day_dy);
  add_product(gy, ux, dax_dy);
  add_product(gy, uy, day_dy);
  add_product(gy, phi, dap_dy);
  add_product(gp, ux, dap_dx);
  add_product(gp, uy, dap_dy);

  AdjointTendency t{transform(gx), transform(gy), transform(gp)};
  dealias(t.ux);
  dealias(t.uy);
  dealias(t.phi);
  leray_project_inplace(t.ux, t.uy);
  t.phi += psi;
  t.phi -= fwd.phi;
  return t;
}

AdjointState run_adjoint(const Trajectory& traj, const Trajectory& measurement, const SegmentConfig& cfg) {
  cfg.validate();
  const int steps = cfg.steps();
  if (traj.size() != static_cast<std::size_t>(steps) + 1 || measurement.size() != traj.size())
    throw Error("run_adjoint: trajectory length does not match the segment");
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (std::abs(traj.states[i].time - measurement.states[i].time) > 1e-9)
      throw Error("run_adjoint: forward and measurement time grids differ at index " + std::to_string(i));

  const int n = cfg.n;
  const double ds = cfg.dt;
  const DiffusionFactors visc(n, cfg.nu, ds);
  const DiffusionFactors diff(n, cfg.lambda, ds);

  AdjointState adj = AdjointState::zero(n, traj.back().time);
  std::optional<AdjointTendency> prev;
  for (int k = steps; k >= 1; --k) {
    const auto& fwd = traj.states[static_cast<std::size_t>(k)];
    AdjointTendency now = adjoint_rhs(adj, fwd, measurement.states[static_cast<std::size_t>(k)].phi);
    AdjointTendency ab = now;
    if (prev) {
      ab.ux *= 1.5;
      ab.uy *= 1.5;
      ab.phi *= 1.5;
      ab.ux.axpy(-0.5, prev->ux);
      ab.uy.axpy(-0.5, prev->uy);
      ab.phi.axpy(-0.5, prev->phi);
    }
    visc.apply(adj.ux, ab.ux, ds);
    visc.apply(adj.uy, ab.uy, ds);
    diff.apply(adj.phi, ab.phi, ds);
    dealias(adj.ux);
    dealias(adj.uy);
    dealias(adj.phi);
    leray_project_inplace(adj.ux, adj.uy);
    adj.time = traj.states[static_cast<std::size_t>(k - 1)].time;
    if (!adj.ux.is_finite() || !adj.uy.is_finite() || !adj.phi.is_finite())
      throw Error("adjoint solve produced non-finite values at t=" + std::to_string(adj.time));
    prev = std::move(now);
  }
  return adj;
}

GradientResult gradient(const ControlVector& control, const SegmentConfig& cfg, const Trajectory& measurement) {
  const Trajectory traj = run_forward(control, cfg);
  GradientResult out;
  out.cost = cost(traj, measurement);
  const AdjointState adj0 = run_adjoint(traj, measurement, cfg);
  out.gradient = ControlVector{-1.0 * adj0.ux, -1.0 * adj0.uy, -1.0 * adj0.phi};
  out.gradient.project();
  return out;
}

}  // namespace siv
