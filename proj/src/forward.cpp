#include "siv/forward.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "siv/keyvalue.hpp"
#include "siv/log.hpp"
#include "siv/snapshot.hpp"

namespace siv {

namespace {

std::atomic<bool> g_cfl_warned{false};

void require_same_n(int a, int b, const char* what) {
  if (a != b) throw Error(std::string(what) + ": grid mismatch " + std::to_string(a) + " vs " + std::to_string(b));
}

StepResult step_with(const FlowState& state, const Tendency* prev, const SegmentConfig& cfg,
                     const DiffusionFactors& visc, const DiffusionFactors& diff) {
  double max_speed = 0.0;
  StepResult out{FlowState{}, advection_tendency(state, &max_speed), 0.0};
  out.cfl = max_speed * cfg.dt * state.n() / kDomainLength;
  if (out.cfl > 0.5 && !g_cfl_warned.exchange(true)) {
    std::ostringstream msg;
    msg << "CFL number " << out.cfl << " exceeds 0.5 at t=" << state.time;
    log::warn(msg.str());
  }

  const Tendency& now = out.advection;
  Tendency ab = now;
  if (prev != nullptr) {
    ab.ux *= 1.5;
    ab.uy *= 1.5;
    ab.phi *= 1.5;
    ab.ux.axpy(-0.5, prev->ux);
    ab.uy.axpy(-0.5, prev->uy);
    ab.phi.axpy(-0.5, prev->phi);
  }

  FlowState& next = out.state;
  next.ux = state.ux;
  next.uy = state.uy;
  next.phi = state.phi;
  visc.apply(next.ux, ab.ux, cfg.dt);
  visc.apply(next.uy, ab.uy, cfg.dt);
  diff.apply(next.phi, ab.phi, cfg.dt);
  dealias(next.ux);
  dealias(next.uy);
  dealias(next.phi);
  leray_project_inplace(next.ux, next.uy);
  next.time = state.time + cfg.dt;
  return out;
}

// Multiplies two physical fields pointwise and accumulates: out += s * a * b.
void accumulate_product(PhysicalField& out, double s, const PhysicalField& a, const PhysicalField& b) {
  auto o = out.values();
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += s * x[i] * y[i];
}

}  // namespace

int SegmentConfig::steps() const {
  const double ratio = tau / dt;
  const long k = std::lround(ratio);
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * std::max(1.0, ratio))
    throw Error("tau/dt must be a positive integer (tau=" + format_double(tau) + ", dt=" + format_double(dt) + ")");
  return static_cast<int>(k);
}

void SegmentConfig::validate() const {
  require_grid_size(n);
  if (!(dt > 0.0)) throw Error("dt must be positive");
  if (!(nu >= 0.0) || !(lambda >= 0.0)) throw Error("nu and lambda must be nonnegative");
  (void)steps();
}

FlowState FlowState::zero(int n, double time) {
  return {SpectralField(n), SpectralField(n), SpectralField(n), time};
}

ControlVector ControlVector::zero(int n) { return {SpectralField(n), SpectralField(n), SpectralField(n)}; }

ControlVector& ControlVector::operator+=(const ControlVector& o) {
  ux += o.ux;
  uy += o.uy;
  phi += o.phi;
  return *this;
}

ControlVector& ControlVector::operator-=(const ControlVector& o) {
  ux -= o.ux;
  uy -= o.uy;
  phi -= o.phi;
  return *this;
}

ControlVector& ControlVector::operator*=(double s) {
  ux *= s;
  uy *= s;
  phi *= s;
  return *this;
}

ControlVector& ControlVector::axpy(double s, const ControlVector& o) {
  ux.axpy(s, o.ux);
  uy.axpy(s, o.uy);
  phi.axpy(s, o.phi);
  return *this;
}

void ControlVector::project() {
  dealias(ux);
  dealias(uy);
  dealias(phi);
  leray_project_inplace(ux, uy);
}

double dot(const ControlVector& a, const ControlVector& b) {
  return inner_product(a.ux, b.ux) + inner_product(a.uy, b.uy) + inner_product(a.phi, b.phi);
}

double norm(const ControlVector& a) { return std::sqrt(dot(a, a)); }

Tendency advection_tendency(const FlowState& s, double* max_speed) {
  const PhysicalField ux = inverse(s.ux);
  const PhysicalField uy = inverse(s.uy);
  const PhysicalField dux_dx = inverse(derivative(s.ux, Axis::X));
  const PhysicalField dux_dy = inverse(derivative(s.ux, Axis::Y));
  const PhysicalField duy_dx = inverse(derivative(s.uy, Axis::X));
  const PhysicalField duy_dy = inverse(derivative(s.uy, Axis::Y));
  const PhysicalField dphi_dx = inverse(derivative(s.phi, Axis::X));
  const PhysicalField dphi_dy = inverse(derivative(s.phi, Axis::Y));

  const int n = s.n();
  PhysicalField nx(n), ny(n), nphi(n);
  accumulate_product(nx, -1.0, ux, dux_dx);
  accumulate_product(nx, -1.0, uy, dux_dy);
  accumulate_product(ny, -1.0, ux, duy_dx);
  accumulate_product(ny, -1.0, uy, duy_dy);
  accumulate_product(nphi, -1.0, ux, dphi_dx);
  accumulate_product(nphi, -1.0, uy, dphi_dy);

  if (max_speed != nullptr) {
    double m2 = 0.0;
    auto a = ux.values();
    auto b = uy.values();
    for (std::size_t i = 0; i < a.size(); ++i) m2 = std::max(m2, a[i] * a[i] + b[i] * b[i]);
    *max_speed = std::sqrt(m2);
  }

  Tendency t{transform(nx), transform(ny), transform(nphi)};
  dealias(t.ux);
  dealias(t.uy);
  dealias(t.phi);
  leray_project_inplace(t.ux, t.uy);
  return t;
}

DiffusionFactors::DiffusionFactors(int n, double kappa, double dt) : n_(n) {
  const int nkx = n / 2 + 1;
  explicit_.resize(static_cast<std::size_t>(n) * nkx);
  implicit_.resize(explicit_.size());
  for (int iky = 0; iky < n; ++iky) {
    const double ky = iky < n / 2 ? iky : iky - n;
    for (int ikx = 0; ikx < nkx; ++ikx) {
      const double half = 0.5 * kappa * (ikx * ikx + ky * ky) * dt;
      explicit_[index(ikx, iky)] = 1.0 - half;
      implicit_[index(ikx, iky)] = 1.0 / (1.0 + half);
    }
  }
}

void DiffusionFactors::apply(SpectralField& field, const SpectralField& forcing, double dt) const {
  auto u = field.data();
  auto f = forcing.data();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = implicit_[i] * (explicit_[i] * u[i] + dt * f[i]);
}

StepResult step(const FlowState& state, const Tendency* prev, const SegmentConfig& cfg) {
  const DiffusionFactors visc(state.n(), cfg.nu, cfg.dt);
  const DiffusionFactors diff(state.n(), cfg.lambda, cfg.dt);
  return step_with(state, prev, cfg, visc, diff);
}

void Trajectory::validate() const {
  for (std::size_t i = 1; i < states.size(); ++i)
    if (std::abs(states[i].time - states[i - 1].time - dt) > 1e-12)
      throw Error("trajectory: irregular time stamps at index " + std::to_string(i));
}

namespace {

template <class Visit>
void integrate(const ControlVector& control, const SegmentConfig& cfg, Visit&& visit) {
  cfg.validate();
  require_same_n(control.n(), cfg.n, "run_forward");
  const int steps = cfg.steps();
  const DiffusionFactors visc(cfg.n, cfg.nu, cfg.dt);
  const DiffusionFactors diff(cfg.n, cfg.lambda, cfg.dt);

  FlowState state = control.to_state(cfg.t0);
  visit(0, state);
  std::optional<Tendency> prev;
  for (int k = 1; k <= steps; ++k) {
    StepResult r = step_with(state, prev ? &*prev : nullptr, cfg, visc, diff);
    r.state.time = cfg.t0 + k * cfg.dt;
    if (!r.state.phi.is_finite() || !r.state.ux.is_finite() || !r.state.uy.is_finite()) {
      std::ostringstream msg;
      msg << "forward solve produced non-finite values at step " << k << " (t=" << r.state.time
          << ", CFL=" << r.cfl << ")";
      throw Error(msg.str());
    }
    prev = std::move(r.advection);
    state = std::move(r.state);
    visit(k, state);
  }
}

}  // namespace

Trajectory run_forward(const ControlVector& control, const SegmentConfig& cfg) {
  Trajectory traj;
  traj.dt = cfg.dt;
  traj.states.reserve(static_cast<std::size_t>(cfg.steps()) + 1);
  integrate(control, cfg, [&](int, const FlowState& s) { traj.states.push_back(s); });
  return traj;
}

FlowState propagate(const ControlVector& control, const SegmentConfig& cfg) {
  FlowState last;
  integrate(control, cfg, [&](int, const FlowState& s) { last = s; });
  return last;
}

namespace {

void require_matching(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw Error("cost: trajectories differ in length");
  if (a.size() < 2) throw Error("cost: need at least two time levels");
  if (std::abs(a.dt - b.dt) > 1e-15) throw Error("cost: trajectories differ in dt");
  for (std::size_t i = 0; i < a.size(); ++i) {
    require_same_n(a.states[i].n(), b.states[i].n(), "cost");
    if (std::abs(a.states[i].time - b.states[i].time) > 1e-9)
      throw Error("cost: time grids differ at index " + std::to_string(i));
  }
}

double misfit(const SpectralField& phi, const SpectralField& psi) {
  const SpectralField d = phi - psi;
  return inner_product(d, d);
}

}  // namespace

double cost(const Trajectory& traj, const Trajectory& measurement) {
  require_matching(traj, measurement);
  double sum = 0.0;
  const std::size_t last = traj.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const double w = (i == 0 || i == last) ? 0.5 : 1.0;
    sum += w * misfit(traj.states[i].phi, measurement.states[i].phi);
  }
  return 0.5 * sum * traj.dt;
}

double cost_of(const ControlVector& control, const SegmentConfig& cfg, const Trajectory& measurement) {
  const int steps = cfg.steps();
  if (measurement.size() != static_cast<std::size_t>(steps) + 1)
    throw Error("cost: measurement does not cover the segment");
  double sum = 0.0;
  integrate(control, cfg, [&](int k, const FlowState& s) {
    const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
    sum += w * misfit(s.phi, measurement.states[static_cast<std::size_t>(k)].phi);
  });
  return 0.5 * sum * cfg.dt;
}

double kinetic_energy(const FlowState& s) {
  return 0.5 * (inner_product(s.ux, s.ux) + inner_product(s.uy, s.uy));
}

double max_divergence(const SpectralField& ux, const SpectralField& uy) {
  return max_abs(divergence(ux, uy));
}

void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj, const SegmentConfig& cfg) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const FlowState& s = traj.states[i];
    write_snapshot(snapshot_path(dir, static_cast<long>(i)),
                   Snapshot{s.time, {inverse(s.ux), inverse(s.uy), inverse(s.phi)}});
  }
  KeyValues manifest;
  manifest.set("n", cfg.n);
  manifest.set("dt", cfg.dt);
  manifest.set("t0", cfg.t0);
  manifest.set("tau", cfg.tau);
  manifest.set("nu", cfg.nu);
  manifest.set("lambda", cfg.lambda);
  manifest.set("count", static_cast<long>(traj.size()));
  manifest.save(dir / "manifest");
}

Trajectory load_trajectory(const std::filesystem::path& dir, SegmentConfig* cfg) {
  const KeyValues manifest = KeyValues::load(dir / "manifest");
  const long count = manifest.get_int("count");
  Trajectory traj;
  traj.dt = manifest.get_double("dt");
  for (long i = 0; i < count; ++i) {
    const Snapshot snap = read_snapshot(snapshot_path(dir, i));
    if (snap.components.size() != 3) throw Error("trajectory snapshot must have 3 components");
    traj.states.push_back({transform(snap.components[0]), transform(snap.components[1]),
                           transform(snap.components[2]), snap.time});
  }
  if (cfg != nullptr) {
    cfg->n = static_cast<int>(manifest.get_int("n"));
    cfg->dt = traj.dt;
    cfg->t0 = manifest.get_double("t0");
    cfg->tau = manifest.get_double("tau");
    cfg->nu = manifest.get_double("nu");
    cfg->lambda = manifest.get_double("lambda");
  }
  traj.validate();
  return traj;
}

}  // namespace siv
