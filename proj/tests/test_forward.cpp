#include <doctest.h>

#include <cmath>

#include "siv/forward.hpp"
#include "support.hpp"

using namespace siv;
using siv::testing::random_control;
using siv::testing::taylor_green;

namespace {

SegmentConfig config(int n, double tau, double dt, double nu = 1e-3, double lambda = 2e-3) {
  SegmentConfig c;
  c.n = n;
  c.tau = tau;
  c.dt = dt;
  c.nu = nu;
  c.lambda = lambda;
  return c;
}

// Relative L2 distance of the velocity to the convected Taylor-Green solution.
double convected_tg_error(const FlowState& s, double U, double V, double nu) {
  const double t = s.time;
  const double a = std::exp(-2.0 * nu * t);
  const int n = s.n();
  const auto ex = transform(PhysicalField::sample(n, [&](double x, double y) {
    return U + a * std::sin(x - U * t) * std::cos(y - V * t);
  }));
  const auto ey = transform(PhysicalField::sample(n, [&](double x, double y) {
    return V - a * std::cos(x - U * t) * std::sin(y - V * t);
  }));
  const SpectralField dx = s.ux - ex, dy = s.uy - ey;
  return std::sqrt(inner_product(dx, dx) + inner_product(dy, dy)) /
         std::sqrt(inner_product(ex, ex) + inner_product(ey, ey));
}

}  // namespace

TEST_CASE("segment config validation") {
  CHECK_NOTHROW(config(16, 0.08, 1e-3).validate());
  CHECK(config(16, 0.08, 1e-3).steps() == 80);
  CHECK_THROWS_AS(config(16, 0.0805, 1e-3).validate(), Error);
  CHECK_THROWS_AS(config(16, 0.08, -1e-3).validate(), Error);
  CHECK_THROWS_AS(config(12, 0.08, 1e-3).validate(), Error);
}

TEST_CASE("Crank-Nicolson factors match the closed form") {
  const double kappa = 0.3, dt = 0.01;
  const DiffusionFactors f(16, kappa, dt);
  for (int kx : {0, 1, 5, 8})
    for (int ky : {-8, -3, 0, 2, 7}) {
      const int iky = ((ky % 16) + 16) % 16;
      const double a = 0.5 * kappa * (kx * kx + ky * ky) * dt;
      CHECK(f.amplification(kx, iky) == doctest::Approx((1 - a) / (1 + a)).epsilon(1e-15));
    }
}

TEST_CASE("Taylor-Green kinetic energy decays as exp(-4 nu t)") {
  const SegmentConfig cfg = config(64, 1.0, 1e-3);
  const ControlVector c = ControlVector::from_state(taylor_green(64, 1.0));
  const double e0 = kinetic_energy(c.to_state(0.0));
  CHECK(e0 == doctest::Approx(kPi * kPi).epsilon(1e-13));
  const Trajectory traj = run_forward(c, cfg);
  double worst = 0.0;
  for (const auto& s : traj.states)
    worst = std::max(worst, std::abs(kinetic_energy(s) / (e0 * std::exp(-4e-3 * s.time)) - 1.0));
  CHECK(worst < 1e-4);
}

TEST_CASE("a scalar mode with no flow decays as exp(-lambda k^2 t)") {
  const SegmentConfig cfg = config(32, 0.5, 1e-3);
  ControlVector c = ControlVector::zero(32);
  c.phi = transform(PhysicalField::sample(32, [](double x, double y) { return std::cos(4 * x) + std::sin(3 * y); }));
  const FlowState end = propagate(c, cfg);
  CHECK(end.time == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(end.phi.coeff(4, 0)) == doctest::Approx(0.5 * std::exp(-16 * 2e-3 * 0.5)).epsilon(1e-9));
  CHECK(std::abs(end.phi.coeff(0, 3)) == doctest::Approx(0.5 * std::exp(-9 * 2e-3 * 0.5)).epsilon(1e-9));
}

TEST_CASE("advection by a uniform stream is a pure translation") {
  // A Galilean-shifted Taylor-Green vortex is an exact solution, so the
  // error is the time-stepping error alone and halves quarterly with dt.
  const double U = 1.0, V = 0.5;
  double errors[2];
  for (int r = 0; r < 2; ++r) {
    const double dt = r == 0 ? 2e-3 : 1e-3;
    const SegmentConfig cfg = config(32, 0.5, dt);
    errors[r] = convected_tg_error(propagate(ControlVector::from_state(taylor_green(32, 1.0, U, V)), cfg), U, V,
                                   cfg.nu);
  }
  CHECK(errors[0] < 1e-5);
  CHECK(errors[0] / errors[1] == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("steps keep the velocity solenoidal and dealiased") {
  const SegmentConfig cfg = config(32, 0.05, 1e-3);
  const Trajectory traj = run_forward(random_control(32, 7), cfg);
  for (const auto& s : traj.states) {
    CHECK(max_divergence(s.ux, s.uy) < 1e-10);
    CHECK(max_abs(dealiased(s.phi) - s.phi) == 0.0);
  }
}

TEST_CASE("inviscid dealiased dynamics nearly conserve energy and scalar variance") {
  const SegmentConfig cfg = config(32, 0.1, 1e-3, 0.0, 0.0);
  const Trajectory traj = run_forward(random_control(32, 8), cfg);
  const double e0 = kinetic_energy(traj.front()), e1 = kinetic_energy(traj.back());
  const double s0 = l2_norm(traj.front().phi), s1 = l2_norm(traj.back().phi);
  CHECK(std::abs(e1 - e0) / e0 / cfg.tau < 1e-6);
  CHECK(std::abs(s1 - s0) / s0 / cfg.tau < 1e-6);
}

TEST_CASE("zero control stays zero") {
  const Trajectory traj = run_forward(ControlVector::zero(16), config(16, 0.01, 1e-3));
  for (const auto& s : traj.states) CHECK(max_abs(s.ux) + max_abs(s.uy) + max_abs(s.phi) == 0.0);
}

TEST_CASE("one segment of Taylor-Green and of a heat mode") {
  const SegmentConfig cfg = config(64, 0.08, 1e-3);
  const ControlVector tg = ControlVector::from_state(taylor_green(64, 1.0));
  const double e0 = kinetic_energy(tg.to_state(0.0));
  CHECK(kinetic_energy(propagate(tg, cfg)) / (e0 * std::exp(-4 * cfg.nu * cfg.tau)) == doctest::Approx(1.0).epsilon(1e-6));

  ControlVector heat = ControlVector::zero(64);
  heat.phi = transform(PhysicalField::sample(64, [](double x, double) { return std::sin(4 * x); }));
  const double ratio = l2_norm(propagate(heat, cfg).phi) / l2_norm(heat.phi);
  CHECK(ratio == doctest::Approx(std::exp(-16 * cfg.lambda * cfg.tau)).epsilon(1e-6));

  // One step against the scalar Crank-Nicolson recurrence.
  const StepResult one = step(heat.to_state(0.0), nullptr, cfg);
  const double a = 0.5 * 16 * cfg.lambda * cfg.dt;
  CHECK(std::abs(one.state.phi.coeff(4, 0)) / std::abs(heat.phi.coeff(4, 0)) ==
        doctest::Approx((1 - a) / (1 + a)).epsilon(1e-14));
}

TEST_CASE("the first step is forward Euler, later steps Adams-Bashforth") {
  const SegmentConfig cfg = config(16, 0.002, 1e-3, 0.0, 0.0);
  const FlowState s0 = random_control(16, 9).to_state(0.0);
  const StepResult first = step(s0, nullptr, cfg);
  CHECK(max_abs(first.state.phi - (s0.phi + 1e-3 * first.advection.phi)) < 1e-15);
  const StepResult second = step(first.state, &first.advection, cfg);
  const SpectralField ab = first.state.phi + 1e-3 * (1.5 * second.advection.phi - 0.5 * first.advection.phi);
  CHECK(max_abs(second.state.phi - ab) < 1e-15);
  CHECK(second.cfl > 0.0);
}

TEST_CASE("propagate agrees with the stored trajectory") {
  const SegmentConfig cfg = config(16, 0.01, 1e-3);
  const ControlVector c = random_control(16, 10);
  const Trajectory traj = run_forward(c, cfg);
  CHECK(traj.size() == 11);
  CHECK_NOTHROW(traj.validate());
  const FlowState end = propagate(c, cfg);
  CHECK(max_abs(end.phi - traj.back().phi) == 0.0);
  CHECK(max_abs(end.ux - traj.back().ux) == 0.0);
}

TEST_CASE("blow-up is reported instead of propagated") {
  SegmentConfig cfg = config(16, 20.0, 0.1, 0.0, 0.0);
  CHECK_THROWS_AS(run_forward(random_control(16, 11, 1e3), cfg), Error);
}

TEST_CASE("cost") {
  const SegmentConfig cfg = config(16, 0.01, 1e-3);
  const Trajectory a = run_forward(random_control(16, 12), cfg);
  const Trajectory b = run_forward(random_control(16, 13), cfg);

  SUBCASE("vanishes on identical trajectories") { CHECK(cost(a, a) == 0.0); }
  SUBCASE("is symmetric") { CHECK(cost(a, b) == doctest::Approx(cost(b, a)).epsilon(1e-15)); }
  SUBCASE("constant misfit integrates exactly") {
    Trajectory c = a;
    for (auto& s : c.states) s.phi.at(0, 0) += 0.3;
    CHECK(cost(a, c) == doctest::Approx(0.5 * 0.09 * kDomainArea * 0.01).epsilon(1e-12));
  }
  SUBCASE("matches a physical-space Riemann sum") {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const PhysicalField pa = inverse(a.states[i].phi), pb = inverse(b.states[i].phi);
      double cell = 0.0;
      for (std::size_t j = 0; j < pa.values().size(); ++j) cell += std::pow(pa.values()[j] - pb.values()[j], 2);
      cell *= std::pow(kDomainLength / 16, 2);
      sum += (i == 0 || i + 1 == a.size() ? 0.5 : 1.0) * cell;
    }
    CHECK(cost(a, b) == doctest::Approx(0.5 * sum * cfg.dt).epsilon(1e-12));
    CHECK(cost(a, b) > 0.0);
  }
  SUBCASE("streaming evaluation matches") {
    CHECK(cost_of(ControlVector::from_state(a.front()), cfg, b) == doctest::Approx(cost(a, b)).epsilon(1e-14));
  }
  SUBCASE("length and time mismatches throw") {
    Trajectory short_b = b;
    short_b.states.pop_back();
    CHECK_THROWS_AS(cost(a, short_b), Error);
    Trajectory shifted = b;
    for (auto& s : shifted.states) s.time += 0.5;
    CHECK_THROWS_AS(cost(a, shifted), Error);
  }
}
