#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "siv/local_recovery.hpp"
#include "support.hpp"

using namespace siv;
using siv::testing::random_field;

namespace {

ScalarWindow window_from(int n, int count, double dt, double t_center,
                         const std::function<double(double, double, double)>& psi) {
  ScalarWindow w;
  w.dt = dt;
  w.time = t_center;
  const int half = count / 2;
  for (int k = -half; k <= half; ++k) {
    const double t = t_center + k * dt;
    w.snapshots.push_back(transform(PhysicalField::sample(n, [&](double x, double y) { return psi(x, y, t); })));
  }
  return w;
}

// Transport problem with prescribed beta, f and line data g; d_y psi = 1.
TransportProblem manual_problem(int n, double line_x, const std::function<double(double, double)>& beta,
                                const std::function<double(double, double)>& f,
                                const std::function<double(double)>& g) {
  TransportProblem p;
  p.beta = PhysicalField::sample(n, beta);
  p.f = PhysicalField::sample(n, f);
  p.dpsi_dy = PhysicalField::sample(n, [](double, double) { return 1.0; });
  p.epsilon_floor = 0.5;
  p.line_ix = static_cast<int>(std::lround((line_x + kPi) / (kDomainLength / n)));
  p.line_x = PhysicalField::node(p.line_ix, n);
  for (int iy = 0; iy < n; ++iy) p.boundary_theta.push_back(g(PhysicalField::node(iy, n)));
  return p;
}

double max_theta_error(const TransportSolution& s, const std::function<double(double, double)>& exact) {
  double m = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    if (s.flagged[i]) continue;
    const auto& p = s.grid.points()[i];
    m = std::max(m, std::abs(s.theta[i] - exact(s.grid.x(p), s.grid.y(p))));
  }
  return m;
}

// Periodic spectral differentiation matrices (even n, h = 2 pi / n),
// applied directly in physical space.
double d1_entry(int j, int n) {
  if (j % n == 0) return 0.0;
  const double h = kDomainLength / n;
  return 0.5 * ((j % 2) ? -1.0 : 1.0) / std::tan(0.5 * j * h);
}
double d2_entry(int j, int n) {
  const double h = kDomainLength / n;
  if (j % n == 0) return -kPi * kPi / (3 * h * h) - 1.0 / 6.0;
  const double s = std::sin(0.5 * j * h);
  return -((j % 2) ? -1.0 : 1.0) / (2 * s * s);
}
PhysicalField apply_matrix(const PhysicalField& f, Axis axis, double (*entry)(int, int)) {
  const int n = f.n();
  PhysicalField out(n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      double sum = 0.0;
      for (int m = 0; m < n; ++m)
        sum += axis == Axis::X ? entry(ix - m, n) * f.at(m, iy) : entry(iy - m, n) * f.at(ix, m);
      out.at(ix, iy) = sum;
    }
  return out;
}

}  // namespace

TEST_CASE("window time derivatives are exact on low-degree polynomials") {
  const int n = 8;
  const SpectralField a = random_field(n, 1), b = random_field(n, 2), c = random_field(n, 3);
  const SpectralField d = random_field(n, 4), e = random_field(n, 5);
  const double dt = 0.1, tc = 0.3;
  ScalarWindow w;
  w.dt = dt;
  w.time = tc;
  for (int k = -2; k <= 2; ++k) {
    const double s = k * dt;  // time relative to the centre
    w.snapshots.push_back(a + s * b + (s * s) * c + (s * s * s) * d + (s * s * s * s) * e);
  }
  CHECK(max_abs(w.time_derivative(0) - a) < 1e-14);
  // Central differences annihilate the odd/even terms they cannot see.
  CHECK(max_abs(w.time_derivative(1) - (b + (dt * dt) * d)) < 1e-12);
  CHECK(max_abs(w.time_derivative(2) - (2.0 * c + (2 * dt * dt) * e)) < 1e-10);
  CHECK(max_abs(w.time_derivative(3) - 6.0 * d) < 1e-9);
  CHECK(max_abs(w.time_derivative(4) - 24.0 * e) < 1e-7);
  CHECK(w.max_time_order() == 4);

  ScalarWindow three = w;
  three.snapshots = {w.snapshots[1], w.snapshots[2], w.snapshots[3]};
  CHECK(three.max_time_order() == 2);
  CHECK(max_abs(three.time_derivative() - w.time_derivative(1)) == 0.0);
  CHECK_THROWS_AS(three.time_derivative(3), Error);

  ScalarWindow even = three;
  even.snapshots.pop_back();
  CHECK_THROWS_AS(even.validate(), Error);
}

TEST_CASE("perp velocity") {
  SUBCASE("travelling front gives the front speed") {
    const double c = 0.7, dt = 1e-3;
    const auto w = window_from(32, 3, dt, 0.2, [&](double x, double, double t) { return std::sin(x - c * t); });
    const PerpVelocity u = perp_velocity(w, 0.0, 0.2);
    CHECK(u.masked > 0);
    double worst = 0.0;
    for (int iy = 0; iy < 32; ++iy)
      for (int ix = 0; ix < 32; ++ix) {
        if (!u.valid[iy * 32 + ix]) continue;
        worst = std::max({worst, std::abs(u.ux.at(ix, iy) - c), std::abs(u.uy.at(ix, iy))});
      }
    CHECK(worst < c * (c * dt) * (c * dt));
  }
  SUBCASE("steady scalar without diffusion gives zero") {
    const auto w = window_from(16, 3, 1e-2, 0.0, [](double x, double y, double) { return std::sin(x) + std::cos(2 * y); });
    const PerpVelocity u = perp_velocity(w, 0.0, 1e-3);
    CHECK(u.ux.max_abs() < 1e-12);
    CHECK(u.uy.max_abs() < 1e-12);
  }
  SUBCASE("scalar carried by Taylor-Green: normal component of the true velocity") {
    const int n = 32;
    SegmentConfig cfg;
    cfg.n = n;
    cfg.tau = 0.02;
    ControlVector c = ControlVector::from_state(siv::testing::taylor_green(n, 1.0));
    c.phi = transform(PhysicalField::sample(n, [](double x, double y) { return std::sin(y) + 0.4 * std::cos(x + y); }));
    const Trajectory traj = run_forward(c, cfg);
    // Away from the Euler start-up step the central difference is second order.
    ScalarWindow w{{traj.states[9].phi, traj.states[10].phi, traj.states[11].phi}, cfg.dt, traj.states[10].time};
    const PerpVelocity up = perp_velocity(w, cfg.lambda, 0.3);
    const PhysicalField ux = inverse(traj.states[10].ux), uy = inverse(traj.states[10].uy);
    const PhysicalField px = inverse(derivative(w.center(), Axis::X)), py = inverse(derivative(w.center(), Axis::Y));
    double worst = 0.0;
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        if (!up.valid[iy * n + ix]) continue;
        const double gx = px.at(ix, iy), gy = py.at(ix, iy);
        const double s = (ux.at(ix, iy) * gx + uy.at(ix, iy) * gy) / (gx * gx + gy * gy);
        worst = std::max({worst, std::abs(up.ux.at(ix, iy) - s * gx), std::abs(up.uy.at(ix, iy) - s * gy)});
      }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("a scalar carried by a uniform vertical stream gives back its stream function") {
  // u = (0, c) has Theta = -c x, and psi = sin(x + y - c t) is transported
  // exactly with lambda = 0. Only the correct sign of f reproduces Theta.
  const int n = 64;
  const double c = 0.7, dt = 1e-3, t = 0.5;
  const auto w = window_from(n, 3, dt, t, [&](double x, double y, double s) { return std::sin(x + y - c * s); });
  const double xs = -kPi / 2;
  std::vector<double> line(n, -c * xs);
  const TransportProblem p = build_transport(w, 0.0, xs, line);
  const ConeRegion cone = admissible_cone(p, kPi / 2 + c * t, 1.0);
  CHECK(cone.width >= 0.5);
  const TransportSolution s = solve_transport(p, cone);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const auto& q = s.grid.points()[i];
    worst = std::max(worst, std::abs(s.theta[i] - (-c * (s.grid.x(q) - xs))));
  }
  CHECK(worst < 1e-6);
  const RecoveredVelocity u = recover_velocity(s);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    if (!u.valid[i]) continue;
    CHECK(std::abs(u.ux[i]) < 1e-5);
    CHECK(std::abs(u.uy[i] - c) < 1e-5);
  }
}

TEST_CASE("beta and f match a differentiation-matrix oracle") {
  const int n = 32;
  const double lambda = 2e-3, dt = 1e-3;
  const auto psi = [](double x, double y, double t) {
    return std::sin(y + 0.3 * t) + 0.3 * std::cos(x - t) + 0.1 * std::sin(2 * x + y);
  };
  const auto w = window_from(n, 3, dt, 0.5, psi);
  std::vector<double> line(n, 0.0);
  const TransportProblem p = build_transport(w, lambda, -kPi / 2, line);

  const PhysicalField c = PhysicalField::sample(n, [&](double x, double y) { return psi(x, y, 0.5); });
  const PhysicalField prev = PhysicalField::sample(n, [&](double x, double y) { return psi(x, y, 0.5 - dt); });
  const PhysicalField next = PhysicalField::sample(n, [&](double x, double y) { return psi(x, y, 0.5 + dt); });
  const PhysicalField cx = apply_matrix(c, Axis::X, d1_entry);
  const PhysicalField cy = apply_matrix(c, Axis::Y, d1_entry);
  const PhysicalField cxx = apply_matrix(c, Axis::X, d2_entry);
  const PhysicalField cyy = apply_matrix(c, Axis::Y, d2_entry);
  double worst_beta = 0.0, worst_f = 0.0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      if (std::abs(cy.at(ix, iy)) < p.epsilon_floor) continue;
      const double zeta = -(next.at(ix, iy) - prev.at(ix, iy)) / (2 * dt) + lambda * (cxx.at(ix, iy) + cyy.at(ix, iy));
      worst_beta = std::max(worst_beta, std::abs(p.beta.at(ix, iy) + cx.at(ix, iy) / cy.at(ix, iy)));
      worst_f = std::max(worst_f, std::abs(p.f.at(ix, iy) + zeta / cy.at(ix, iy)));
    }
  CHECK(worst_beta < 1e-8);
  CHECK(worst_f < 1e-8);
  CHECK(p.line_x == doctest::Approx(-kPi / 2));
  CHECK(p.epsilon_floor == doctest::Approx(kDefaultEpsilonFraction * p.dpsi_dy.max_abs()));
}

TEST_CASE("cone geometry") {
  const ConeRegion cone{-kPi / 2, 0.0, 1.5, 0.5};
  CHECK(cone.contains(-kPi / 2, 0.7));
  CHECK_FALSE(cone.contains(-kPi / 2, 0.76));
  CHECK_FALSE(cone.contains(-kPi / 2 - 0.01, 0.0));
  CHECK_FALSE(cone.contains(-kPi / 2 + 0.5, 0.0));
  const ConeGrid grid(cone, 64);
  for (const auto& p : grid.points()) CHECK(cone.contains(grid.x(p), grid.y(p)));
  CHECK(grid.find(0, 0) >= 0);
  CHECK(grid.find(-1, 0) == -1);
  CHECK(grid.find(0, grid.j_extent() + 1) == -1);
  CHECK(grid.columns() == 6);  // width 0.5 covers 5 spacings of 2 pi / 64
  CHECK_THROWS_AS(ConeGrid(ConeRegion{-kPi / 2 + 0.01, 0.0, 1.0, 0.5}, 64), Error);
  CHECK_THROWS_AS(ConeGrid(ConeRegion{-kPi / 2, 0.0, 10.0, 2.0}, 64), Error);
}

TEST_CASE("characteristics reproduce closed-form transport solutions") {
  const int n = 128;
  const double xs = -kPi / 2;
  const auto g = [](double y) { return std::sin(y) + 0.5 * std::cos(2 * y); };

  SUBCASE("beta = 0, f = 1") {
    const auto p = manual_problem(n, xs, [](double, double) { return 0.0; }, [](double, double) { return 1.0; }, g);
    const TransportSolution s = solve_transport(p, ConeRegion{xs, 0.0, 1.0, 1.0});
    CHECK(s.flagged_count == 0);
    CHECK(max_theta_error(s, [&](double x, double y) { return g(y) - g(0.0) + (x - xs); }) < 1e-12);
  }
  SUBCASE("constant beta shifts the line data") {
    const double b = 0.4;
    const auto p = manual_problem(n, xs, [&](double, double) { return b; }, [](double, double) { return 0.0; }, g);
    const TransportSolution s = solve_transport(p, ConeRegion{xs, 0.0, 1.4, 1.0});
    CHECK(max_theta_error(s, [&](double x, double y) { return g(y - b * (x - xs)) - g(0.0); }) < 5e-6);
    const TransportSolution lin = solve_transport(p, ConeRegion{xs, 0.0, 1.4, 1.0}, Interpolation::Linear);
    CHECK(max_theta_error(lin, [&](double x, double y) { return g(y - b * (x - xs)) - g(0.0); }) < 1e-3);
  }
  SUBCASE("beta = 0.5 sin y bends the characteristics") {
    // tan(Y/2) = tan(y/2) exp(-(x - x_sigma)/2) along dy/dx = sin(y)/2.
    const auto p = manual_problem(n, xs, [](double, double y) { return 0.5 * std::sin(y); },
                                  [](double, double) { return 0.0; }, g);
    const auto exact = [&](double x, double y) {
      return g(2 * std::atan(std::tan(0.5 * y) * std::exp(-0.5 * (x - xs)))) - g(0.0);
    };
    double errors[2];
    for (int r = 0; r < 2; ++r) {
      const int m = r == 0 ? 64 : 128;
      const auto pm = manual_problem(m, xs, [](double, double y) { return 0.5 * std::sin(y); },
                                     [](double, double) { return 0.0; }, g);
      errors[r] = max_theta_error(solve_transport(pm, ConeRegion{xs, 0.0, 1.5, 1.0}), exact);
    }
    CHECK(errors[1] < 5e-6);
    CHECK(errors[0] / errors[1] > 8.0);
  }
}

TEST_CASE("inadmissible cones are rejected with a suggestion") {
  const int n = 64;
  const auto p = manual_problem(n, -kPi / 2, [](double, double y) { return 2.0 * std::cos(y); },
                                [](double, double) { return 0.0; }, [](double y) { return y; });
  try {
    check_cone(p, ConeRegion{-kPi / 2, 0.0, 1.0, 0.5});
    FAIL("expected an exception");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("sup|beta|") != std::string::npos);
    CHECK(msg.find("largest admissible cone") != std::string::npos);
  }
  const ConeRegion ok = admissible_cone(p, 0.0, 1.0);
  CHECK(ok.slope >= 2.0);
  CHECK_NOTHROW(check_cone(p, ok));
}

TEST_CASE("admissible cones shrink as the epsilon floor rises") {
  const int n = 64;
  const auto w = window_from(n, 3, 1e-3, 0.0, [](double x, double y, double) {
    return std::sin(y) + 0.3 * std::cos(x);
  });
  std::vector<double> line(n, 0.0);
  double last_width = 1e9;
  for (double eps : {0.05, 0.3, 0.6, 0.9}) {
    const TransportProblem p = build_transport(w, 2e-3, -kPi / 2, line, eps);
    const ConeRegion c = admissible_cone(p, 0.0, 1.5);
    CHECK(c.width <= last_width);
    last_width = c.width;
    CHECK_NOTHROW(check_cone(p, c));
  }
  const TransportProblem p = build_transport(w, 2e-3, -kPi / 2, line, 2.0);
  CHECK_THROWS_AS(admissible_cone(p, 0.0, 1.5), Error);
}

TEST_CASE("cone derivatives") {
  const ConeGrid grid(ConeRegion{-kPi / 2, 0.0, 1.0, 1.0}, 64);
  std::vector<double> lin(grid.size()), cub(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& p = grid.points()[i];
    lin[i] = 2 * grid.x(p) - 3 * grid.y(p);
    cub[i] = std::pow(grid.y(p), 3);
  }
  std::vector<unsigned char> ok;
  const auto dx = cone_derivative(grid, lin, Axis::X, ok);
  int fourth_order_points = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (ok[i]) CHECK(dx[i] == doctest::Approx(2.0).epsilon(1e-10));
  const auto dy = cone_derivative(grid, cub, Axis::Y, ok);
  const double h = grid.spacing();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& p = grid.points()[i];
    if (grid.find(p.i, p.j - 2) >= 0 && grid.find(p.i, p.j + 2) >= 0) {
      ++fourth_order_points;
      CHECK(dy[i] == doctest::Approx(3 * grid.y(p) * grid.y(p)).epsilon(1e-9).scale(h));
    }
  }
  CHECK(fourth_order_points > 0);
}

TEST_CASE("recovered velocity of a linear stream function") {
  // Theta = a y - b x has u = (a, b) everywhere.
  const int n = 64;
  const auto p = manual_problem(n, -kPi / 2, [](double, double) { return 0.0; }, [](double, double) { return -0.8; },
                                [](double y) { return 1.3 * y; });
  const TransportSolution s = solve_transport(p, ConeRegion{-kPi / 2, 0.0, 1.0, 1.0});
  const RecoveredVelocity u = recover_velocity(s);
  int valid = 0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    if (!u.valid[i]) continue;
    ++valid;
    CHECK(u.ux[i] == doctest::Approx(1.3).epsilon(1e-9));
    CHECK(u.uy[i] == doctest::Approx(0.8).epsilon(1e-9));
  }
  CHECK(valid > static_cast<int>(s.grid.size()) / 2);
}

TEST_CASE("discrete norms") {
  const ConeGrid grid(ConeRegion{-kPi / 2, 0.0, 1.0, 1.0}, 64);
  std::vector<double> ones(grid.size(), 1.0);
  const double area = grid.size() * grid.spacing() * grid.spacing();
  CHECK(cone_l2(grid, ones, {}, {}) == doctest::Approx(std::sqrt(area)));
  CHECK(cone_h1(grid, ones) == doctest::Approx(std::sqrt(area)));
  CHECK(cone_l2(grid, ones, ones, {}) == doctest::Approx(std::sqrt(2 * area)));

  // Steady sin(x): only the pure x derivatives survive, alternating
  // between sin^2 (orders 0, 2, 4) and cos^2 (orders 1, 3).
  const int n = 64;
  const auto w = window_from(n, 5, 0.01, 0.0, [](double x, double, double) { return std::sin(x); });
  double mass_sin = 0.0, mass_cos = 0.0;
  for (const auto& p : grid.points()) {
    mass_sin += std::pow(std::sin(grid.x(p)), 2);
    mass_cos += std::pow(std::cos(grid.x(p)), 2);
  }
  const double h2 = grid.spacing() * grid.spacing();
  const double expected = std::sqrt((3 * mass_sin + 2 * mass_cos) * h2);
  CHECK(h4_norm(w, grid) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("stability probe of identical windows is zero") {
  const int n = 64;
  const auto w = window_from(n, 5, 0.01, 0.0, [](double x, double y, double t) {
    return std::sin(y) + 0.3 * std::cos(x - t);
  });
  std::vector<double> line(n);
  for (int iy = 0; iy < n; ++iy) line[iy] = std::sin(PhysicalField::node(iy, n));
  const TransportProblem p = build_transport(w, 2e-3, -kPi / 2, line);
  const ConeRegion cone = admissible_cone(p, 0.0, 1.0);
  const ProbeReport r = stability_probe(w, w, 2e-3, cone, line);
  CHECK(r.h4_psi_diff == 0.0);
  CHECK(r.l2_u_diff == 0.0);
  CHECK(r.ratio_lipschitz == 0.0);

  std::ostringstream csv;
  const std::vector<ProbeReport> reports{r};
  write_probe_csv(csv, reports);
  CHECK(csv.str().rfind("delta,h4_psi_diff,h1_theta_diff,l2_u_diff,ratio_lipschitz\n", 0) == 0);
}

TEST_CASE("transport energy estimate stays below the Gronwall bound") {
  const int n = 64;
  const auto p = manual_problem(n, -kPi / 2, [](double, double y) { return 0.3 * std::sin(y); },
                                [](double, double) { return 0.0; }, [](double y) { return y; });
  const ConeRegion cone = admissible_cone(p, 0.0, 1.0);
  const PhysicalField fe = PhysicalField::sample(n, [](double x, double y) { return std::cos(x) * std::sin(3 * y) + 0.5; });
  const EnergyEstimate e = transport_energy_estimate(p, cone, fe);
  CHECK(e.measured > 0.0);
  CHECK(e.measured <= e.gronwall_bound);
}
