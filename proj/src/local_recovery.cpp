#include "siv/local_recovery.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <sstream>

#include "siv/keyvalue.hpp"

namespace siv {

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

int nearest_node(double coord, int n) {
  const double h = kDomainLength / n;
  return wrap(static_cast<int>(std::lround((coord + kPi) / h)), n);
}

// Periodic interpolation of grid samples at fractional index coordinates.
class GridInterpolator {
 public:
  GridInterpolator(const PhysicalField& field, Interpolation kind) : f_(field), kind_(kind) {}

  double operator()(double gx, double gy) const {
    const double fx = std::floor(gx);
    const double fy = std::floor(gy);
    const int ix = static_cast<int>(fx);
    const int iy = static_cast<int>(fy);
    const double tx = gx - fx;
    const double ty = gy - fy;
    if (kind_ == Interpolation::Linear) {
      const double a = f_.wrapped(ix, iy), b = f_.wrapped(ix + 1, iy);
      const double c = f_.wrapped(ix, iy + 1), d = f_.wrapped(ix + 1, iy + 1);
      return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
    }
    const auto wx = cubic_weights(tx);
    const auto wy = cubic_weights(ty);
    double sum = 0.0;
    for (int m = 0; m < 4; ++m) {
      double row = 0.0;
      for (int l = 0; l < 4; ++l) row += wx[l] * f_.wrapped(ix - 1 + l, iy - 1 + m);
      sum += wy[m] * row;
    }
    return sum;
  }

  // Four-point Lagrange weights on nodes -1, 0, 1, 2.
  static std::array<double, 4> cubic_weights(double t) {
    return {-t * (t - 1) * (t - 2) / 6.0, (t + 1) * (t - 1) * (t - 2) / 2.0, -(t + 1) * t * (t - 2) / 2.0,
            (t + 1) * t * (t - 1) / 6.0};
  }

 private:
  const PhysicalField& f_;
  Interpolation kind_;
};

// Periodic interpolation of line data (one value per grid row).
double interpolate_line(std::span<const double> g, double gy, Interpolation kind) {
  const int n = static_cast<int>(g.size());
  const double fy = std::floor(gy);
  const int iy = static_cast<int>(fy);
  const double t = gy - fy;
  if (kind == Interpolation::Linear) return (1 - t) * g[wrap(iy, n)] + t * g[wrap(iy + 1, n)];
  const auto w = GridInterpolator::cubic_weights(t);
  double sum = 0.0;
  for (int l = 0; l < 4; ++l) sum += w[l] * g[wrap(iy - 1 + l, n)];
  return sum;
}

double sup_abs_on(const ConeGrid& grid, const PhysicalField& f) {
  double m = 0.0;
  for (const auto& p : grid.points()) m = std::max(m, std::abs(f.at(grid.grid_ix(p), grid.grid_iy(p))));
  return m;
}

std::string describe(const ConeRegion& c) {
  std::ostringstream os;
  os << "{x_sigma=" << c.x_sigma << ", y0=" << c.y0 << ", slope=" << c.slope << ", width=" << c.width << "}";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// ScalarWindow

void ScalarWindow::validate() const {
  if (snapshots.size() < 3 || snapshots.size() % 2 == 0)
    throw Error("scalar window needs an odd number (>= 3) of snapshots");
  if (!(dt > 0.0)) throw Error("scalar window spacing must be positive");
  for (const auto& s : snapshots)
    if (s.n() != snapshots.front().n()) throw Error("scalar window snapshots differ in grid size");
}

int ScalarWindow::max_time_order() const { return snapshots.size() >= 5 ? 4 : 2; }

SpectralField ScalarWindow::time_derivative() const { return time_derivative(1); }

SpectralField ScalarWindow::time_derivative(int order) const {
  validate();
  if (order < 0 || order > max_time_order())
    throw Error("time derivative of order " + std::to_string(order) + " needs a wider window");
  const std::size_t c = snapshots.size() / 2;
  const auto& s = snapshots;
  const double h = dt;
  switch (order) {
    case 0:
      return s[c];
    case 1:
      return (1.0 / (2.0 * h)) * (s[c + 1] - s[c - 1]);
    case 2:
      return (1.0 / (h * h)) * (s[c + 1] - 2.0 * s[c] + s[c - 1]);
    case 3:
      return (1.0 / (2.0 * h * h * h)) * (s[c + 2] - 2.0 * s[c + 1] + 2.0 * s[c - 1] - s[c - 2]);
    default:
      return (1.0 / (h * h * h * h)) * (s[c + 2] - 4.0 * s[c + 1] + 6.0 * s[c] - 4.0 * s[c - 1] + s[c - 2]);
  }
}

ScalarWindow ScalarWindow::perturbed(const SpectralField& perturbation, double delta) const {
  ScalarWindow out = *this;
  for (auto& s : out.snapshots) s.axpy(delta, perturbation);
  return out;
}

// ---------------------------------------------------------------------------
// perp_velocity / build_transport

PerpVelocity perp_velocity(const ScalarWindow& psi, double lambda, double grad_threshold) {
  psi.validate();
  const SpectralField& c = psi.center();
  const PhysicalField zeta = inverse(-1.0 * psi.time_derivative() + lambda * laplacian(c));
  const PhysicalField px = inverse(derivative(c, Axis::X));
  const PhysicalField py = inverse(derivative(c, Axis::Y));
  const int n = c.n();
  PerpVelocity out{PhysicalField(n), PhysicalField(n), std::vector<unsigned char>(static_cast<std::size_t>(n) * n, 0), 0};
  const double thr2 = grad_threshold * grad_threshold;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const double gx = px.at(ix, iy), gy = py.at(ix, iy);
      const double g2 = gx * gx + gy * gy;
      if (g2 < thr2 || g2 == 0.0) {
        ++out.masked;
        continue;
      }
      const double s = zeta.at(ix, iy) / g2;
      out.ux.at(ix, iy) = s * gx;
      out.uy.at(ix, iy) = s * gy;
      out.valid[static_cast<std::size_t>(iy) * n + ix] = 1;
    }
  }
  return out;
}

TransportProblem build_transport(const ScalarWindow& psi, double lambda, double line_x,
                                 std::span<const double> reference_theta, std::optional<double> epsilon_floor) {
  psi.validate();
  const SpectralField& c = psi.center();
  const int n = c.n();
  if (static_cast<int>(reference_theta.size()) != n)
    throw Error("build_transport: line data must have one value per grid row");

  TransportProblem p;
  p.time = psi.time;
  p.line_ix = nearest_node(line_x, n);
  p.line_x = PhysicalField::node(p.line_ix, n);
  p.boundary_theta.assign(reference_theta.begin(), reference_theta.end());

  const PhysicalField zeta = inverse(-1.0 * psi.time_derivative() + lambda * laplacian(c));
  const PhysicalField px = inverse(derivative(c, Axis::X));
  p.dpsi_dy = inverse(derivative(c, Axis::Y));
  p.epsilon_floor = epsilon_floor ? *epsilon_floor : kDefaultEpsilonFraction * p.dpsi_dy.max_abs();
  if (!(p.epsilon_floor > 0.0)) throw Error("build_transport: d_y psi vanishes identically");

  p.beta = PhysicalField(n);
  p.f = PhysicalField(n);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const double py = p.dpsi_dy.at(ix, iy);
      if (py == 0.0) continue;
      p.beta.at(ix, iy) = -px.at(ix, iy) / py;
      p.f.at(ix, iy) = -zeta.at(ix, iy) / py;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Cone geometry

bool ConeRegion::contains(double x, double y) const {
  const double dx = x - x_sigma;
  if (dx < 0.0 || dx > width) return false;
  return std::abs(y - y0) < half_height(x);
}

ConeGrid::ConeGrid(const ConeRegion& cone, int n) : cone_(cone), n_(n), h_(kDomainLength / n) {
  require_grid_size(n);
  if (!(cone.width > 0.0) || !(cone.slope > 0.0)) throw Error("cone needs positive width and slope");
  line_ix_ = nearest_node(cone.x_sigma, n);
  y0_iy_ = nearest_node(cone.y0, n);
  const auto off_grid = [&](double coord, int idx) {
    double d = std::remainder(coord - PhysicalField::node(idx, n), kDomainLength);
    return std::abs(d) > 1e-9 * h_;
  };
  if (off_grid(cone.x_sigma, line_ix_) || off_grid(cone.y0, y0_iy_))
    throw Error("cone apex line and centre must lie on grid nodes: " + describe(cone));

  imax_ = static_cast<int>(std::floor(cone.width / h_ + 1e-9));
  jmax_ = 0;
  std::vector<int> jlim(static_cast<std::size_t>(imax_) + 1, -1);
  for (int i = 0; i <= imax_; ++i) {
    const double half = cone.half_height(cone.x_sigma + i * h_);
    if (half <= 0.0) continue;
    jlim[i] = static_cast<int>(std::ceil(half / h_ - 1e-12)) - 1;  // strict inequality
    jmax_ = std::max(jmax_, jlim[i]);
  }
  if (2 * jmax_ + 1 > n || imax_ + 1 > n) throw Error("cone wraps around the periodic box: " + describe(cone));

  lookup_.assign(static_cast<std::size_t>(imax_ + 1) * (2 * jmax_ + 1), -1);
  for (int i = 0; i <= imax_; ++i) {
    for (int j = -jlim[i]; j <= jlim[i]; ++j) {
      lookup_[static_cast<std::size_t>(i) * (2 * jmax_ + 1) + (j + jmax_)] = static_cast<int>(points_.size());
      points_.push_back({i, j});
    }
  }
  if (points_.empty()) throw Error("cone covers no grid points: " + describe(cone));
}

int ConeGrid::find(int i, int j) const {
  if (i < 0 || i > imax_ || j < -jmax_ || j > jmax_) return -1;
  return lookup_[static_cast<std::size_t>(i) * (2 * jmax_ + 1) + (j + jmax_)];
}

ConeRegion admissible_cone(const TransportProblem& problem, double y0, double max_width) {
  const int n = problem.n();
  const double h = problem.spacing();
  const int y0_iy = nearest_node(y0, n);
  const double y0_snapped = PhysicalField::node(y0_iy, n);
  const int line_ix = problem.line_ix;

  // Grid points of the cone of width k h and the given slope, as in ConeGrid.
  auto for_cone = [&](int k, double slope, auto&& visit) {
    for (int i = 0; i <= k; ++i) {
      const int jl = static_cast<int>(std::ceil(slope * (k - i) - 1e-12)) - 1;
      for (int j = -jl; j <= jl; ++j)
        if (!visit(line_ix + i, y0_iy + j)) return false;
    }
    return true;
  };
  auto floor_ok = [&](int k, double slope) {
    return for_cone(k, slope, [&](int ix, int iy) { return std::abs(problem.dpsi_dy.wrapped(ix, iy)) >= problem.epsilon_floor; });
  };
  auto sup_beta = [&](int k, double slope) {
    double m = 0.0;
    for_cone(k, slope, [&](int ix, int iy) {
      m = std::max(m, std::abs(problem.beta.wrapped(ix, iy)));
      return true;
    });
    return m;
  };

  if (std::abs(problem.dpsi_dy.wrapped(line_ix, y0_iy)) < problem.epsilon_floor)
    throw Error("admissible_cone: |d_y psi| is below the floor at the apex point");

  ConeRegion best{problem.line_x, y0_snapped, 1.0 + std::abs(problem.beta.wrapped(line_ix, y0_iy)), 0.0};
  const int kmax = std::min(static_cast<int>(std::floor(max_width / h + 1e-9)), n / 2);
  for (int k = 1; k <= kmax; ++k) {
    const double width = k * h;
    double slope = best.slope;
    bool accepted = false;
    for (int iter = 0; iter < 20; ++iter) {
      if (2 * (static_cast<int>(std::ceil(slope * k - 1e-12)) - 1) + 1 > n) break;
      if (!floor_ok(k, slope)) break;
      const double needed = 1.0 + sup_beta(k, slope);
      if (needed <= slope) {
        accepted = true;
        break;
      }
      slope = needed;
    }
    if (!accepted) break;
    best.slope = slope;
    best.width = width;
  }
  if (best.width == 0.0) throw Error("admissible_cone: no admissible cone around the apex point");
  return best;
}

void check_cone(const TransportProblem& problem, const ConeRegion& cone) {
  const ConeGrid grid(cone, problem.n());
  if (grid.line_ix() != problem.line_ix) throw Error("cone apex line differs from the transport problem's line");
  const double sup_beta = sup_abs_on(grid, problem.beta);
  bool floor_violated = false;
  for (const auto& p : grid.points())
    if (std::abs(problem.dpsi_dy.at(grid.grid_ix(p), grid.grid_iy(p))) < problem.epsilon_floor) floor_violated = true;
  if (sup_beta <= cone.slope && !floor_violated) return;

  std::ostringstream msg;
  msg << "cone " << describe(cone) << " is not admissible:";
  if (floor_violated) msg << " |d_y psi| drops below epsilon=" << problem.epsilon_floor << ";";
  if (sup_beta > cone.slope) msg << " sup|beta|=" << sup_beta << " exceeds the slope;";
  try {
    msg << " largest admissible cone " << describe(admissible_cone(problem, cone.y0, cone.width));
  } catch (const Error& e) {
    msg << " no admissible cone (" << e.what() << ")";
  }
  throw Error(msg.str());
}

// ---------------------------------------------------------------------------
// Characteristics

TransportSolution solve_transport(const TransportProblem& problem, const ConeRegion& cone, Interpolation interp) {
  check_cone(problem, cone);
  ConeGrid grid(cone, problem.n());
  const double h = grid.spacing();
  const GridInterpolator beta(problem.beta, interp);
  const GridInterpolator f(problem.f, interp);
  const std::span<const double> g = problem.boundary_theta;

  // Fractional grid coordinates of a physical point.
  const auto gx = [&](double x) { return grid.line_ix() + (x - cone.x_sigma) / h; };
  const auto gy = [&](double y) { return grid.y0_iy() + (y - cone.y0) / h; };
  const double gauge = interpolate_line(g, grid.y0_iy(), interp);
  const double slack = 1e-9 * h;
  const auto inside = [&](double x, double y) {
    return std::abs(y - cone.y0) <= cone.half_height(x) + slack;
  };

  TransportSolution sol{grid, std::vector<double>(grid.size(), 0.0), std::vector<unsigned char>(grid.size(), 0), 0};
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const auto& p = grid.points()[idx];
    double x = grid.x(p);
    double y = grid.y(p);
    double integral = 0.0;  // int_{x_p}^{x} f along the characteristic
    bool escaped = false;
    const double step = -h;
    for (int s = 0; s < p.i && !escaped; ++s) {
      const double xh = x + 0.5 * step;
      const double k1 = beta(gx(x), gy(y));
      const double l1 = f(gx(x), gy(y));
      const double y2 = y + 0.5 * step * k1;
      const double k2 = beta(gx(xh), gy(y2));
      const double l2 = f(gx(xh), gy(y2));
      const double y3 = y + 0.5 * step * k2;
      const double k3 = beta(gx(xh), gy(y3));
      const double l3 = f(gx(xh), gy(y3));
      const double y4 = y + step * k3;
      const double k4 = beta(gx(x + step), gy(y4));
      const double l4 = f(gx(x + step), gy(y4));
      escaped = !inside(xh, y2) || !inside(xh, y3) || !inside(x + step, y4);
      y += step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      integral += step / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4);
      x = cone.x_sigma + (p.i - s - 1) * h;
      escaped = escaped || !inside(x, y);
    }
    if (escaped) {
      sol.flagged[idx] = 1;
      ++sol.flagged_count;
      continue;
    }
    sol.theta[idx] = interpolate_line(g, gy(y), interp) - gauge - integral;
  }
  if (sol.flagged_count * 100 > static_cast<int>(grid.size()))
    throw Error("solve_transport: " + std::to_string(sol.flagged_count) + " of " + std::to_string(grid.size()) +
                " characteristics left the cone");
  return sol;
}

// ---------------------------------------------------------------------------
// Differentiation and norms on the cone

std::vector<double> cone_derivative(const ConeGrid& grid, std::span<const double> values, Axis axis,
                                    std::vector<unsigned char>& ok) {
  const double h = grid.spacing();
  std::vector<double> out(grid.size(), 0.0);
  ok.assign(grid.size(), 0);
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const auto& p = grid.points()[idx];
    auto at = [&](int d) {
      return axis == Axis::X ? grid.find(p.i + d, p.j) : grid.find(p.i, p.j + d);
    };
    const int m2 = at(-2), m1 = at(-1), p1 = at(1), p2 = at(2);
    const double f0 = values[idx];
    if (m2 >= 0 && m1 >= 0 && p1 >= 0 && p2 >= 0) {
      out[idx] = (-values[p2] + 8.0 * values[p1] - 8.0 * values[m1] + values[m2]) / (12.0 * h);
    } else if (m1 >= 0 && p1 >= 0) {
      out[idx] = (values[p1] - values[m1]) / (2.0 * h);
    } else if (p1 >= 0 && p2 >= 0) {
      out[idx] = (-3.0 * f0 + 4.0 * values[p1] - values[p2]) / (2.0 * h);
    } else if (m1 >= 0 && m2 >= 0) {
      out[idx] = (3.0 * f0 - 4.0 * values[m1] + values[m2]) / (2.0 * h);
    } else {
      continue;
    }
    ok[idx] = 1;
  }
  return out;
}

RecoveredVelocity recover_velocity(const TransportSolution& solution) {
  const ConeGrid& grid = solution.grid;
  std::vector<unsigned char> okx, oky;
  const auto dx = cone_derivative(grid, solution.theta, Axis::X, okx);
  const auto dy = cone_derivative(grid, solution.theta, Axis::Y, oky);
  RecoveredVelocity out{std::vector<double>(grid.size()), std::vector<double>(grid.size()),
                        std::vector<unsigned char>(grid.size(), 0)};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.ux[i] = dy[i];
    out.uy[i] = -dx[i];
    out.valid[i] = okx[i] && oky[i] && !solution.flagged[i];
  }
  return out;
}

double cone_l2(const ConeGrid& grid, std::span<const double> a, std::span<const double> b,
               std::span<const unsigned char> valid) {
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (valid.empty() || valid[i]) sum += a[i] * a[i] + (b.empty() ? 0.0 : b[i] * b[i]);
  const double h = grid.spacing();
  return std::sqrt(sum * h * h);
}

double cone_h1(const ConeGrid& grid, std::span<const double> values) {
  std::vector<unsigned char> okx, oky;
  const auto dx = cone_derivative(grid, values, Axis::X, okx);
  const auto dy = cone_derivative(grid, values, Axis::Y, oky);
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sum += values[i] * values[i];
    if (okx[i]) sum += dx[i] * dx[i];
    if (oky[i]) sum += dy[i] * dy[i];
  }
  const double h = grid.spacing();
  return std::sqrt(sum * h * h);
}

double h4_norm(const ScalarWindow& window, const ConeGrid& grid) {
  window.validate();
  const double h = grid.spacing();
  double sum = 0.0;
  const int amax = window.max_time_order();
  for (int a = 0; a <= amax; ++a) {
    const SpectralField dt = window.time_derivative(a);
    for (int bx = 0; bx + a <= 4; ++bx) {
      const SpectralField ddx = bx == 0 ? dt : derivative(dt, Axis::X, bx);
      for (int by = 0; a + bx + by <= 4; ++by) {
        const PhysicalField d = inverse(by == 0 ? ddx : derivative(ddx, Axis::Y, by));
        for (const auto& p : grid.points()) {
          const double v = d.at(grid.grid_ix(p), grid.grid_iy(p));
          sum += v * v;
        }
      }
    }
  }
  return std::sqrt(sum * h * h);
}

// ---------------------------------------------------------------------------
// Stability measurements

ProbeReport stability_probe(const ScalarWindow& psi, const ScalarWindow& psi_perturbed, double lambda,
                            const ConeRegion& cone, std::span<const double> reference_theta,
                            std::optional<double> epsilon_floor) {
  const TransportProblem base = build_transport(psi, lambda, cone.x_sigma, reference_theta, epsilon_floor);
  const TransportProblem pert =
      build_transport(psi_perturbed, lambda, cone.x_sigma, reference_theta, base.epsilon_floor);
  const TransportSolution s0 = solve_transport(base, cone);
  const TransportSolution s1 = solve_transport(pert, cone);
  const RecoveredVelocity u0 = recover_velocity(s0);
  const RecoveredVelocity u1 = recover_velocity(s1);

  const ConeGrid& grid = s0.grid;
  std::vector<double> dtheta(grid.size()), dux(grid.size()), duy(grid.size());
  std::vector<unsigned char> valid(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    dtheta[i] = s0.theta[i] - s1.theta[i];
    dux[i] = u0.ux[i] - u1.ux[i];
    duy[i] = u0.uy[i] - u1.uy[i];
    valid[i] = u0.valid[i] && u1.valid[i];
  }

  ScalarWindow diff = psi;
  for (std::size_t k = 0; k < diff.snapshots.size(); ++k) diff.snapshots[k] -= psi_perturbed.snapshots[k];

  ProbeReport r;
  r.h4_psi_diff = h4_norm(diff, grid);
  r.h1_theta_diff = cone_h1(grid, dtheta);
  r.l2_u_diff = cone_l2(grid, dux, duy, valid);
  r.ratio_lipschitz = r.h4_psi_diff > 0.0 ? r.l2_u_diff / r.h4_psi_diff : 0.0;
  return r;
}

void write_probe_csv(std::ostream& os, std::span<const ProbeReport> reports) {
  os << "delta,h4_psi_diff,h1_theta_diff,l2_u_diff,ratio_lipschitz\n";
  for (const auto& r : reports)
    os << format_double(r.delta) << ',' << format_double(r.h4_psi_diff) << ',' << format_double(r.h1_theta_diff)
       << ',' << format_double(r.l2_u_diff) << ',' << format_double(r.ratio_lipschitz) << '\n';
}

EnergyEstimate transport_energy_estimate(const TransportProblem& problem, const ConeRegion& cone,
                                         const PhysicalField& f_e, Interpolation interp) {
  if (f_e.n() != problem.n()) throw Error("transport_energy_estimate: grid mismatch");
  TransportProblem err = problem;
  err.f = f_e;
  std::fill(err.boundary_theta.begin(), err.boundary_theta.end(), 0.0);
  const TransportSolution sol = solve_transport(err, cone, interp);
  const ConeGrid& grid = sol.grid;
  const double h = grid.spacing();

  double f_sq = 0.0;
  std::vector<double> slice_sq(static_cast<std::size_t>(grid.columns()), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& p = grid.points()[k];
    const double fv = f_e.at(grid.grid_ix(p), grid.grid_iy(p));
    f_sq += fv * fv * h * h;
    slice_sq[static_cast<std::size_t>(p.i)] += sol.theta[k] * sol.theta[k] * h;
  }
  EnergyEstimate est;
  if (f_sq > 0.0)
    for (double s : slice_sq) est.measured = std::max(est.measured, std::sqrt(s / f_sq));

  // W^{1,inf} size of beta on the cone, with d_y beta by central differences.
  double sup_beta = 0.0, sup_dbeta = 0.0;
  for (const auto& p : grid.points()) {
    const int ix = grid.grid_ix(p), iy = grid.grid_iy(p);
    sup_beta = std::max(sup_beta, std::abs(problem.beta.at(ix, iy)));
    const double dy = (problem.beta.wrapped(ix, iy + 1) - problem.beta.wrapped(ix, iy - 1)) / (2.0 * h);
    sup_dbeta = std::max(sup_dbeta, std::abs(dy));
  }
  const double c = 1.0 + sup_beta + sup_dbeta;
  est.gronwall_bound = std::exp(0.5 * c * cone.width);
  return est;
}

}  // namespace siv
