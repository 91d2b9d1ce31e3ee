#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "siv/spectral.hpp"

namespace siv {

/// Consecutive scalar snapshots at spacing dt, centred on `time`. The count
/// must be odd and at least 3; time derivatives are central differences
/// about the middle snapshot.
struct ScalarWindow {
  std::vector<SpectralField> snapshots;
  double dt = 0.0;
  double time = 0.0;

  void validate() const;
  int n() const { return snapshots.front().n(); }
  const SpectralField& center() const { return snapshots[snapshots.size() / 2]; }
  /// d/dt at the centre from the three middle snapshots (second order).
  SpectralField time_derivative() const;
  /// Central-difference d^order/dt^order at the centre, order <= count - 1
  /// and order <= 4.
  SpectralField time_derivative(int order) const;
  int max_time_order() const;
  /// Same window with `delta * perturbation` added to every snapshot.
  ScalarWindow perturbed(const SpectralField& perturbation, double delta) const;
};

/// Normal-to-isoline velocity u_perp = (-d_t psi + lambda lap psi) grad psi / |grad psi|^2.
struct PerpVelocity {
  PhysicalField ux, uy;
  /// 1 where |grad psi| >= threshold.
  std::vector<unsigned char> valid;
  int masked = 0;
};

PerpVelocity perp_velocity(const ScalarWindow& psi, double lambda, double grad_threshold);

/// d_x Theta + beta d_y Theta = f on the periodic grid, plus Theta on the line
/// x = line_x (one value per grid row).
struct TransportProblem {
  PhysicalField beta;
  PhysicalField f;
  /// d_y psi, kept for the non-degeneracy checks.
  PhysicalField dpsi_dy;
  std::vector<double> boundary_theta;
  int line_ix = 0;
  double line_x = 0.0;
  double epsilon_floor = 0.0;
  double time = 0.0;

  int n() const { return beta.n(); }
  double spacing() const { return beta.spacing(); }
};

/// Default floor on |d_y psi|: this fraction of its maximum over the grid.
inline constexpr double kDefaultEpsilonFraction = 0.1;

/// Forms beta = -psi_x / psi_y and f = -zeta / psi_y with
/// zeta = -d_t psi + lambda lap psi, i.e. X Theta = zeta divided by -psi_y. `line_x` is snapped to the nearest grid
/// column; `reference_theta` holds Theta on that column (n values along y).
/// Points with psi_y == 0 get beta = f = 0; points below the floor are
/// rejected later if a cone touches them.
TransportProblem build_transport(const ScalarWindow& psi, double lambda, double line_x,
                                 std::span<const double> reference_theta,
                                 std::optional<double> epsilon_floor = std::nullopt);

/// Domain of determinacy of the line data: x in [x_sigma, x_sigma + width],
/// |y - y0| < slope (width - (x - x_sigma)).
struct ConeRegion {
  double x_sigma = 0.0;
  double y0 = 0.0;
  double slope = 1.0;
  double width = 0.0;

  double half_height(double x) const { return slope * (width - (x - x_sigma)); }
  bool contains(double x, double y) const;
};

/// Largest cone (in multiples of the grid spacing, up to max_width) on which
/// |psi_y| >= epsilon_floor and slope >= sup |beta|. The slope is
/// 1 + sup |beta| over the cone's grid points. y0 is snapped to a grid row.
ConeRegion admissible_cone(const TransportProblem& problem, double y0, double max_width);

/// Grid points of a cone, addressed by offsets (i, j) from (line column, y0 row).
class ConeGrid {
 public:
  ConeGrid(const ConeRegion& cone, int n);

  struct Point {
    int i, j;
  };
  const ConeRegion& cone() const { return cone_; }
  int n() const { return n_; }
  double spacing() const { return h_; }
  int line_ix() const { return line_ix_; }
  int y0_iy() const { return y0_iy_; }
  std::span<const Point> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  /// Index into points(), or -1 when (i, j) is outside the cone.
  int find(int i, int j) const;
  double x(const Point& p) const { return cone_.x_sigma + p.i * h_; }
  double y(const Point& p) const { return cone_.y0 + p.j * h_; }
  int grid_ix(const Point& p) const { return ((line_ix_ + p.i) % n_ + n_) % n_; }
  int grid_iy(const Point& p) const { return ((y0_iy_ + p.j) % n_ + n_) % n_; }
  int columns() const { return imax_ + 1; }
  int j_extent() const { return jmax_; }

 private:
  ConeRegion cone_;
  int n_;
  double h_;
  int line_ix_, y0_iy_;
  int imax_, jmax_;
  std::vector<Point> points_;
  std::vector<int> lookup_;
};

enum class Interpolation { Linear, Cubic };

struct TransportSolution {
  ConeGrid grid;
  std::vector<double> theta;
  std::vector<unsigned char> flagged;
  int flagged_count = 0;
};

/// Method of characteristics: from each cone point, integrates dy/dx = beta
/// back to the line with RK4 (step = grid spacing), accumulating
/// dTheta/dx = f. Line data are gauge-shifted so Theta(x_sigma, y0) = 0.
/// Throws when the cone violates the slope bound or the epsilon floor, or
/// when more than 1% of the points leave the cone.
TransportSolution solve_transport(const TransportProblem& problem, const ConeRegion& cone,
                                  Interpolation interp = Interpolation::Cubic);

/// Throws (suggesting the admissible cone) unless the cone satisfies the
/// slope bound and the epsilon floor at every grid point it covers.
void check_cone(const TransportProblem& problem, const ConeRegion& cone);

/// Derivative of cone samples along x (axis X) or y: fourth-order central
/// where two neighbours exist on both sides, otherwise second order
/// (central or one-sided). `ok` receives 0 where no stencil fits.
std::vector<double> cone_derivative(const ConeGrid& grid, std::span<const double> values, Axis axis,
                                    std::vector<unsigned char>& ok);

struct RecoveredVelocity {
  std::vector<double> ux, uy;
  std::vector<unsigned char> valid;
};

/// u = (d_y Theta, -d_x Theta) on the cone points.
RecoveredVelocity recover_velocity(const TransportSolution& solution);

/// sqrt(sum over valid cone points of |v|^2 h^2).
double cone_l2(const ConeGrid& grid, std::span<const double> a, std::span<const double> b,
               std::span<const unsigned char> valid);

/// Discrete H1(cone) norm of cone samples.
double cone_h1(const ConeGrid& grid, std::span<const double> values);

/// Discrete space-time H4 norm of a scalar window over the cone footprint:
/// all d_t^a d_x^b d_y^c with a + b + c <= 4 (a limited by the window),
/// spatial parts spectral, temporal parts central differences at the centre.
double h4_norm(const ScalarWindow& window, const ConeGrid& grid);

struct ProbeReport {
  double delta = 0.0;
  double h4_psi_diff = 0.0;
  double h1_theta_diff = 0.0;
  double l2_u_diff = 0.0;
  double ratio_lipschitz = 0.0;
};

/// Runs build_transport / solve_transport / recover_velocity on both
/// windows with the same line data and reports the difference norms.
ProbeReport stability_probe(const ScalarWindow& psi, const ScalarWindow& psi_perturbed, double lambda,
                            const ConeRegion& cone, std::span<const double> reference_theta,
                            std::optional<double> epsilon_floor = std::nullopt);

/// CSV header `delta,h4_psi_diff,h1_theta_diff,l2_u_diff,ratio_lipschitz`.
void write_probe_csv(std::ostream& os, std::span<const ProbeReport> reports);

struct EnergyEstimate {
  /// max over x slices of ||e(x)||_{L2(B(r(x)))} / ||f_e||_{L2(cone)}
  double measured = 0.0;
  /// exp(C width / 2) with C = 1 + sup|beta| + sup|grad beta| over the cone.
  double gronwall_bound = 0.0;
};

/// Measures the transport energy constant: e solves the transport problem
/// with right-hand side f_e and zero line data, i.e. the difference of two
/// solves whose right-hand sides differ by f_e.
EnergyEstimate transport_energy_estimate(const TransportProblem& problem, const ConeRegion& cone,
                                         const PhysicalField& f_e, Interpolation interp = Interpolation::Cubic);

}  // namespace siv
