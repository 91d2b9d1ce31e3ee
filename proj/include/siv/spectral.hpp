#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace siv {

using Complex = std::complex<double>;

/// Raised for contract violations (bad sizes, mismatched grids, NaNs).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = std::numbers::pi;
/// Side length of the bi-periodic box (-pi, pi)^2.
inline constexpr double kDomainLength = 2.0 * kPi;
inline constexpr double kDomainArea = kDomainLength * kDomainLength;

bool is_power_of_two(int n);
/// Throws Error unless n is a power of two >= 4.
void require_grid_size(int n);

enum class Axis { X, Y };

/// Real samples of a field on the n x n periodic grid. Row-major with rows
/// along y: values[iy * n + ix] sits at (x_ix, y_iy), x_i = -pi + 2 pi i / n.
class PhysicalField {
 public:
  PhysicalField() = default;
  explicit PhysicalField(int n);

  template <class F>
  static PhysicalField sample(int n, F&& f) {
    PhysicalField out(n);
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) out.at(ix, iy) = f(node(ix, n), node(iy, n));
    return out;
  }

  static double node(int i, int n) { return -kPi + kDomainLength * i / n; }
  double spacing() const { return kDomainLength / n_; }

  int n() const { return n_; }
  double& at(int ix, int iy) { return values_[static_cast<std::size_t>(iy) * n_ + ix]; }
  double at(int ix, int iy) const { return values_[static_cast<std::size_t>(iy) * n_ + ix]; }
  /// Periodic access; indices may be any integer.
  double wrapped(int ix, int iy) const;
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double max_abs() const;

 private:
  int n_ = 0;
  std::vector<double> values_;
};

/// Fourier coefficients of a real field on the n x n grid.
///
/// Storage is the half spectrum: kx in [0, n/2], ky in [-n/2, n/2). The
/// negative-kx half follows from Hermitian symmetry. Coefficients are taken
/// with respect to the physical coordinate, so f(x) = sum_k c_k exp(i k.x)
/// and c_(0,0) is the field mean.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(int n);

  int n() const { return n_; }
  int nkx() const { return n_ / 2 + 1; }
  bool empty() const { return n_ == 0; }
  std::size_t size() const { return data_.size(); }

  /// Storage index (ikx in [0, n/2], iky in [0, n)).
  Complex& at(int ikx, int iky) { return data_[static_cast<std::size_t>(iky) * nkx() + ikx]; }
  const Complex& at(int ikx, int iky) const {
    return data_[static_cast<std::size_t>(iky) * nkx() + ikx];
  }
  /// Wavenumber of storage row iky.
  int ky_of(int iky) const { return iky < n_ / 2 ? iky : iky - n_; }

  /// Coefficient for integer wavenumbers, either sign, |k| <= n/2.
  Complex coeff(int kx, int ky) const;
  /// Sets c_k (and c_-k = conj(c_k) where both are stored).
  void set_coeff(int kx, int ky, Complex value);

  std::span<Complex> data() { return data_; }
  std::span<const Complex> data() const { return data_; }

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double s);
  /// this += s * other
  SpectralField& axpy(double s, const SpectralField& other);

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
  friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
  SpectralField operator-() const { return (*this) * -1.0; }

  bool is_finite() const;

 private:
  int n_ = 0;
  std::vector<Complex> data_;
};

/// Forward transform; divides by n^2 so c_(0,0) is the mean.
SpectralField transform(const PhysicalField& field);
PhysicalField inverse(const SpectralField& field);

/// Multiplies by (i k_axis)^order; odd orders zero the Nyquist row/column.
SpectralField derivative(const SpectralField& field, Axis axis, int order = 1);
SpectralField laplacian(const SpectralField& field);

/// 2/3 rule: true when mode k survives dealiasing on grid n.
inline bool dealias_keeps(int kx, int ky, int n) {
  return 3 * std::abs(kx) <= n && 3 * std::abs(ky) <= n;
}
void dealias(SpectralField& field);
SpectralField dealiased(SpectralField field);

/// Leray projection onto divergence-free fields (k = 0 untouched).
std::pair<SpectralField, SpectralField> leray_project(const SpectralField& ux,
                                                      const SpectralField& uy);
void leray_project_inplace(SpectralField& ux, SpectralField& uy);
SpectralField divergence(const SpectralField& ux, const SpectralField& uy);

/// Keeps modes with |kx|, |ky| < n_dst / 2.
SpectralField truncate(const SpectralField& field, int n_dst);

/// L2(Omega) inner product, Omega = (-pi, pi)^2, evaluated by Parseval.
double inner_product(const SpectralField& f, const SpectralField& g);
double l2_norm(const SpectralField& f);
/// Largest coefficient modulus.
double max_abs(const SpectralField& f);

/// Physical-space quadrature of f*g over Omega (rectangle rule).
double quadrature_inner_product(const PhysicalField& f, const PhysicalField& g);

}  // namespace siv
