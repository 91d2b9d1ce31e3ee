#include "siv/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

namespace siv {

namespace {

// FFTW's planner is not thread safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Plans {
  int n;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  explicit Plans(int n_) : n(n_) {
    const std::size_t nr = static_cast<std::size_t>(n) * n;
    const std::size_t nc = static_cast<std::size_t>(n) * (n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    real = fftw_alloc_real(nr);
    spec = fftw_alloc_complex(nc);
    // ESTIMATE keeps plan selection (and therefore rounding) reproducible.
    forward = fftw_plan_dft_r2c_2d(n, n, real, spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(n, n, spec, real, FFTW_ESTIMATE);
  }
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spec);
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
};

Plans& plans_for(int n) {
  thread_local std::map<int, std::unique_ptr<Plans>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Plans>(n);
  return *slot;
}

void require_same_grid(const SpectralField& a, const SpectralField& b) {
  if (a.n() != b.n())
    throw Error("grid mismatch: " + std::to_string(a.n()) + " vs " + std::to_string(b.n()));
}

}  // namespace

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void require_grid_size(int n) {
  if (n < 4 || !is_power_of_two(n))
    throw Error("grid size must be a power of two >= 4, got " + std::to_string(n));
}

PhysicalField::PhysicalField(int n) : n_(n) {
  require_grid_size(n);
  values_.assign(static_cast<std::size_t>(n) * n, 0.0);
}

double PhysicalField::wrapped(int ix, int iy) const {
  ix %= n_;
  iy %= n_;
  if (ix < 0) ix += n_;
  if (iy < 0) iy += n_;
  return at(ix, iy);
}

double PhysicalField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

SpectralField::SpectralField(int n) : n_(n) {
  require_grid_size(n);
  data_.assign(static_cast<std::size_t>(n) * (n / 2 + 1), Complex{});
}

Complex SpectralField::coeff(int kx, int ky) const {
  const int half = n_ / 2;
  if (std::abs(kx) > half || std::abs(ky) > half) return {};
  if (kx < 0) return std::conj(coeff(-kx, -ky));
  const int iky = ((ky % n_) + n_) % n_;
  return at(kx, iky);
}

void SpectralField::set_coeff(int kx, int ky, Complex value) {
  const int half = n_ / 2;
  if (std::abs(kx) > half || std::abs(ky) > half) throw Error("wavenumber out of range");
  if (kx < 0) {
    kx = -kx;
    ky = -ky;
    value = std::conj(value);
  }
  const auto row = [&](int k) { return ((k % n_) + n_) % n_; };
  at(kx, row(ky)) = value;
  if (kx == 0 || kx == half) at(kx, row(-ky)) = std::conj(value);
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (auto& c : data_) c *= s;
  return *this;
}

SpectralField& SpectralField::axpy(double s, const SpectralField& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

bool SpectralField::is_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](const Complex& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
}

SpectralField transform(const PhysicalField& field) {
  const int n = field.n();
  require_grid_size(n);
  Plans& p = plans_for(n);
  std::memcpy(p.real, field.values().data(), sizeof(double) * field.values().size());
  fftw_execute(p.forward);
  SpectralField out(n);
  const double scale = 1.0 / (static_cast<double>(n) * n);
  const int nkx = out.nkx();
  for (int iky = 0; iky < n; ++iky) {
    for (int ikx = 0; ikx < nkx; ++ikx) {
      const fftw_complex& c = p.spec[static_cast<std::size_t>(iky) * nkx + ikx];
      // Nodes start at -pi: the shift contributes (-1)^(kx + ky).
      const double sign = ((ikx + iky) & 1) ? -scale : scale;
      out.at(ikx, iky) = Complex(c[0] * sign, c[1] * sign);
    }
  }
  return out;
}

PhysicalField inverse(const SpectralField& field) {
  const int n = field.n();
  require_grid_size(n);
  Plans& p = plans_for(n);
  const int nkx = field.nkx();
  for (int iky = 0; iky < n; ++iky) {
    for (int ikx = 0; ikx < nkx; ++ikx) {
      const Complex c = field.at(ikx, iky);
      const double sign = ((ikx + iky) & 1) ? -1.0 : 1.0;
      auto& dst = p.spec[static_cast<std::size_t>(iky) * nkx + ikx];
      dst[0] = sign * c.real();
      dst[1] = sign * c.imag();
    }
  }
  fftw_execute(p.backward);
  PhysicalField out(n);
  std::memcpy(out.values().data(), p.real, sizeof(double) * out.values().size());
  return out;
}

SpectralField derivative(const SpectralField& field, Axis axis, int order) {
  if (order < 1) throw Error("derivative order must be >= 1");
  const int n = field.n();
  const int half = n / 2;
  SpectralField out(n);
  const bool odd = (order % 2) == 1;
  // (i k)^order = i^order k^order
  static constexpr Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const Complex ipow = kIPow[order % 4];
  for (int iky = 0; iky < n; ++iky) {
    const int ky = field.ky_of(iky);
    for (int ikx = 0; ikx < field.nkx(); ++ikx) {
      const int k = axis == Axis::X ? ikx : ky;
      if (odd && std::abs(k) == half) continue;
      out.at(ikx, iky) = field.at(ikx, iky) * ipow * std::pow(static_cast<double>(k), order);
    }
  }
  return out;
}

SpectralField laplacian(const SpectralField& field) {
  const int n = field.n();
  SpectralField out(n);
  for (int iky = 0; iky < n; ++iky) {
    const double ky = field.ky_of(iky);
    for (int ikx = 0; ikx < field.nkx(); ++ikx)
      out.at(ikx, iky) = -(ikx * ikx + ky * ky) * field.at(ikx, iky);
  }
  return out;
}

void dealias(SpectralField& field) {
  const int n = field.n();
  for (int iky = 0; iky < n; ++iky) {
    const int ky = field.ky_of(iky);
    for (int ikx = 0; ikx < field.nkx(); ++ikx)
      if (!dealias_keeps(ikx, ky, n)) field.at(ikx, iky) = Complex{};
  }
}

SpectralField dealiased(SpectralField field) {
  dealias(field);
  return field;
}

void leray_project_inplace(SpectralField& ux, SpectralField& uy) {
  require_same_grid(ux, uy);
  const int n = ux.n();
  for (int iky = 0; iky < n; ++iky) {
    const double ky = ux.ky_of(iky);
    for (int ikx = 0; ikx < ux.nkx(); ++ikx) {
      const double kx = ikx;
      const double k2 = kx * kx + ky * ky;
      if (k2 == 0.0) continue;
      Complex& a = ux.at(ikx, iky);
      Complex& b = uy.at(ikx, iky);
      const Complex kdotu = (kx * a + ky * b) / k2;
      a -= kx * kdotu;
      b -= ky * kdotu;
    }
  }
}

std::pair<SpectralField, SpectralField> leray_project(const SpectralField& ux,
                                                      const SpectralField& uy) {
  auto out = std::make_pair(ux, uy);
  leray_project_inplace(out.first, out.second);
  return out;
}

SpectralField divergence(const SpectralField& ux, const SpectralField& uy) {
  return derivative(ux, Axis::X) + derivative(uy, Axis::Y);
}

SpectralField truncate(const SpectralField& field, int n_dst) {
  const int n_src = field.n();
  require_grid_size(n_dst);
  if (n_dst > n_src)
    throw Error("truncate: destination grid " + std::to_string(n_dst) + " exceeds source " +
                std::to_string(n_src));
  SpectralField out(n_dst);
  const int half = n_dst / 2;
  for (int iky = 0; iky < n_dst; ++iky) {
    const int ky = out.ky_of(iky);
    if (std::abs(ky) >= half) continue;
    const int src_row = ky < 0 ? ky + n_src : ky;
    for (int ikx = 0; ikx < half; ++ikx) out.at(ikx, iky) = field.at(ikx, src_row);
  }
  return out;
}

double inner_product(const SpectralField& f, const SpectralField& g) {
  require_same_grid(f, g);
  const int n = f.n();
  const int half = n / 2;
  double sum = 0.0;
  for (int iky = 0; iky < n; ++iky) {
    for (int ikx = 0; ikx < f.nkx(); ++ikx) {
      // Interior kx columns stand for both k and -k.
      const double weight = (ikx == 0 || ikx == half) ? 1.0 : 2.0;
      const Complex a = f.at(ikx, iky);
      const Complex b = g.at(ikx, iky);
      sum += weight * (a.real() * b.real() + a.imag() * b.imag());
    }
  }
  return kDomainArea * sum;
}

double l2_norm(const SpectralField& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

double max_abs(const SpectralField& f) {
  double m = 0.0;
  for (const auto& c : f.data()) m = std::max(m, std::abs(c));
  return m;
}

double quadrature_inner_product(const PhysicalField& f, const PhysicalField& g) {
  if (f.n() != g.n()) throw Error("grid mismatch in quadrature");
  double sum = 0.0;
  const auto a = f.values();
  const auto b = g.values();
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  const double h = f.spacing();
  return sum * h * h;
}

}  // namespace siv
