#pragma once

#include <cmath>
#include <random>

#include "siv/forward.hpp"

namespace siv::testing {

// Dealiased random field with O(1) coefficients up to |k| <= kmax.
inline SpectralField random_field(int n, unsigned seed, int kmax = 0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  if (kmax == 0) kmax = n / 3;
  SpectralField f(n);
  for (int kx = 0; kx <= kmax; ++kx)
    for (int ky = -kmax; ky <= kmax; ++ky) {
      if ((kx == 0 && ky < 0) || !dealias_keeps(kx, ky, n) || 2 * std::abs(ky) >= n) continue;
      Complex c{g(rng), g(rng)};
      if (kx == 0 && ky == 0) c = {c.real(), 0.0};
      f.set_coeff(kx, ky, c);
    }
  return f;
}

inline ControlVector random_control(int n, unsigned seed, double scale = 1.0) {
  ControlVector c{random_field(n, seed, 4), random_field(n, seed + 1, 4), random_field(n, seed + 2, 4)};
  c.project();
  c *= scale / norm(c);
  return c;
}

// Taylor-Green vortex u = A (sin x cos y, -cos x sin y), optionally carried
// by a uniform stream (U, V).
inline FlowState taylor_green(int n, double amplitude, double U = 0.0, double V = 0.0) {
  FlowState s = FlowState::zero(n);
  s.ux = transform(PhysicalField::sample(n, [&](double x, double y) { return U + amplitude * std::sin(x) * std::cos(y); }));
  s.uy = transform(PhysicalField::sample(n, [&](double x, double y) { return V - amplitude * std::cos(x) * std::sin(y); }));
  return s;
}

inline double max_abs_diff(const PhysicalField& a, const PhysicalField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace siv::testing
