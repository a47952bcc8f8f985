// Helpers shared by the test binaries: manufactured fields with known
// closed forms and small comparison utilities.
#pragma once

#include <array>
#include <cmath>
#include <string>

#include "mp/grid.hpp"

namespace ts {

inline mp::GridSpec grid(int n, double L = 2.0 * M_PI) { return mp::GridSpec{n, L}; }

inline double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

inline double max_diff(const mp::ScalarField& a, const mp::ScalarField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.s.size(); ++i)
    m = std::max(m, std::abs(a.s[i] - b.s[i]));
  return m;
}

inline double max_diff(const mp::VectorField& a, const mp::VectorField& b) {
  double m = 0.0;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < a.c[c].size(); ++i)
      m = std::max(m, std::abs(a.c[c][i] - b.c[c][i]));
  return m;
}

// Shear flow u = amp*(sin(a x3), 0, 0): divergence-free, self-advection and
// pressure vanish identically.
inline mp::VectorField shear_x3(const mp::GridSpec& g, double amp = 1.0, int a = 1) {
  return mp::sample_vector(g, [amp, a](double, double, double x3) {
    return std::array<double, 3>{amp * std::sin(a * x3), 0.0, 0.0};
  });
}

// Planar vortex array u = amp*(cos(a x1) sin(a x2), -sin(a x1) cos(a x2), 0);
// divergence-free; the associated pressure is -amp^2/4 (cos 2a x1 + cos 2a x2).
inline mp::VectorField taylor_green(const mp::GridSpec& g, double amp = 1.0, int a = 1) {
  return mp::sample_vector(g, [amp, a](double x1, double x2, double) {
    return std::array<double, 3>{amp * std::cos(a * x1) * std::sin(a * x2),
                                 -amp * std::sin(a * x1) * std::cos(a * x2), 0.0};
  });
}

inline mp::ScalarField taylor_green_pressure(const mp::GridSpec& g, double amp = 1.0,
                                             int a = 1) {
  return mp::sample_scalar(g, [amp, a](double x1, double x2, double) {
    return -amp * amp / 4.0 * (std::cos(2 * a * x1) + std::cos(2 * a * x2));
  });
}

}  // namespace ts
