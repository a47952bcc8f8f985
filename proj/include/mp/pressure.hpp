#pragma once

// Near-field/far-field pressure decomposition. The pressure of the coupled
// system solves -lap p = div div (u (x) u); localizing the source with a
// smooth cutoff phi (1 on B(c, rho/2), 0 outside B(c, rho)) splits
//
//   p - mean(p) = near + far,   near = (-lap)^{-1} div div (phi u (x) u),
//
// and the far part is harmonic on the inner ball B(c, rho/2), because its
// source (1 - phi) u (x) u vanishes identically there. The inverse Laplacian
// here is the torus one (mean-zero convention), so the decomposition
// identities are algebraic and exact; the companion free-space kernel
// estimate |K(x-y) - K(-y)| <= C |x| / |y|^4 for |x| < 2r, |y| > 3r is pure
// math and is probed on analytic samples instead of fields.

#include <array>
#include <cstdint>

#include "mp/grid.hpp"

namespace mp {

struct PressureSplit {
  ScalarField near;  // cutoff Riesz part
  ScalarField far;   // remainder; harmonic on B(center, rho/2)
  std::array<double, 3> center{};
  double rho = 0.0;
  ScalarField phi;  // the cutoff that was used
};

// Radial plateau cutoff: exactly 1 for |x - center| <= rho/2, exactly 0 for
// |x - center| >= rho, C-infinity in between (built from the exp(-1/t)
// mollifier quotient). Distances are minimum-image.
ScalarField bump_cutoff(const GridSpec& g, const std::array<double, 3>& center,
                        double rho);

// Splits p into the cutoff Riesz part and the harmonic remainder. p is
// mean-adjusted first; near + far reproduces p - mean(p) exactly. rho must
// satisfy 0 < rho < box_length / 4 so the cutoff ball cannot wrap onto
// itself. With unity_cutoff the split degenerates: phi = 1 everywhere and
// near is the full recovered pressure of u (test mode).
PressureSplit split_pressure(const VectorField& u, const ScalarField& p,
                             const std::array<double, 3>& center, double rho,
                             bool unity_cutoff = false);

// sup |lap far| over grid points within min-image distance `radius` of the
// split center; the harmonicity defect of the far part.
double max_far_laplacian(const PressureSplit& s, double radius);

// Free-space kernel of div div / (-lap): K_ij(z) = d_i d_j (1 / (4 pi |z|)),
// row-major, valid away from z = 0.
std::array<double, 9> pressure_kernel(const std::array<double, 3>& z);

// Frobenius norm of K(x - y) - K(-y).
double kernel_difference(const std::array<double, 3>& x,
                         const std::array<double, 3>& y);

struct KernelProbe {
  double r = 0.0;
  std::size_t samples = 0;
  double fitted = 0.0;  // max |K(x-y) - K(-y)| |y|^4 / |x| over the samples
  double bound = 0.0;   // configured C_K
  bool pass = false;    // fitted <= bound
  std::array<double, 3> worst_x{}, worst_y{};
};

// Samples x in B(0, 2r), y outside B(0, 3r) (log-uniform radii up to 30r,
// plus deterministic aligned near-corner pairs where the ratio peaks) and
// reports the fitted constant of the kernel difference bound.
KernelProbe verify_kernel_bound(double r, std::size_t samples,
                                double bound = 100.0, std::uint64_t seed = 0);

}  // namespace mp
