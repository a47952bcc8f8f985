// Periodic-box sampled fields, spectral transforms, differential operators.
//
// Conventions, fixed once:
//  * layout: axis-1 fastest, idx = i1 + n*(i2 + n*i3), samples at x_i = h*i.
//  * forward transform is the DFT divided by n^3, so mode(0) is the spatial
//    mean; the inverse is the plain unnormalized synthesis.
//  * spectral storage is the conjugate-symmetric half along axis 1
//    (bins k1 = 0..n/2); mode() resolves the other half by conjugation.
//  * wavevector kappa = (2*pi/L) * k, integer k in [-n/2, n/2).
//  * every differential operator annihilates the Nyquist shell (any component
//    with |k| = n/2). Derivatives of such modes are not representable as real
//    fields, and dropping the shell in all operators keeps the operator
//    identities exact for arbitrary input. Transforms themselves do not
//    filter, so round trips preserve the shell.
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include "mp/util.hpp"

namespace mp {

struct GridSpec {
  int n = 0;                      // points per axis, even, >= 4
  double box_length = 6.283185307179586476925286766559;

  void validate() const;          // throws config_error
  double h() const { return box_length / n; }
  std::size_t cells() const { return static_cast<std::size_t>(n) * n * n; }
  std::size_t idx(int i1, int i2, int i3) const {
    return static_cast<std::size_t>(i1) +
           static_cast<std::size_t>(n) * (i2 + static_cast<std::size_t>(n) * i3);
  }
  double coord(int i) const { return h() * i; }
  std::array<double, 3> point(int i1, int i2, int i3) const {
    return {coord(i1), coord(i2), coord(i3)};
  }

  // Half-complex spectral layout: bins (k1, j2, j3), k1 = 0..n/2 fastest.
  int nh() const { return n / 2 + 1; }
  std::size_t spectral_size() const {
    return static_cast<std::size_t>(nh()) * n * n;
  }
  std::size_t sidx(int k1, int j2, int j3) const {
    return static_cast<std::size_t>(k1) +
           static_cast<std::size_t>(nh()) * (j2 + static_cast<std::size_t>(n) * j3);
  }
  int signed_k(int j) const { return 2 * j < n ? j : j - n; }
  bool nyquist(int j) const { return 2 * j == n; }
  double kappa(int j) const {
    return 2.0 * M_PI / box_length * signed_k(j);
  }

  bool operator==(const GridSpec& o) const {
    return n == o.n && box_length == o.box_length;
  }
};

struct ScalarField {
  GridSpec grid;
  std::vector<double> s;
};

struct VectorField {
  GridSpec grid;
  std::array<std::vector<double>, 3> c;
};

struct SpectralField {
  GridSpec grid;
  std::vector<std::complex<double>> m;
};

using SpectralTriple = std::array<SpectralField, 3>;

ScalarField make_scalar(const GridSpec& g);
VectorField make_vector(const GridSpec& g);
SpectralField make_spectral(const GridSpec& g);

// Samples an analytic function at the grid points.
ScalarField sample_scalar(const GridSpec& g,
                          const std::function<double(double, double, double)>& f);
VectorField sample_vector(
    const GridSpec& g,
    const std::function<std::array<double, 3>(double, double, double)>& f);

void check_finite(const ScalarField& f, const char* what);
void check_finite(const VectorField& f, const char* what);

// Transforms. Forward rejects non-finite input.
SpectralField to_spectral(const ScalarField& f);
ScalarField from_spectral(const SpectralField& f);
SpectralTriple to_spectral(const VectorField& f);
VectorField from_spectral(const SpectralTriple& f);

// Mode accessor for integer wavevector k in [-n/2, n/2)^3; resolves the
// conjugate half so mode(-k) == conj(mode(k)) by construction.
std::complex<double> mode(const SpectralField& f, int k1, int k2, int k3);

// Visits every stored bin in storage order with its wavevector components;
// ny marks bins on the Nyquist shell that differential operators drop.
template <class Fn>
void for_each_spectral_bin(const GridSpec& g, Fn&& fn) {
  const int n = g.n, nh = g.nh();
  std::size_t id = 0;
  for (int j3 = 0; j3 < n; ++j3) {
    const double k3 = g.kappa(j3);
    const bool ny3 = g.nyquist(j3);
    for (int j2 = 0; j2 < n; ++j2) {
      const double k2 = g.kappa(j2);
      const bool ny23 = ny3 || g.nyquist(j2);
      for (int j1 = 0; j1 < nh; ++j1, ++id)
        fn(id, g.kappa(j1), k2, k3, ny23 || g.nyquist(j1));
    }
  }
}

// Differential operators, physical in/out. Spectral symbols i*kappa,
// i*kappa wedge, -|kappa|^2, -kappa (kappa .), i*kappa; Nyquist shell dropped.
ScalarField divergence(const VectorField& f);
VectorField curl(const VectorField& f);
VectorField laplacian(const VectorField& f);
ScalarField laplacian(const ScalarField& f);
VectorField grad_div(const VectorField& f);
VectorField gradient(const ScalarField& f);
VectorField leray_project(const VectorField& f);

// Gradient tensor d_j u_i, entry (i, j) at index 3*i + j.
std::array<ScalarField, 9> gradient_tensor(const VectorField& f);

// Spectral-level variants used on hot paths; same symbols and conventions.
SpectralField divergence_spec(const SpectralTriple& f);
SpectralTriple curl_spec(const SpectralTriple& f);
SpectralTriple laplacian_spec(const SpectralTriple& f);
SpectralTriple grad_div_spec(const SpectralTriple& f);
SpectralTriple gradient_spec(const SpectralField& s);
void leray_spec(SpectralTriple& f);  // in place; k = 0 passed through

// 2/3-rule truncation. Cutoff K keeps alias images of band-limited products
// strictly outside the retained band: K = floor((n-1)/3) < n/3.
int dealias_cutoff(int n);
void dealias(SpectralField& f, int cutoff);
void dealias(SpectralTriple& f, int cutoff);

// Norms and inner products; all reductions are fixed-order pairwise sums.
double linf(const ScalarField& f);
double linf(const VectorField& f);
double l2sq(const ScalarField& f);   // h^3-weighted sum of squares
double l2sq(const VectorField& f);
double l2(const ScalarField& f);
double l2(const VectorField& f);
double inner(const VectorField& a, const VectorField& b);

// Parseval sums: L^3 * sum_k |f_k|^2 over the full (reflected) mode set.
// Grid-quadrature L^q norms, q >= 1: (h^3 sum |f|^q)^(1/q); the vector form
// uses the pointwise euclidean magnitude.
double lq_norm(const ScalarField& f, double q);
double lq_norm(const VectorField& f, double q);

// Shortest displacement and distance between two points on the torus.
std::array<double, 3> min_image(const GridSpec& g, const std::array<double, 3>& a,
                                const std::array<double, 3>& b);
double min_image_dist(const GridSpec& g, const std::array<double, 3>& a,
                      const std::array<double, 3>& b);

// Discretized periodic ball B(x0, r): the cells whose centers lie within
// min-image distance < r of x0 (strict, so each cell contributes weight h^3
// to a lower bound of the continuum integral). Indices come back in the
// fixed axis-1-fastest scan order. Throws for r <= 0.
std::vector<std::size_t> ball_cells(const GridSpec& g,
                                    const std::array<double, 3>& x0, double r);

// Offset stencil for balls centered at grid points: per-axis index offsets
// o in [-(n/2), (n-1)/2] with |o| h < r componentwise and |o h| < r overall,
// ordered like a scan over the offset cube. Shifting a center index by the
// stencil (mod n) enumerates the same cells ball_cells would find for that
// center, without per-cell distance tests; shared by the radius sweeps.
std::vector<std::array<int, 3>> ball_offsets(const GridSpec& g, double r);

double l2sq_spec(const SpectralField& f);
double l2sq_spec(const SpectralTriple& f);
// L^3 * sum_k |kappa|^2 |f_k|^2, Nyquist shell excluded (operator-consistent).
double h1dot_sq_spec(const SpectralTriple& f);
double h1dot_sq(const VectorField& f);
// ||div f||_2^2 and the pairing integral (curl a) . b, both evaluated from
// spectral data with the operator convention (Nyquist dropped).
double divergence_sq_spec(const SpectralTriple& f);
double curl_inner_spec(const SpectralTriple& a, const SpectralTriple& b);

// Deterministic band-limited random fields: gaussian samples filtered to
// |k|_inf <= kmax, divergence-free on request, normalized to the amplitude
// in the sup norm.
ScalarField random_scalar(const GridSpec& g, std::uint64_t seed, int kmax,
                          double amplitude);
VectorField random_vector(const GridSpec& g, std::uint64_t seed, int kmax,
                          double amplitude, bool divfree);

}  // namespace mp
