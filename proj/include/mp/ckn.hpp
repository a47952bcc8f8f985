// Scaled local quantities on parabolic balls, the epsilon-regularity verdict,
// the local energy inequality residual with the Scheffer-type test function,
// and the type-I / L^3-concentration monitors.
//
// A trajectory here is a vector of recorded states with strictly increasing
// times on one shared grid. Conventions, fixed once:
//  * spatial integrals restrict to the cells whose centers lie in the ball
//    (minimum-image metric, strict inequality) with weight h^3, so every
//    reported integral is the exact quadrature of that discrete ball and a
//    lower bound of the continuum integral up to the O(h) boundary layer;
//  * time integrals are trapezoid sums over the recorded slices that fall
//    inside the window (no interpolation at the window edges; the effective
//    window is [first slice in, last slice in]);
//  * sups over continuum times/centers/radii are maxima over the recorded
//    slices / the configured center lattice / dyadic radii, and are therefore
//    lower bounds of the continuum sups;
//  * reductions are fixed-order pairwise sums, so results are independent of
//    the thread count;
//  * a slice that carries no pressure gets the spectral recovery of the
//    global pressure problem; the harmonic correction of the local problem
//    enters only through the mean-adjusted term of E_r.
#pragma once

#include <array>
#include <functional>
#include <limits>
#include <vector>

#include "mp/grid.hpp"
#include "mp/solver.hpp"

namespace mp {

// Two spacetime cylinder flavors over the ball B(x0, r):
//   backward  ]t0 - r^2, t0[        (the one epsilon-regularity quantifies)
//   centered  ]t0 - r^2, t0 + r^2[
enum class BallFlavor { backward, centered };

struct ParabolicBall {
  double t0 = 0.0;
  std::array<double, 3> x0 = {0.0, 0.0, 0.0};
  double r = 0.0;
  BallFlavor flavor = BallFlavor::backward;

  // Throws config_error unless r > 0 (finite) and, for the backward flavor,
  // r^2 < t0 so the cylinder does not reach behind the initial time.
  void validate() const;

  double t_lo() const { return t0 - r * r; }
  double t_hi() const { return flavor == BallFlavor::backward ? t0 : t0 + r * r; }
};

enum class Verdict { regular_candidate, singular_candidate, inconclusive };

// The four scale-normalized quantities on Q = window x B(x0, r),
//   A_r      = sup_s (1/r)   int_B |u|^2
//   alpha_r  =       (1/r)  iint_Q |grad u|^2
//   lambda_r =       (1/r^2) iint_Q |u|^3
//   P_r      =       (1/r^2) iint_Q |p|^{3/2}
// their rescalings Lambda_r = r^{-3(1-5/tau0)} lambda_r, Pbb_r likewise from
// P_r, and the iteration quantity O_r = Lambda_r + kappa^6 Pbb_r (held as the
// literal expression, so the algebra is machine-exact). E_r adds the
// mean-adjusted pressure mass to A_r + alpha_r, see e_r_functional.
struct CknReport {
  ParabolicBall ball;
  double A_r = 0.0;
  double alpha_r = 0.0;
  double lambda_r = 0.0;
  double P_r = 0.0;
  double Lambda_r = 0.0;
  double Pbb_r = 0.0;
  double O_r = 0.0;
  double kappa = 0.0;
  double tau0 = 0.0;
  double E_r = 0.0;
  Verdict verdict = Verdict::inconclusive;
  bool clipped = false;  // time window cut back to the recorded range
};

// Evaluates the report over the recorded trajectory. kappa = 0 requests the
// default solve_kappa(1, tau0); explicit kappa must lie in (0, 1/2) and tau0
// in (5, 15/2]. A window poking out of the recorded time range is clipped
// and flagged. The verdict is filled at the default threshold 1e-2; rerun
// epsilon_regularity_verdict for another threshold. Throws config_error when
// fewer than two recorded slices meet the (clipped) window or the ball
// contains no grid cells.
CknReport ckn_quantities(const std::vector<State>& traj,
                         const ParabolicBall& ball, double kappa = 0.0,
                         double tau0 = 6.0);

// Dichotomy on the unscaled smallness quantity lambda_r + P_r: strictly
// below eps -> regular_candidate, otherwise singular_candidate (equality is
// singular, the hypothesis needs strict smallness). Meaningful on backward
// balls; the flavor is the caller's responsibility and is not re-checked.
// Never throws, never returns inconclusive.
Verdict epsilon_regularity_verdict(const CknReport& report, double eps = 1e-2);

// Measured constant of the interpolation bound lambda_r^{1/3} <=
// C (A_r + alpha_r)^{1/2}: returns the ratio of the two sides, 0 when both
// vanish. Throws config_error when the right side vanishes but the left
// does not (no finite constant exists).
double lemma_b1_ratio(const CknReport& report);

// Origin-centered three-term functional over s in [window_lo, window_hi]:
//   sup_s (1/r) int_{B(0,r)} |u|^2 + (1/r) iint |grad u|^2
//     + (1/r^2) iint |p - mean_B p(s)|^{3/2},
// the per-slice ball mean standing in for the harmonic correction of the
// local pressure. The window must lie inside the recorded range. Matches
// CknReport.E_r on the same ball and window by construction, but is computed
// by an independent full-scan path.
double e_r_functional(const std::vector<State>& traj, double r,
                      double window_lo, double window_hi);

// A nonnegative test function with closed-form derivatives, compactly
// supported in [t_lo, t_hi] x B(x0, radius) (minimum-image metric); heat is
// the combination (d_s + Delta_y) phi used by the local energy inequality.
struct TestFunction {
  std::function<double(double, const std::array<double, 3>&)> phi;
  std::function<std::array<double, 3>(double, const std::array<double, 3>&)> grad;
  std::function<double(double, const std::array<double, 3>&)> heat;
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::array<double, 3> x0 = {0.0, 0.0, 0.0};
  double radius = 0.0;
};

// Per-recorded-time pieces of the local energy inequality
//   int |u|^2 phi(t) + 2 iint_{s<t} |grad u|^2 phi
//     <= iint (d_s phi + lap phi) |u|^2 + 2 iint p (u . grad phi)
//      + iint |u|^2 (u . grad phi) + iint (curl w) . (phi u),
// all running integrals as trapezoid prefixes from the first recorded slice.
// residual[j] = rhs(t_j) - lhs(t_j); nonnegative residuals mean the
// inequality holds, and smooth resolved trajectories give residuals that
// vanish with the discretization since they satisfy it with equality.
struct LocalEnergyTerms {
  std::vector<double> t;
  std::vector<double> instant;      // int |u|^2 phi at t_j
  std::vector<double> dissipation;  // 2 iint |grad u|^2 phi
  std::vector<double> heat;         // iint (d_s + lap) phi |u|^2
  std::vector<double> pressure;     // 2 iint p (u . grad phi)
  std::vector<double> transport;    // iint |u|^2 (u . grad phi)
  std::vector<double> spin;         // iint (curl w) . (phi u)
  std::vector<double> residual;
  double min_residual = 0.0;
  double scale = 0.0;  // largest term magnitude, for relative tolerances
};

// Throws config_error when the test function's time support escapes the
// recorded slab (its spatial support always fits the torus by construction).
LocalEnergyTerms local_energy_terms(const std::vector<State>& traj,
                                    const TestFunction& fn);

// min_j residual[j], the worst signed slack over the recorded times.
double local_energy_residual(const std::vector<State>& traj,
                             const TestFunction& fn);

// Backward heat kernel factor of the Scheffer function and its closed-form
// derivatives: value = g_a(x0 - y) with a = 4 r^2 + t0 - s, grad the
// y-gradient, ds the s-derivative, lap the y-Laplacian. ds + lap = 0
// identically ((d_s + Delta_y) g_{4r^2 + t0 - s} = 0), which is what makes
// the dominant part of (d_s + Delta) phi cancel exactly.
struct HeatFactor {
  double value = 0.0;
  std::array<double, 3> grad = {0.0, 0.0, 0.0};
  double ds = 0.0;
  double lap = 0.0;
};
HeatFactor heat_factor(const ParabolicBall& ball, double s,
                       const std::array<double, 3>& y,
                       double box_length = 6.283185307179586476925286766559);

// The Scheffer-type test function for the ball's (t0, x0, r) at outer scale
// rho,
//   phi(s,y) = r^2 gamma((s-t0)/rho^2, (y-x0)/rho) theta((s-t0)/r^2)
//              g_{(4r^2 + t0 - s)}(x0 - y),
// with gamma(sigma, yhat) = chi(sigma) beta(|yhat|) a smooth bump equal to 1
// on the backward unit half ball sigma in [-1/4, 0], |yhat| <= 1/2 and
// supported in sigma >= -1, and theta the future cutoff (1 below 1, 0 above
// 2). All derivatives are closed-form, with (d_s + Delta) g = 0 used
// symbolically. Support: [t0 - rho^2, t0 + 2 r^2] x B(x0, rho); zero outside
// exactly. The fitted constants sample the four bounds of the construction:
//   phi >= c_lower / r on Q_r,     phi <= c_upper / r on bold-Q_rho,
//   |grad phi| <= c_grad / r^2,    |(d_s + lap) phi| <= c_heat r^2 / rho^5,
// the last two over bold-Q_rho; samples controls the sampling lattice.
struct SchefferFunction {
  TestFunction fn;
  double c_lower = 0.0;
  double c_upper = 0.0;
  double c_grad = 0.0;
  double c_heat = 0.0;
};
SchefferFunction scheffer_test_function(
    const ParabolicBall& ball, double rho, int samples = 24,
    double box_length = 6.283185307179586476925286766559);

// sup over the center lattice (every center_stride-th grid point per axis),
// dyadic radii r0 / 2^j down to the cell spacing, and recorded times in
// ]T - r^2, T] of (1/r) int_{B(x0,r)} |u|^2, with the argmax triple.
// Ties resolve to the first candidate in scan order (radii descending, then
// time, then centers), so the report is deterministic.
struct TypeIReport {
  double M = 0.0;
  std::array<double, 3> x0 = {0.0, 0.0, 0.0};
  double r = 0.0;
  double t = 0.0;
  double r0 = 0.0;
  double T = 0.0;
};
// Requires r0 > 0, r0^2 < T, center_stride >= 1; throws config_error when no
// recorded time falls in ]T - r0^2, T].
TypeIReport type_one_monitor(const std::vector<State>& traj, double r0,
                             double T, int center_stride = 2);

// Shrinking-ball L^3 mass toward the focusing time T: for each recorded
// t < T, radius(t) = sqrt((T - t) / S) and mass(t) = int_{B(center,radius)}
// |u|^3. The series stops with truncated = true once the radius falls below
// one cell spacing. pass holds when every resolved mass with t in
// ]T - delta, T[ meets mass >= eps and at least one such time exists.
struct ConcentrationSeries {
  double T = 0.0;
  double S = 0.0;
  double eps = 0.0;
  std::vector<double> t;
  std::vector<double> radius;
  std::vector<double> mass;
  bool truncated = false;
  bool pass = false;
};
// Requires 0 < S < 1 and delta > 0. center defaults to the origin of the
// box; data focusing elsewhere (the built-in shrinking profile focuses at
// the box center) passes its own focusing point.
ConcentrationSeries concentration_monitor(
    const std::vector<State>& traj, double T, double S, double eps,
    double delta = std::numeric_limits<double>::infinity(),
    const std::array<double, 3>& center = {0.0, 0.0, 0.0});

}  // namespace mp
