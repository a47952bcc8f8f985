// Scalar certifiers for the two closure arguments of the local theory: the
// doubling bound for functions obeying f(t) <= a + b int_0^t (f + f^m) ds,
// and the geometric decay of the scale-indexed quantity O_r under the
// contraction map
//
//   O_{n+1} = (1/4) O_n + C kappa^{-15} O_n^{3/2} + (kappa^n r0)^gamma,
//   gamma = (9/4)(-1/2 + 5/tau0),
//
// together with the solver for the kappa smallness condition
//
//   C (kappa^{15/tau0} + kappa^{1+15/tau0} + kappa^{-2+15/tau0}) <= 1/4.
//
// Everything here is plain scalar arithmetic: no fields, no grids.
#pragma once

#include <limits>
#include <vector>

#include "mp/util.hpp"

namespace mp {

// Certificate for the doubling bound. The hypothesis is extremal on the ODE
//   f' = b (f + f^m),  f(0) = a,
// which the certifier integrates with an adaptive embedded Runge-Kutta pair
// (Dormand-Prince 5(4), relative tolerance 1e-12). Since f is increasing,
// the conclusion f <= 2a on [0, horizon] holds iff f(horizon) <= 2a, and the
// largest admissible coefficient is determined by the crossing time:
//   c_max = b (1 + a^{m-1}) * min(t_cross, T1),
// t_cross the first time with f = 2a (computed by integrating the reciprocal
// dt/df = 1 / (b (f + f^m)) from a to 2a, which needs no event detection).
// For m = 1 the ODE solves to f = a e^{2bt}, so t_cross = ln2 / (2b) and
// c_max = ln 2; that closed form is the regression oracle.
struct GronwallCert {
  double a = 0.0;
  double b = 0.0;
  double m = 1.0;
  double T1 = 0.0;
  double c_univ = 0.0;
  double horizon = 0.0;    // min(T1, c_univ / (b (1 + a^{m-1})))
  double f_horizon = 0.0;  // integrated f at the horizon (+inf on overflow)
  double t_cross = std::numeric_limits<double>::infinity();  // f reaches 2a
  double c_max = 0.0;      // largest c_univ keeping the conclusion true
  bool pass = false;       // f(t) <= 2a for all t <= horizon
  bool overflow = false;   // f exceeded the overflow guard before horizon
  double blowup_time = std::numeric_limits<double>::quiet_NaN();
};

// Integrates the extremal ODE and fills the certificate. b = 0 is accepted
// as the degenerate limit: f stays at a, the horizon clamps to T1 and every
// coefficient works (c_max = +inf). Throws config_error on a <= 0, b < 0,
// m < 1, T1 <= 0, c_univ <= 0, or non-finite inputs.
GronwallCert certify_gronwall(double a, double b, double m, double T1,
                              double c_univ);

// Largest kappa in (0, 1/2) with
//   C (kappa^{15/tau0} + kappa^{1+15/tau0} + kappa^{-2+15/tau0}) <= 1/4.
// All three exponents are nonnegative for tau0 in (5, 15/2], so the left
// side is increasing in kappa and bisection applies; the returned value
// satisfies LHS in [1/4 - 1e-10, 1/4] unless the bound clamps at the upper
// end 1/2 (then LHS may sit strictly below 1/4). At tau0 = 15/2 the third
// exponent vanishes, the term is constant 1, and C >= 1/4 leaves no
// admissible kappa: that raises config_error, as does any C with
// LHS > 1/4 throughout (0, 1/2).
double solve_kappa(double C, double tau0);

// One run of the contraction map, O_{kappa^n r0} for n = 0..N.
struct IterationTrace {
  double kappa = 0.0;
  double tau0 = 0.0;
  double C = 0.0;
  double r0 = 0.0;
  double eps_star = 0.0;
  double gamma = 0.0;             // additive-term exponent
  std::vector<double> O;          // iterates, O[0] = O0; may stop early on
                                  // overflow past 1e300
  bool bounded = false;           // all iterates <= eps_star (up to the
                                  // map's own rounding, relative 1e-12)
  long first_violation = -1;      // index of the first crossing, -1 if none
};

// Iterates the map and checks the invariance O_n <= eps_star. The smallness
// conditions behind the induction are
//   (1) O0 <= eps_star,
//   (2) C kappa^-15 sqrt(eps_star) <= 1/4,
//   (3) r0^gamma <= eps_star / 2,
// and with enforce = true a violated condition raises config_error naming
// it. enforce = false runs the map anyway, so a broken condition can be
// watched producing iterates above eps_star. The bounded comparison carries
// a relative 1e-12 slack: when (2) and (3) hold with equality the exact map
// lands on eps_star and rounding may spill a few ulps, while genuine
// violations overshoot by factors within a few steps.
IterationTrace iterate_O(double O0, double kappa, double tau0, double C,
                         double r0, long N, double eps_star,
                         bool enforce = true);

}  // namespace mp
