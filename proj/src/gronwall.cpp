#include "mp/gronwall.hpp"

#include <cmath>
#include <functional>

namespace mp {

namespace {

constexpr double kOverflowGuard = 1e150;

// One adaptive Dormand-Prince 5(4) integration of y' = f(t, y) from (t0, y0)
// to t1. When the modulus of y escapes the overflow guard, or the controller
// hits the minimum representable step while still rejecting (finite-time
// blow-up seen at working precision), integration stops early: *overflowed
// is set and *t_stop carries the time it happened.
double dp54(double t0, double y0, double t1,
            const std::function<double(double, double)>& f, bool* overflowed,
            double* t_stop) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113,
                          b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  // Difference against the embedded 4th-order weights; k7 = f(t+h, y_next).
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double rtol = 1e-12, atol = 1e-300;

  *overflowed = false;
  *t_stop = t1;
  double t = t0, y = y0;
  const double span = t1 - t0;
  if (span <= 0.0) return y0;
  double h = span / 16.0;
  int rejected_in_a_row = 0;
  while (t < t1) {
    if (h > t1 - t) h = t1 - t;
    const double floor_h = 1e-16 * std::max(1.0, std::abs(t));
    const double k1 = f(t, y);
    const double k2 = f(t + c2 * h, y + h * a21 * k1);
    const double k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const double k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const double k5 = f(t + c5 * h,
                        y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const double k6 = f(
        t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const double ynew =
        y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double k7 = f(t + h, ynew);
    const double err = std::abs(
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));
    const double tol = rtol * std::max(std::abs(y), std::abs(ynew)) + atol;
    if (!std::isfinite(ynew) || std::abs(ynew) > kOverflowGuard ||
        !std::isfinite(err)) {
      if (h <= floor_h * 1.01) {
        *overflowed = true;
        *t_stop = t;
        return y;
      }
      h *= 0.25;
      continue;
    }
    if (err <= tol) {
      t += h;
      y = ynew;
      rejected_in_a_row = 0;
    } else {
      if (h <= floor_h * 1.01) {
        // The slope is too steep for any representable step: the solution
        // is escaping faster than double precision can track.
        *overflowed = true;
        *t_stop = t;
        return y;
      }
      ++rejected_in_a_row;
      if (rejected_in_a_row > 200)
        throw config_error("gronwall: step control failed to converge");
    }
    double factor = 0.9 * std::pow(tol / std::max(err, 1e-320), 0.2);
    if (factor < 0.2) factor = 0.2;
    if (factor > 5.0) factor = 5.0;
    h *= factor;
    if (h < floor_h) h = floor_h;
  }
  return y;
}

}  // namespace

GronwallCert certify_gronwall(double a, double b, double m, double T1,
                              double c_univ) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(m) ||
      !std::isfinite(T1) || !std::isfinite(c_univ))
    throw config_error("certify_gronwall: inputs must be finite");
  if (a <= 0.0) throw config_error("certify_gronwall: a must be positive");
  if (b < 0.0) throw config_error("certify_gronwall: b must be nonnegative");
  if (m < 1.0) throw config_error("certify_gronwall: m must be >= 1");
  if (T1 <= 0.0) throw config_error("certify_gronwall: T1 must be positive");
  if (c_univ <= 0.0)
    throw config_error("certify_gronwall: c_univ must be positive");

  GronwallCert cert;
  cert.a = a;
  cert.b = b;
  cert.m = m;
  cert.T1 = T1;
  cert.c_univ = c_univ;

  if (b == 0.0) {
    cert.horizon = T1;
    cert.f_horizon = a;
    cert.t_cross = std::numeric_limits<double>::infinity();
    cert.c_max = std::numeric_limits<double>::infinity();
    cert.pass = true;
    return cert;
  }

  const double denom = b * (1.0 + std::pow(a, m - 1.0));
  cert.horizon = std::min(T1, c_univ / denom);

  // Crossing time by quadrature in the f variable: dt/df = 1/(b (f + f^m))
  // integrated from a to 2a. The integrand is smooth and positive there, so
  // no event location is needed.
  bool ovf = false;
  double stop = 0.0;
  cert.t_cross = dp54(
      a, 0.0, 2.0 * a,
      [b, m](double fv, double) { return 1.0 / (b * (fv + std::pow(fv, m))); },
      &ovf, &stop);

  // Forward state at the horizon, with the blow-up guard for horizons past
  // the crossing (only m > 1 can actually escape in finite time).
  cert.f_horizon = dp54(
      0.0, a, cert.horizon,
      [b, m](double, double fv) { return b * (fv + std::pow(fv, m)); }, &ovf,
      &stop);
  if (ovf) {
    cert.overflow = true;
    cert.blowup_time = stop;
    cert.f_horizon = std::numeric_limits<double>::infinity();
    cert.pass = false;
  } else {
    cert.pass = cert.f_horizon <= 2.0 * a;
  }
  cert.c_max = denom * std::min(cert.t_cross, T1);
  return cert;
}

double solve_kappa(double C, double tau0) {
  if (!std::isfinite(C) || C <= 0.0)
    throw config_error("solve_kappa: C must be positive");
  if (!(tau0 > 5.0 && tau0 <= 7.5))
    throw config_error("solve_kappa: tau0 must lie in (5, 15/2]");
  const double e1 = 15.0 / tau0;
  const double e2 = 1.0 + e1;
  const double e3 = e1 - 2.0;  // zero exactly at tau0 = 15/2
  const auto lhs = [&](double k) {
    return C * (std::pow(k, e1) + std::pow(k, e2) + std::pow(k, e3));
  };
  const double hi0 = 0.5 - 1e-12;
  if (lhs(hi0) <= 0.25) return hi0;  // clamped at the open upper end
  // Feasibility as kappa -> 0+: the first two terms vanish; the third tends
  // to 0 for e3 > 0 but to the constant C when the exponent is zero, and
  // underflow of kappa^e1 must not be allowed to fake equality there.
  const double lhs_at_zero = e3 == 0.0 ? C : 0.0;
  double lo = 1e-300;
  if (lhs_at_zero >= 0.25 || lhs(lo) > 0.25)
    throw config_error(
        "solve_kappa: no kappa in (0, 1/2) satisfies the condition; C too "
        "large for this tau0");
  double hi = hi0;
  for (int it = 0; it < 4000 && 0.25 - lhs(lo) > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (lhs(mid) <= 0.25)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-18 * hi) break;
  }
  return lo;
}

IterationTrace iterate_O(double O0, double kappa, double tau0, double C,
                         double r0, long N, double eps_star, bool enforce) {
  if (!(kappa > 0.0 && kappa < 0.5))
    throw config_error("iterate_O: kappa must lie in (0, 1/2)");
  if (!(tau0 > 5.0 && tau0 <= 7.5))
    throw config_error("iterate_O: tau0 must lie in (5, 15/2]");
  if (!(C > 0.0)) throw config_error("iterate_O: C must be positive");
  if (!(r0 > 0.0 && r0 < 1.0))
    throw config_error("iterate_O: r0 must lie in (0, 1)");
  if (N < 0) throw config_error("iterate_O: N must be nonnegative");
  if (!(eps_star > 0.0))
    throw config_error("iterate_O: eps_star must be positive");
  if (!(O0 >= 0.0) || !std::isfinite(O0))
    throw config_error("iterate_O: O0 must be finite and nonnegative");

  IterationTrace tr;
  tr.kappa = kappa;
  tr.tau0 = tau0;
  tr.C = C;
  tr.r0 = r0;
  tr.eps_star = eps_star;
  tr.gamma = 2.25 * (5.0 / tau0 - 0.5);

  // The conditions are checked with the same relative slack the bounded
  // flag carries: saturating them exactly is the canonical configuration,
  // and the products above reassociate the defining expressions by an ulp.
  const double contraction = C * std::pow(kappa, -15.0) * std::sqrt(eps_star);
  const double additive0 = std::pow(r0, tr.gamma);
  if (enforce) {
    if (O0 > eps_star * (1.0 + 1e-12))
      throw config_error("iterate_O: smallness condition O0 <= eps_star fails");
    if (contraction > 0.25 * (1.0 + 1e-12))
      throw config_error(
          "iterate_O: smallness condition C kappa^-15 sqrt(eps_star) <= 1/4 "
          "fails");
    if (additive0 > 0.5 * eps_star * (1.0 + 1e-12))
      throw config_error(
          "iterate_O: smallness condition r0^gamma <= eps_star/2 fails");
  }

  const double cfac = C * std::pow(kappa, -15.0);
  const double slack = eps_star * (1.0 + 1e-12);
  tr.O.reserve(static_cast<std::size_t>(N) + 1);
  tr.O.push_back(O0);
  if (O0 > slack) tr.first_violation = 0;
  double O = O0;
  const double logk = std::log(kappa);
  for (long n = 0; n < N; ++n) {
    const double rn = std::exp(static_cast<double>(n) * logk) * r0;
    O = 0.25 * O + cfac * O * std::sqrt(O) + std::pow(rn, tr.gamma);
    tr.O.push_back(O);
    if (tr.first_violation < 0 && O > slack) tr.first_violation = n + 1;
    if (O > 1e300) break;  // runaway map; the trace stops here
  }
  tr.bounded = tr.first_violation < 0;
  return tr;
}

}  // namespace mp
