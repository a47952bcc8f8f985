#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "mp/gronwall.hpp"
#include "support.hpp"

using namespace mp;

namespace {

// The extremal equation f' = b (f + f^m) is separable; for m > 1,
//   t(F) = (1/b) [ ln f - ln(1 + f^{m-1}) / (m-1) ]  evaluated from a to F,
// which gives the crossing time of any level exactly. m = 1 degenerates to
// f = a e^{2bt}.
double crossing_closed_form(double a, double b, double m, double level) {
  if (m == 1.0) return std::log(level / a) / (2.0 * b);
  const auto antider = [m](double f) {
    return std::log(f) - std::log1p(std::pow(f, m - 1.0)) / (m - 1.0);
  };
  return (antider(level) - antider(a)) / b;
}

}  // namespace

TEST_CASE("doubling certificate, linear closed form") {
  const double a = 2.0, b = 0.7, T1 = 10.0;

  // Horizon below the crossing: the conclusion holds.
  auto cert = certify_gronwall(a, b, 1.0, T1, 0.5);
  const double tcross = std::log(2.0) / (2.0 * b);
  REQUIRE(ts::rel_err(cert.t_cross, tcross) < 1e-10);
  REQUIRE(ts::rel_err(cert.c_max, std::log(2.0)) < 1e-10);
  REQUIRE(cert.horizon == Catch::Approx(0.5 / (2.0 * b)).epsilon(1e-15));
  REQUIRE(ts::rel_err(cert.f_horizon, a * std::exp(2.0 * b * cert.horizon)) <
          1e-10);
  REQUIRE(cert.pass);
  REQUIRE_FALSE(cert.overflow);

  // Horizon just past the crossing: f exceeds 2a and the verdict flips.
  auto fail = certify_gronwall(a, b, 1.0, T1, std::log(2.0) * 1.01);
  REQUIRE(fail.horizon > tcross);
  REQUIRE(fail.f_horizon > 2.0 * a);
  REQUIRE_FALSE(fail.pass);

  // Just inside the crossing: still passes.
  auto ok = certify_gronwall(a, b, 1.0, T1, std::log(2.0) * 0.99);
  REQUIRE(ok.pass);
}

TEST_CASE("doubling certificate, vanishing coefficient limit") {
  // Tiny b: the horizon formula exceeds T1, so T1 clamps and f barely moves.
  auto cert = certify_gronwall(1.0, 1e-12, 3.0, 5.0, 2.0);
  REQUIRE(cert.horizon == 5.0);
  REQUIRE(cert.pass);
  REQUIRE(cert.f_horizon < 1.0 + 1e-10);

  // b = 0 exactly: degenerate limit, every coefficient works.
  auto zero = certify_gronwall(1.0, 0.0, 3.0, 5.0, 2.0);
  REQUIRE(zero.horizon == 5.0);
  REQUIRE(zero.pass);
  REQUIRE(zero.f_horizon == 1.0);
  REQUIRE(std::isinf(zero.c_max));
}

TEST_CASE("doubling certificate, cubic ODE oracle") {
  const double a = 1.0, b = 1.0, m = 3.0;
  auto cert = certify_gronwall(a, b, m, 10.0, 0.4);

  // Closed form of the separable integral.
  const double want = crossing_closed_form(a, b, m, 2.0 * a);
  REQUIRE(ts::rel_err(cert.t_cross, want) < 1e-10);

  // Independent dense fixed-step RK4 with linear interpolation at the level
  // crossing; agreement far inside the 1e-8 contract.
  const double dt = 1e-6;
  double f = a, t = 0.0, t_dense = -1.0;
  const auto rhs = [b, m](double y) { return b * (y + std::pow(y, m)); };
  while (t_dense < 0.0) {
    const double k1 = rhs(f);
    const double k2 = rhs(f + 0.5 * dt * k1);
    const double k3 = rhs(f + 0.5 * dt * k2);
    const double k4 = rhs(f + dt * k3);
    const double fn = f + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (fn >= 2.0 * a)
      t_dense = t + dt * (2.0 * a - f) / (fn - f);
    f = fn;
    t += dt;
    REQUIRE(t < 1.0);
  }
  REQUIRE(ts::rel_err(cert.t_cross, t_dense) < 1e-8);

  // c_max reproduces the crossing through the horizon formula: with
  // c_univ = c_max the horizon sits exactly at the crossing.
  REQUIRE(ts::rel_err(cert.c_max, b * (1.0 + a * a) * want) < 1e-10);
}

TEST_CASE("doubling certificate, blow-up before horizon") {
  // f' = f + f^3 from 1 escapes at t = (1/2) ln 2; a huge coefficient pushes
  // the horizon past it.
  auto cert = certify_gronwall(1.0, 1.0, 3.0, 10.0, 1e6);
  REQUIRE(cert.overflow);
  REQUIRE_FALSE(cert.pass);
  REQUIRE(std::isinf(cert.f_horizon));
  const double t_blow = 0.5 * std::log(2.0);
  REQUIRE(std::abs(cert.blowup_time - t_blow) < 1e-3);

  // Validation.
  REQUIRE_THROWS_AS(certify_gronwall(0.0, 1.0, 3.0, 1.0, 1.0), config_error);
  REQUIRE_THROWS_AS(certify_gronwall(1.0, -1.0, 3.0, 1.0, 1.0), config_error);
  REQUIRE_THROWS_AS(certify_gronwall(1.0, 1.0, 0.5, 1.0, 1.0), config_error);
  REQUIRE_THROWS_AS(certify_gronwall(1.0, 1.0, 3.0, 0.0, 1.0), config_error);
  REQUIRE_THROWS_AS(certify_gronwall(1.0, 1.0, 3.0, 1.0, 0.0), config_error);
}

TEST_CASE("kappa condition solver") {
  const auto lhs = [](double C, double tau0, double k) {
    const double e = 15.0 / tau0;
    return C * (std::pow(k, e) + std::pow(k, 1.0 + e) + std::pow(k, e - 2.0));
  };

  // Residual lands within the bisection contract.
  const double k1 = solve_kappa(1.0, 6.0);
  REQUIRE(k1 > 0.0);
  REQUIRE(k1 < 0.5);
  REQUIRE(lhs(1.0, 6.0, k1) <= 0.25);
  REQUIRE(lhs(1.0, 6.0, k1) >= 0.25 - 1e-10);

  // Halving C strictly enlarges the admissible kappa.
  const double k2 = solve_kappa(0.5, 6.0);
  REQUIRE(k2 > k1);
  REQUIRE(lhs(0.5, 6.0, k2) <= 0.25);
  REQUIRE(lhs(0.5, 6.0, k2) >= 0.25 - 1e-10);

  // tau0 = 15/2 zeroes the third exponent, so the left side never drops
  // below C: C >= 1/4 leaves nothing, smaller C still solves.
  REQUIRE_THROWS_AS(solve_kappa(0.3, 7.5), config_error);
  REQUIRE_THROWS_AS(solve_kappa(0.25, 7.5), config_error);
  const double k3 = solve_kappa(0.2, 7.5);
  REQUIRE(lhs(0.2, 7.5, k3) <= 0.25);
  REQUIRE(lhs(0.2, 7.5, k3) >= 0.25 - 1e-10);

  // Tiny C clamps at the upper end of (0, 1/2).
  const double k4 = solve_kappa(1e-6, 6.0);
  REQUIRE(k4 == Catch::Approx(0.5).margin(1e-9));

  REQUIRE_THROWS_AS(solve_kappa(0.0, 6.0), config_error);
  REQUIRE_THROWS_AS(solve_kappa(1.0, 5.0), config_error);
  REQUIRE_THROWS_AS(solve_kappa(1.0, 7.6), config_error);

  // Determinism.
  REQUIRE(solve_kappa(1.0, 6.0) == k1);
}

TEST_CASE("scale iteration invariance") {
  const double tau0 = 6.0;
  const double C = 1.0;
  const double kappa = solve_kappa(C, tau0);
  // Saturate the contraction condition: C kappa^-15 sqrt(eps) = 1/4.
  const double eps_star = std::pow(0.25 * std::pow(kappa, 15.0) / C, 2.0);
  // Saturate the additive budget: r0^gamma = eps_star / 2.
  const double gamma = 2.25 * (5.0 / tau0 - 0.5);
  const double r0 = std::pow(0.5 * eps_star, 1.0 / gamma);
  REQUIRE(r0 > 0.0);
  REQUIRE(r0 < 1.0);

  const long N = 10000;

  // Invariance at the saturated start: every iterate stays at or below
  // eps_star, the induction of the proof run as arithmetic.
  auto tr = iterate_O(eps_star, kappa, tau0, C, r0, N, eps_star);
  REQUIRE(tr.bounded);
  REQUIRE(tr.first_violation == -1);
  REQUIRE(tr.O.size() == static_cast<std::size_t>(N) + 1);
  REQUIRE(tr.O.front() == eps_star);

  // Zero start: the additive tail alone cannot push past eps_star.
  auto tz = iterate_O(0.0, kappa, tau0, C, r0, N, eps_star);
  REQUIRE(tz.bounded);
  for (double v : tz.O) REQUIRE(v >= 0.0);

  // Breaking the contraction condition by a factor 4 (C -> 4C with the same
  // kappa and eps_star) must blow through the bound within a few steps.
  auto tb = iterate_O(eps_star, kappa, tau0, 4.0 * C, r0, N, eps_star, false);
  REQUIRE_FALSE(tb.bounded);
  REQUIRE(tb.first_violation >= 1);
  REQUIRE(tb.first_violation <= 4);
  REQUIRE(tb.O[static_cast<std::size_t>(tb.first_violation)] >
          1.5 * eps_star);

  // The checked variant names the failed condition.
  REQUIRE_THROWS_WITH(
      iterate_O(eps_star, kappa, tau0, 4.0 * C, r0, N, eps_star),
      Catch::Matchers::ContainsSubstring("sqrt(eps_star)"));
  REQUIRE_THROWS_WITH(iterate_O(2.0 * eps_star, kappa, tau0, C, r0, N, eps_star),
                      Catch::Matchers::ContainsSubstring("O0 <= eps_star"));
  const double r_big = std::pow(4.0 * eps_star, 1.0 / gamma);
  REQUIRE_THROWS_WITH(iterate_O(eps_star, kappa, tau0, C, r_big, N, eps_star),
                      Catch::Matchers::ContainsSubstring("r0^gamma"));

  // Parameter validation.
  REQUIRE_THROWS_AS(iterate_O(0.0, 0.6, tau0, C, r0, N, eps_star), config_error);
  REQUIRE_THROWS_AS(iterate_O(0.0, kappa, 5.0, C, r0, N, eps_star), config_error);
  REQUIRE_THROWS_AS(iterate_O(0.0, kappa, tau0, C, 1.5, N, eps_star), config_error);
  REQUIRE_THROWS_AS(iterate_O(0.0, kappa, tau0, C, r0, -1, eps_star), config_error);
}
