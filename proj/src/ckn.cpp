#include "mp/ckn.hpp"

#include <algorithm>
#include <cmath>

#include "mp/gronwall.hpp"

namespace mp {

namespace {

// Slice membership in a time window, with a tolerance that forgives the
// rounding of accumulated step times at the window edges.
bool in_window(double s, double lo, double hi) {
  const double tol = 1e-9 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  return s >= lo - tol && s <= hi + tol;
}

void check_trajectory(const std::vector<State>& traj) {
  if (traj.empty()) throw config_error("trajectory is empty");
  const GridSpec& g = traj.front().u.grid;
  g.validate();
  for (std::size_t j = 0; j < traj.size(); ++j) {
    const State& s = traj[j];
    if (!(s.u.grid == g) || s.u.c[0].size() != g.cells())
      throw config_error("trajectory slices disagree on the grid");
    if (j > 0 && !(traj[j].t > traj[j - 1].t))
      throw config_error("trajectory times must be strictly increasing");
  }
}

// Pressure of one slice: the recorded field when present, else the spectral
// recovery from u (deterministic, so repeated calls agree bit for bit).
ScalarField slice_pressure(const State& s) {
  if (!s.p.s.empty()) return s.p;
  return recover_pressure(s.u);
}

// Trapezoid weight of the recorded slice times sel within the trajectory.
double trapezoid(const std::vector<double>& t, const std::vector<double>& v) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < t.size(); ++j)
    acc += 0.5 * (v[j] + v[j + 1]) * (t[j + 1] - t[j]);
  return acc;
}

// Running integral of a sampled integrand. Uniform slice spacing gets
// composite Simpson prefixes (odd prefixes closed by the three-point half
// panel, like the energy budget), so smooth integrands converge at fourth
// order; non-uniform spacing falls back to trapezoid prefixes.
std::vector<double> cumulative_quadrature(const std::vector<double>& t,
                                          const std::vector<double>& f) {
  const std::size_t m = t.size();
  std::vector<double> c(m, 0.0);
  if (m < 2) return c;
  const double dt0 = t[1] - t[0];
  bool uniform = m >= 3;
  for (std::size_t j = 0; j + 1 < m && uniform; ++j)
    if (std::abs(t[j + 1] - t[j] - dt0) > 1e-6 * std::abs(dt0)) uniform = false;
  if (!uniform) {
    for (std::size_t j = 1; j < m; ++j)
      c[j] = c[j - 1] + 0.5 * (f[j] + f[j - 1]) * (t[j] - t[j - 1]);
    return c;
  }
  c[1] = dt0 / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
  for (std::size_t j = 2; j < m; ++j)
    c[j] = c[j - 2] + dt0 / 3.0 * (f[j - 2] + 4.0 * f[j - 1] + f[j]);
  return c;
}

// Fixed-order pairwise sum of f(idx) over a cell list, buffered.
template <class F>
double sum_over_cells(const std::vector<std::size_t>& cells, F&& f,
                      std::vector<double>& buf) {
  buf.clear();
  buf.reserve(cells.size());
  for (std::size_t i : cells) buf.push_back(f(i));
  return pairwise_sum(buf);
}

double sq(double x) { return x * x; }

// |u(i)|^2 from the three components.
double usq_at(const VectorField& u, std::size_t i) {
  return sq(u.c[0][i]) + sq(u.c[1][i]) + sq(u.c[2][i]);
}

// --- smooth step with closed-form first and second derivatives ---
// S(t) = E(t) / (E(t) + E(1-t)), E(t) = exp(-1/t) (0 for t <= 0): the
// standard smooth transition, 0 for t <= 0 and 1 for t >= 1. Underflowed
// exponentials are treated as exact zeros so no 0 * inf appears.
struct Step {
  double s = 0.0, d1 = 0.0, d2 = 0.0;
};

void efun(double t, double& e, double& e1, double& e2) {
  if (t <= 0.0) {
    e = e1 = e2 = 0.0;
    return;
  }
  e = std::exp(-1.0 / t);
  if (e == 0.0) {
    e1 = e2 = 0.0;
    return;
  }
  e1 = e / (t * t);
  e2 = e * (1.0 - 2.0 * t) / (t * t * t * t);
}

Step smooth_step(double t) {
  Step out;
  if (t <= 0.0) return out;
  if (t >= 1.0) {
    out.s = 1.0;
    return out;
  }
  double e, e1, e2, f, f1, f2;
  efun(t, e, e1, e2);
  efun(1.0 - t, f, f1, f2);
  const double d = e + f;
  const double d1 = e1 - f1;   // d/dt E(1-t) = -E'(1-t)
  const double d2 = e2 + f2;
  out.s = e / d;
  out.d1 = (e1 * d - e * d1) / (d * d);
  out.d2 = e2 / d - (2.0 * e1 * d1 + e * d2) / (d * d) +
           2.0 * e * d1 * d1 / (d * d * d);
  return out;
}

// Profiles of the Scheffer construction, each a composed smooth step:
//   beta(q)    = S(2(1-q))      1 for q <= 1/2, 0 for q >= 1
//   chi(sigma) = S(4(sigma+1)/3) 0 for sigma <= -1, 1 for sigma >= -1/4
//   theta(tau) = S(2-tau)        1 for tau <= 1, 0 for tau >= 2
Step beta_of(double q) {
  Step s = smooth_step(2.0 * (1.0 - q));
  return {s.s, -2.0 * s.d1, 4.0 * s.d2};
}
Step chi_of(double sigma) {
  Step s = smooth_step((4.0 / 3.0) * (sigma + 1.0));
  return {s.s, (4.0 / 3.0) * s.d1, (16.0 / 9.0) * s.d2};
}
Step theta_of(double tau) {
  Step s = smooth_step(2.0 - tau);
  return {s.s, -s.d1, s.d2};
}

std::array<double, 3> wrap_displacement(const std::array<double, 3>& y,
                                        const std::array<double, 3>& x0,
                                        double L) {
  std::array<double, 3> d;
  for (int c = 0; c < 3; ++c) {
    d[c] = y[c] - x0[c];
    d[c] -= L * std::round(d[c] / L);
  }
  return d;
}

}  // namespace

void ParabolicBall::validate() const {
  if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(t0))
    throw config_error("parabolic ball: radius must be positive and finite");
  if (flavor == BallFlavor::backward && !(r * r < t0))
    throw config_error(
        "parabolic ball: backward flavor needs r^2 < t0 so the window stays "
        "past the initial time");
}

CknReport ckn_quantities(const std::vector<State>& traj,
                         const ParabolicBall& ball, double kappa,
                         double tau0) {
  check_trajectory(traj);
  ball.validate();
  if (!(tau0 > 5.0 && tau0 <= 7.5))
    throw config_error("ckn_quantities: tau0 must lie in (5, 15/2]");
  if (kappa == 0.0)
    kappa = solve_kappa(1.0, tau0);
  else if (!(kappa > 0.0 && kappa < 0.5))
    throw config_error("ckn_quantities: kappa must lie in (0, 1/2)");

  const GridSpec& g = traj.front().u.grid;
  const double r = ball.r;

  CknReport rep;
  rep.ball = ball;
  rep.kappa = kappa;
  rep.tau0 = tau0;

  // Clip the window to the recorded range (the torus leaves nothing to clip
  // in space).
  const double t_first = traj.front().t, t_last = traj.back().t;
  double lo = ball.t_lo(), hi = ball.t_hi();
  const double edge = 1e-9 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  if (lo < t_first - edge || hi > t_last + edge) rep.clipped = true;
  lo = std::max(lo, t_first);
  hi = std::min(hi, t_last);

  std::vector<std::size_t> sel;
  for (std::size_t j = 0; j < traj.size(); ++j)
    if (in_window(traj[j].t, lo, hi)) sel.push_back(j);
  if (sel.size() < 2)
    throw config_error(
        "ckn_quantities: fewer than two recorded slices meet the ball's time "
        "window");

  const std::vector<std::size_t> cells = ball_cells(g, ball.x0, r);
  if (cells.empty())
    throw config_error("ckn_quantities: ball contains no grid cells");

  const double h3 = g.h() * g.h() * g.h();
  const std::size_t m = sel.size();
  std::vector<double> times(m), e2(m), gr(m), cube(m), pmass(m), padj(m);
  std::vector<double> buf;
  for (std::size_t j = 0; j < m; ++j) {
    const State& s = traj[sel[j]];
    times[j] = s.t;
    e2[j] = h3 * sum_over_cells(cells, [&](std::size_t i) { return usq_at(s.u, i); }, buf);
    cube[j] = h3 * sum_over_cells(
                       cells,
                       [&](std::size_t i) {
                         const double q = usq_at(s.u, i);
                         return q * std::sqrt(q);
                       },
                       buf);
    const auto grad = gradient_tensor(s.u);
    gr[j] = h3 * sum_over_cells(
                     cells,
                     [&](std::size_t i) {
                       double acc = 0.0;
                       for (int c = 0; c < 9; ++c) acc += sq(grad[c].s[i]);
                       return acc;
                     },
                     buf);
    const ScalarField p = slice_pressure(s);
    pmass[j] = h3 * sum_over_cells(
                        cells,
                        [&](std::size_t i) {
                          const double a = std::abs(p.s[i]);
                          return a * std::sqrt(a);
                        },
                        buf);
    const double pbar =
        sum_over_cells(cells, [&](std::size_t i) { return p.s[i]; }, buf) /
        static_cast<double>(cells.size());
    padj[j] = h3 * sum_over_cells(
                       cells,
                       [&](std::size_t i) {
                         const double a = std::abs(p.s[i] - pbar);
                         return a * std::sqrt(a);
                       },
                       buf);
  }

  rep.A_r = *std::max_element(e2.begin(), e2.end()) / r;
  rep.alpha_r = trapezoid(times, gr) / r;
  rep.lambda_r = trapezoid(times, cube) / (r * r);
  rep.P_r = trapezoid(times, pmass) / (r * r);
  const double weight = std::pow(r, -3.0 * (1.0 - 5.0 / tau0));
  rep.Lambda_r = weight * rep.lambda_r;
  rep.Pbb_r = weight * rep.P_r;
  rep.O_r = rep.Lambda_r + std::pow(kappa, 6.0) * rep.Pbb_r;
  rep.E_r = rep.A_r + rep.alpha_r + trapezoid(times, padj) / (r * r);
  rep.verdict = epsilon_regularity_verdict(rep);
  return rep;
}

Verdict epsilon_regularity_verdict(const CknReport& report, double eps) {
  return report.lambda_r + report.P_r < eps ? Verdict::regular_candidate
                                            : Verdict::singular_candidate;
}

double lemma_b1_ratio(const CknReport& report) {
  const double left = std::cbrt(report.lambda_r);
  const double right = std::sqrt(report.A_r + report.alpha_r);
  if (right == 0.0) {
    if (left == 0.0) return 0.0;
    throw config_error(
        "lemma_b1_ratio: A_r + alpha_r vanishes while lambda_r does not");
  }
  return left / right;
}

double e_r_functional(const std::vector<State>& traj, double r,
                      double window_lo, double window_hi) {
  check_trajectory(traj);
  if (!(r > 0.0) || !std::isfinite(r))
    throw config_error("e_r_functional: radius must be positive");
  if (!(window_lo < window_hi))
    throw config_error("e_r_functional: window must have positive length");
  if (!in_window(window_lo, traj.front().t, traj.back().t) ||
      !in_window(window_hi, traj.front().t, traj.back().t))
    throw config_error("e_r_functional: window escapes the recorded range");

  const GridSpec& g = traj.front().u.grid;
  const double h3 = g.h() * g.h() * g.h(), r2 = r * r;
  const std::array<double, 3> origin = {0.0, 0.0, 0.0};

  // Independent full-scan path: per-cell distance test instead of the
  // precomputed cell list, plain left-to-right accumulation.
  std::vector<int> inside(g.cells(), 0);
  std::size_t count = 0;
  for (int i3 = 0; i3 < g.n; ++i3)
    for (int i2 = 0; i2 < g.n; ++i2)
      for (int i1 = 0; i1 < g.n; ++i1) {
        const double d = min_image_dist(g, g.point(i1, i2, i3), origin);
        if (d * d < r2) {
          inside[g.idx(i1, i2, i3)] = 1;
          ++count;
        }
      }
  if (count == 0)
    throw config_error("e_r_functional: ball contains no grid cells");

  std::vector<double> times, e2, gr, padj;
  for (const State& s : traj) {
    if (!in_window(s.t, window_lo, window_hi)) continue;
    times.push_back(s.t);
    const auto grad = gradient_tensor(s.u);
    const ScalarField p = slice_pressure(s);
    double se = 0.0, sg = 0.0, sp = 0.0, pbar = 0.0;
    for (std::size_t i = 0; i < g.cells(); ++i)
      if (inside[i]) pbar += p.s[i];
    pbar /= static_cast<double>(count);
    for (std::size_t i = 0; i < g.cells(); ++i) {
      if (!inside[i]) continue;
      se += usq_at(s.u, i);
      for (int c = 0; c < 9; ++c) sg += sq(grad[c].s[i]);
      const double a = std::abs(p.s[i] - pbar);
      sp += a * std::sqrt(a);
    }
    e2.push_back(h3 * se);
    gr.push_back(h3 * sg);
    padj.push_back(h3 * sp);
  }
  if (times.size() < 2)
    throw config_error(
        "e_r_functional: fewer than two recorded slices meet the window");

  return *std::max_element(e2.begin(), e2.end()) / r +
         trapezoid(times, gr) / r + trapezoid(times, padj) / r2;
}

LocalEnergyTerms local_energy_terms(const std::vector<State>& traj,
                                    const TestFunction& fn) {
  check_trajectory(traj);
  if (traj.size() < 2)
    throw config_error("local_energy_terms: need at least two slices");
  if (!(fn.radius > 0.0))
    throw config_error("local_energy_terms: test function has no support");
  const double t_first = traj.front().t, t_last = traj.back().t;
  const double edge =
      1e-9 * std::max(1.0, std::max(std::abs(fn.t_lo), std::abs(fn.t_hi)));
  if (fn.t_lo < t_first - edge || fn.t_hi > t_last + edge)
    throw config_error(
        "local_energy_terms: test function support escapes the recorded "
        "slab");

  const GridSpec& g = traj.front().u.grid;
  for (const State& s : traj)
    for (int k = 0; k < 3; ++k)
      if (s.w.c[k].size() != g.cells())
        throw config_error(
            "local_energy_terms: slices must carry the spin field");
  const double h3 = g.h() * g.h() * g.h();
  const std::vector<std::size_t> cells = ball_cells(g, fn.x0, fn.radius);

  const std::size_t m = traj.size();
  // Instantaneous spatial integrals at each recorded slice.
  std::vector<double> inst(m, 0.0), diss(m, 0.0), heat(m, 0.0), press(m, 0.0),
      trans(m, 0.0), spin(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const State& s = traj[j];
    if (s.t < fn.t_lo - edge || s.t > fn.t_hi + edge) continue;  // phi = 0
    // Evaluate the test function once per cell, shared by all five terms.
    std::vector<double> phi(cells.size());
    std::vector<std::array<double, 3>> gphi(cells.size());
    std::vector<double> hphi(cells.size());
    bool any = false;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::size_t i = cells[c];
      const int i1 = static_cast<int>(i) % g.n;
      const int i2 = static_cast<int>(i / g.n) % g.n;
      const int i3 = static_cast<int>(i / (static_cast<std::size_t>(g.n) * g.n));
      const auto y = g.point(i1, i2, i3);
      phi[c] = fn.phi(s.t, y);
      gphi[c] = fn.grad(s.t, y);
      hphi[c] = fn.heat(s.t, y);
      if (phi[c] != 0.0 || hphi[c] != 0.0 || gphi[c][0] != 0.0 ||
          gphi[c][1] != 0.0 || gphi[c][2] != 0.0)
        any = true;
    }
    if (!any) continue;
    const auto grad = gradient_tensor(s.u);
    const VectorField cw = curl(s.w);
    const ScalarField p = slice_pressure(s);
    std::vector<double> b1(cells.size()), b2(cells.size()), b3(cells.size()),
        b4(cells.size()), b5(cells.size()), b6(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::size_t i = cells[c];
      const double u1 = s.u.c[0][i], u2 = s.u.c[1][i], u3 = s.u.c[2][i];
      const double uu = u1 * u1 + u2 * u2 + u3 * u3;
      double gg = 0.0;
      for (int k = 0; k < 9; ++k) gg += sq(grad[k].s[i]);
      const double ug = u1 * gphi[c][0] + u2 * gphi[c][1] + u3 * gphi[c][2];
      b1[c] = uu * phi[c];
      b2[c] = gg * phi[c];
      b3[c] = hphi[c] * uu;
      b4[c] = p.s[i] * ug;
      b5[c] = uu * ug;
      b6[c] = (cw.c[0][i] * u1 + cw.c[1][i] * u2 + cw.c[2][i] * u3) * phi[c];
    }
    inst[j] = h3 * pairwise_sum(b1);
    diss[j] = h3 * pairwise_sum(b2);
    heat[j] = h3 * pairwise_sum(b3);
    press[j] = h3 * pairwise_sum(b4);
    trans[j] = h3 * pairwise_sum(b5);
    spin[j] = h3 * pairwise_sum(b6);
  }

  LocalEnergyTerms out;
  out.t.resize(m);
  out.instant.resize(m);
  out.dissipation.resize(m);
  out.heat.resize(m);
  out.pressure.resize(m);
  out.transport.resize(m);
  out.spin.resize(m);
  out.residual.resize(m);
  std::vector<double> times(m);
  for (std::size_t j = 0; j < m; ++j) times[j] = traj[j].t;
  const std::vector<double> cd = cumulative_quadrature(times, diss);
  const std::vector<double> ch = cumulative_quadrature(times, heat);
  const std::vector<double> cp = cumulative_quadrature(times, press);
  const std::vector<double> ct = cumulative_quadrature(times, trans);
  const std::vector<double> cs = cumulative_quadrature(times, spin);
  for (std::size_t j = 0; j < m; ++j) {
    out.t[j] = times[j];
    out.instant[j] = inst[j];
    out.dissipation[j] = 2.0 * cd[j];
    out.heat[j] = ch[j];
    out.pressure[j] = 2.0 * cp[j];
    out.transport[j] = ct[j];
    out.spin[j] = cs[j];
    const double lhs = inst[j] + 2.0 * cd[j];
    const double rhs = ch[j] + 2.0 * cp[j] + ct[j] + cs[j];
    out.residual[j] = rhs - lhs;
    for (double v : {out.instant[j], out.dissipation[j], out.heat[j],
                     out.pressure[j], out.transport[j], out.spin[j]})
      out.scale = std::max(out.scale, std::abs(v));
  }
  out.min_residual =
      *std::min_element(out.residual.begin(), out.residual.end());
  return out;
}

double local_energy_residual(const std::vector<State>& traj,
                             const TestFunction& fn) {
  return local_energy_terms(traj, fn).min_residual;
}

HeatFactor heat_factor(const ParabolicBall& ball, double s,
                       const std::array<double, 3>& y, double box_length) {
  const double a = 4.0 * ball.r * ball.r + ball.t0 - s;
  if (!(a > 0.0))
    throw config_error("heat_factor: evaluation past t0 + 4 r^2");
  const auto d = wrap_displacement(y, ball.x0, box_length);
  const double dd = sq(d[0]) + sq(d[1]) + sq(d[2]);
  HeatFactor out;
  out.value = std::pow(4.0 * M_PI * a, -1.5) * std::exp(-dd / (4.0 * a));
  // d/dy_c g = -d_c/(2a) g;  d/ds g = (3/(2a) - |d|^2/(4a^2)) g  (a' = -1);
  // lap_y g = (|d|^2/(4a^2) - 3/(2a)) g, so ds + lap = 0 identically.
  for (int c = 0; c < 3; ++c) out.grad[c] = -d[c] / (2.0 * a) * out.value;
  out.ds = (1.5 / a - dd / (4.0 * a * a)) * out.value;
  out.lap = (dd / (4.0 * a * a) - 1.5 / a) * out.value;
  return out;
}

SchefferFunction scheffer_test_function(const ParabolicBall& ball, double rho,
                                        int samples, double box_length) {
  ball.validate();
  const double r = ball.r, t0 = ball.t0;
  const auto x0 = ball.x0;
  if (!(rho >= 2.0 * r))
    throw config_error("scheffer_test_function: need r <= rho / 2");
  if (!(rho <= 0.25 * box_length))
    throw config_error(
        "scheffer_test_function: rho must not exceed a quarter box so the "
        "support is a genuine ball on the torus");
  if (samples < 4)
    throw config_error("scheffer_test_function: need at least 4 samples");

  const double L = box_length, rho2 = rho * rho, r2 = r * r;

  // One evaluation of phi and every derivative combination. gamma = chi beta
  // is radial in space, so
  //   grad gamma = chi beta'(q) d/(|d| rho),
  //   lap gamma  = chi (beta''(q) + 2 beta'(q)/q) / rho^2,
  // and with (d_s + lap) G = 0 used exactly,
  //   (d_s + lap) phi = r^2 [ (d_s gamma + lap gamma) Theta G
  //                           + gamma theta' G / r^2
  //                           + 2 Theta grad gamma . grad G ].
  struct Eval {
    double phi;
    std::array<double, 3> grad;
    double heat;
  };
  auto eval = [r2, rho, rho2, t0, x0, L](double s,
                                         const std::array<double, 3>& y) -> Eval {
    Eval out{0.0, {0.0, 0.0, 0.0}, 0.0};
    const double sigma = (s - t0) / rho2;
    const double tau = (s - t0) / r2;
    if (sigma <= -1.0 || tau >= 2.0) return out;  // outside the time support
    const auto d = wrap_displacement(y, x0, L);
    const double dist = std::sqrt(sq(d[0]) + sq(d[1]) + sq(d[2]));
    if (dist >= rho) return out;
    const double q = dist / rho;
    const Step b = beta_of(q);
    const Step c = chi_of(sigma);
    const Step th = theta_of(tau);
    if (b.s == 0.0 && b.d1 == 0.0 && b.d2 == 0.0) return out;

    const double a = 4.0 * r2 + t0 - s;  // > 2 r^2 on the support
    const double G = std::pow(4.0 * M_PI * a, -1.5) * std::exp(-dist * dist / (4.0 * a));
    std::array<double, 3> gradG;
    for (int k = 0; k < 3; ++k) gradG[k] = -d[k] / (2.0 * a) * G;

    const double gamma = c.s * b.s;
    out.phi = r2 * gamma * th.s * G;

    std::array<double, 3> gradGamma = {0.0, 0.0, 0.0};
    double lapGamma = 0.0;
    if (q > 1e-14) {
      for (int k = 0; k < 3; ++k)
        gradGamma[k] = c.s * b.d1 * d[k] / (dist * rho);
      lapGamma = c.s * (b.d2 + 2.0 * b.d1 / q) / rho2;
    }
    const double dsGamma = c.d1 * b.s / rho2;

    for (int k = 0; k < 3; ++k)
      out.grad[k] = r2 * th.s * (gradGamma[k] * G + gamma * gradG[k]);

    double dot = 0.0;
    for (int k = 0; k < 3; ++k) dot += gradGamma[k] * gradG[k];
    out.heat = r2 * ((dsGamma + lapGamma) * th.s * G + gamma * th.d1 * G / r2 +
                     2.0 * th.s * dot);
    return out;
  };

  SchefferFunction out;
  out.fn.phi = [eval](double s, const std::array<double, 3>& y) {
    return eval(s, y).phi;
  };
  out.fn.grad = [eval](double s, const std::array<double, 3>& y) {
    return eval(s, y).grad;
  };
  out.fn.heat = [eval](double s, const std::array<double, 3>& y) {
    return eval(s, y).heat;
  };
  out.fn.t_lo = t0 - rho2;
  out.fn.t_hi = t0 + 2.0 * r2;
  out.fn.x0 = x0;
  out.fn.radius = rho;

  // Fit the four constants on deterministic lattices: the lower bound over
  // Q_r (time in [t0 - r^2, t0]), the other three over the centered rho-ball
  // (time in [t0 - rho^2, t0 + 2 r^2], where the support ends).
  const int nt = samples, nx = samples;
  double min_phi = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= nt; ++it) {
    const double s = t0 - r2 + r2 * it / nt;
    for (int k3 = 0; k3 <= nx; ++k3)
      for (int k2 = 0; k2 <= nx; ++k2)
        for (int k1 = 0; k1 <= nx; ++k1) {
          const std::array<double, 3> z = {-r + 2.0 * r * k1 / nx,
                                           -r + 2.0 * r * k2 / nx,
                                           -r + 2.0 * r * k3 / nx};
          if (sq(z[0]) + sq(z[1]) + sq(z[2]) > r2) continue;
          const std::array<double, 3> y = {x0[0] + z[0], x0[1] + z[1],
                                           x0[2] + z[2]};
          min_phi = std::min(min_phi, eval(s, y).phi);
        }
  }
  double max_phi = 0.0, max_grad = 0.0, max_heat = 0.0;
  for (int it = 0; it <= nt; ++it) {
    const double s = t0 - rho2 + (rho2 + 2.0 * r2) * it / nt;
    for (int k3 = 0; k3 <= nx; ++k3)
      for (int k2 = 0; k2 <= nx; ++k2)
        for (int k1 = 0; k1 <= nx; ++k1) {
          const std::array<double, 3> z = {-rho + 2.0 * rho * k1 / nx,
                                           -rho + 2.0 * rho * k2 / nx,
                                           -rho + 2.0 * rho * k3 / nx};
          if (sq(z[0]) + sq(z[1]) + sq(z[2]) > rho2) continue;
          const std::array<double, 3> y = {x0[0] + z[0], x0[1] + z[1],
                                           x0[2] + z[2]};
          const Eval e = eval(s, y);
          max_phi = std::max(max_phi, e.phi);
          max_grad = std::max(
              max_grad,
              std::sqrt(sq(e.grad[0]) + sq(e.grad[1]) + sq(e.grad[2])));
          max_heat = std::max(max_heat, std::abs(e.heat));
        }
  }
  out.c_lower = r * min_phi;
  out.c_upper = r * max_phi;
  out.c_grad = r * r * max_grad;
  out.c_heat = std::pow(rho, 5.0) / r2 * max_heat;
  return out;
}

TypeIReport type_one_monitor(const std::vector<State>& traj, double r0,
                             double T, int center_stride) {
  check_trajectory(traj);
  if (!(r0 > 0.0) || !std::isfinite(r0))
    throw config_error("type_one_monitor: r0 must be positive");
  if (!(r0 * r0 < T))
    throw config_error("type_one_monitor: need r0^2 < T");
  if (center_stride < 1)
    throw config_error("type_one_monitor: center_stride must be >= 1");

  const GridSpec& g = traj.front().u.grid;
  const double h = g.h(), h3 = h * h * h;

  // Dyadic radii r0 / 2^j down to the cell spacing; r0 itself always stays.
  std::vector<double> radii{r0};
  for (double rr = 0.5 * r0; rr >= h; rr *= 0.5) radii.push_back(rr);

  // Slices with t in ]T - r0^2, T] (per-radius windows shrink further).
  const double tol = 1e-9 * std::max(1.0, std::abs(T));
  std::vector<std::size_t> sel;
  for (std::size_t j = 0; j < traj.size(); ++j)
    if (traj[j].t > T - r0 * r0 - tol && traj[j].t <= T + tol)
      sel.push_back(j);
  if (sel.empty())
    throw config_error(
        "type_one_monitor: no recorded time falls in ]T - r0^2, T]");

  // |u|^2 per selected slice, computed once.
  std::vector<std::vector<double>> usq(sel.size());
  for (std::size_t j = 0; j < sel.size(); ++j) {
    const State& s = traj[sel[j]];
    usq[j].resize(g.cells());
    for (std::size_t i = 0; i < g.cells(); ++i) usq[j][i] = usq_at(s.u, i);
  }

  TypeIReport rep;
  rep.r0 = r0;
  rep.T = T;
  std::vector<double> buf;
  for (double rr : radii) {
    const auto offsets = ball_offsets(g, rr);
    for (std::size_t j = 0; j < sel.size(); ++j) {
      const double t = traj[sel[j]].t;
      if (!(t > T - rr * rr - tol)) continue;
      for (int i3 = 0; i3 < g.n; i3 += center_stride)
        for (int i2 = 0; i2 < g.n; i2 += center_stride)
          for (int i1 = 0; i1 < g.n; i1 += center_stride) {
            buf.clear();
            buf.reserve(offsets.size());
            for (const auto& o : offsets) {
              const int a1 = (i1 + o[0] + g.n) % g.n;
              const int a2 = (i2 + o[1] + g.n) % g.n;
              const int a3 = (i3 + o[2] + g.n) % g.n;
              buf.push_back(usq[j][g.idx(a1, a2, a3)]);
            }
            const double val = h3 * pairwise_sum(buf) / rr;
            if (val > rep.M) {
              rep.M = val;
              rep.x0 = g.point(i1, i2, i3);
              rep.r = rr;
              rep.t = t;
            }
          }
    }
  }
  return rep;
}

ConcentrationSeries concentration_monitor(const std::vector<State>& traj,
                                          double T, double S, double eps,
                                          double delta,
                                          const std::array<double, 3>& center) {
  check_trajectory(traj);
  if (!(S > 0.0 && S < 1.0))
    throw config_error("concentration_monitor: S must lie in (0, 1)");
  if (!std::isfinite(T))
    throw config_error("concentration_monitor: T must be finite");
  if (!(eps >= 0.0))
    throw config_error("concentration_monitor: eps must be nonnegative");
  if (!(delta > 0.0))
    throw config_error("concentration_monitor: delta must be positive");

  const GridSpec& g = traj.front().u.grid;
  const double h3 = g.h() * g.h() * g.h();

  ConcentrationSeries out;
  out.T = T;
  out.S = S;
  out.eps = eps;
  bool window_seen = false, window_ok = true;
  std::vector<double> buf;
  for (const State& s : traj) {
    if (!(s.t < T)) break;
    const double radius = std::sqrt((T - s.t) / S);
    if (radius < g.h()) {
      out.truncated = true;
      break;
    }
    const auto cells = ball_cells(g, center, radius);
    buf.clear();
    buf.reserve(cells.size());
    for (std::size_t i : cells) {
      const double q = usq_at(s.u, i);
      buf.push_back(q * std::sqrt(q));
    }
    const double mass = h3 * pairwise_sum(buf);
    out.t.push_back(s.t);
    out.radius.push_back(radius);
    out.mass.push_back(mass);
    if (s.t > T - delta) {
      window_seen = true;
      if (!(mass >= eps)) window_ok = false;
    }
  }
  out.pass = window_seen && window_ok;
  return out;
}

}  // namespace mp
