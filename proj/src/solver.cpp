#include "mp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace mp {

void SolverConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw config_error("dt must be positive");
  if (!(t_end > 0.0) || !std::isfinite(t_end))
    throw config_error("t_end must be positive");
  if (record_every < 1) throw config_error("record_every must be >= 1");
  if (!(cfl >= 0.0) || !std::isfinite(cfl)) throw config_error("cfl must be >= 0");
}

double cfl_dt(const VectorField& u) {
  check_finite(u, "cfl_dt");
  double m = 0.0;
  for (std::size_t i = 0; i < u.c[0].size(); ++i)
    m = std::max(m, std::abs(u.c[0][i]) + std::abs(u.c[1][i]) + std::abs(u.c[2][i]));
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return u.grid.h() / m;
}

std::array<ScalarField, 9> wmatrix(const VectorField& w) {
  check_finite(w, "wmatrix");
  const GridSpec& g = w.grid;
  std::array<ScalarField, 9> m{make_scalar(g), make_scalar(g), make_scalar(g),
                               make_scalar(g), make_scalar(g), make_scalar(g),
                               make_scalar(g), make_scalar(g), make_scalar(g)};
  // rows: ( 0    w3  -w2 )
  //       (-w3   0    w1 )   with row divergence d_j W_ij = (curl w)_i
  //       ( w2  -w1   0  )
  for (std::size_t i = 0; i < g.cells(); ++i) {
    m[1].s[i] = w.c[2][i];
    m[2].s[i] = -w.c[1][i];
    m[3].s[i] = -w.c[2][i];
    m[5].s[i] = w.c[0][i];
    m[6].s[i] = w.c[1][i];
    m[7].s[i] = -w.c[0][i];
  }
  return m;
}

struct RhsOpts {
  bool nonlinear;
  bool coupling;
  bool with_linear;  // include the diffusive/damping terms explicitly
  int cutoff;        // 2/3-rule cutoff for products; < 0 disables
};

namespace {

constexpr std::complex<double> I{0.0, 1.0};

SpectralTriple triple(const GridSpec& g) {
  return {make_spectral(g), make_spectral(g), make_spectral(g)};
}

void zero(SpectralTriple& f) {
  for (auto& c : f) std::fill(c.m.begin(), c.m.end(), std::complex<double>(0.0));
}

void assign(SpectralTriple& y, const SpectralTriple& x) {
  for (int c = 0; c < 3; ++c) y[c].m = x[c].m;
}

void add_scaled(SpectralTriple& y, double a, const SpectralTriple& x) {
  for (int c = 0; c < 3; ++c) {
    auto* yp = y[c].m.data();
    const auto* xp = x[c].m.data();
    parallel_for(y[c].m.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) yp[i] += a * xp[i];
    });
  }
}

// exp(dt * lap) per mode; the Nyquist shell carries no derivative symbol and
// is left untouched (factor 1), consistent with the operator convention.
void velocity_semigroup(const GridSpec& g, SpectralTriple& u, double dt) {
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    if (ny) return;
    const double e = std::exp(-(k1 * k1 + k2 * k2 + k3 * k3) * dt);
    u[0].m[id] *= e;
    u[1].m[id] *= e;
    u[2].m[id] *= e;
  });
}

// exp(dt * (lap + grad div - 1)) per mode. kappa kappa^T has eigenvalue |k|^2
// along kappa and 0 across, so the factor is exp(-(1+|k|^2)dt) across kappa
// and exp(-(1+2|k|^2)dt) along it. On the Nyquist shell and the mean mode only
// the zeroth-order damping acts: factor exp(-dt).
void spin_semigroup(const GridSpec& g, SpectralTriple& w, double dt) {
  const double e0 = std::exp(-dt);
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    const double m2 = k1 * k1 + k2 * k2 + k3 * k3;
    if (ny || m2 == 0.0) {
      w[0].m[id] *= e0;
      w[1].m[id] *= e0;
      w[2].m[id] *= e0;
      return;
    }
    const double eperp = std::exp(-(1.0 + m2) * dt);
    const double epar = std::exp(-(1.0 + 2.0 * m2) * dt);
    const std::complex<double> kd =
        (k1 * w[0].m[id] + k2 * w[1].m[id] + k3 * w[2].m[id]) / m2;
    const std::complex<double> p0 = k1 * kd, p1 = k2 * kd, p2 = k3 * kd;
    w[0].m[id] = eperp * (w[0].m[id] - p0) + epar * p0;
    w[1].m[id] = eperp * (w[1].m[id] - p1) + epar * p1;
    w[2].m[id] = eperp * (w[2].m[id] - p2) + epar * p2;
  });
}

// out[i] -= i kappa_axis * f per bin (divergence-form advection accumulator).
void subtract_derivative(const GridSpec& g, const SpectralField& f, int axis,
                         SpectralField& out) {
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    if (ny) return;
    const double ka = axis == 0 ? k1 : (axis == 1 ? k2 : k3);
    out.m[id] -= I * ka * f.m[id];
  });
}

void add_half_curl(const GridSpec& g, const SpectralTriple& f, SpectralTriple& out) {
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    if (ny) return;
    out[0].m[id] += 0.5 * I * (k2 * f[2].m[id] - k3 * f[1].m[id]);
    out[1].m[id] += 0.5 * I * (k3 * f[0].m[id] - k1 * f[2].m[id]);
    out[2].m[id] += 0.5 * I * (k1 * f[1].m[id] - k2 * f[0].m[id]);
  });
}

// du = P[-(u.grad)u + curl(w)/2 (+ lap u)]
// dw = -(u.grad)w + curl(u)/2 (+ lap w + grad div w - w)
// Advection in divergence form, valid because u is kept solenoidal; products
// are truncated before differentiation so they are exact for band-limited
// states and the semi-discrete advection terms conserve energy.
void eval_rhs(const GridSpec& g, const SpectralTriple& uh, const SpectralTriple& wh,
              SpectralTriple& du, SpectralTriple& dw, const RhsOpts& o) {
  zero(du);
  zero(dw);
  if (o.nonlinear) {
    const VectorField u = from_spectral(uh);
    const VectorField w = from_spectral(wh);
    ScalarField prod = make_scalar(g);
    const std::size_t nc = g.cells();
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        const double* a = u.c[i].data();
        const double* b = u.c[j].data();
        double* p = prod.s.data();
        parallel_for(nc, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t q = lo; q < hi; ++q) p[q] = a[q] * b[q];
        });
        SpectralField ph = to_spectral(prod);
        if (o.cutoff >= 0) dealias(ph, o.cutoff);
        subtract_derivative(g, ph, j, du[i]);
        if (i != j) subtract_derivative(g, ph, i, du[j]);
      }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double* a = w.c[i].data();
        const double* b = u.c[j].data();
        double* p = prod.s.data();
        parallel_for(nc, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t q = lo; q < hi; ++q) p[q] = a[q] * b[q];
        });
        SpectralField ph = to_spectral(prod);
        if (o.cutoff >= 0) dealias(ph, o.cutoff);
        subtract_derivative(g, ph, j, dw[i]);
      }
  }
  if (o.coupling) {
    add_half_curl(g, wh, du);
    add_half_curl(g, uh, dw);
  }
  if (o.with_linear) {
    for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
      const double m2 = ny ? 0.0 : k1 * k1 + k2 * k2 + k3 * k3;
      du[0].m[id] -= m2 * uh[0].m[id];
      du[1].m[id] -= m2 * uh[1].m[id];
      du[2].m[id] -= m2 * uh[2].m[id];
      const std::complex<double> kd =
          ny ? 0.0 : k1 * wh[0].m[id] + k2 * wh[1].m[id] + k3 * wh[2].m[id];
      // the -w damping is zeroth order and acts on every bin
      dw[0].m[id] -= m2 * wh[0].m[id] + k1 * kd + wh[0].m[id];
      dw[1].m[id] -= m2 * wh[1].m[id] + k2 * kd + wh[1].m[id];
      dw[2].m[id] -= m2 * wh[2].m[id] + k3 * kd + wh[2].m[id];
    });
  }
  leray_spec(du);
}

bool finite_triple(const SpectralTriple& f) {
  for (const auto& c : f) {
    double acc = 0.0;
    for (const auto& v : c.m) acc += std::norm(v);
    if (!std::isfinite(acc)) return false;
  }
  return true;
}

}  // namespace

Integrator::Integrator(const State& init, const SolverConfig& cfg)
    : g_(init.u.grid), cfg_(cfg), t_(init.t) {
  cfg_.validate();
  g_.validate();
  if (!(init.w.grid == g_)) throw config_error("integrator: u and w live on different grids");
  uh_ = to_spectral(init.u);
  wh_ = to_spectral(init.w);
  if (cfg_.dealias) {
    const int K = dealias_cutoff(g_.n);
    dealias(uh_, K);
    dealias(wh_, K);
  }
  leray_spec(uh_);
  up_ = uh_;
  wp_ = wh_;
  k1u_ = triple(g_);
  k1w_ = triple(g_);
  k2u_ = triple(g_);
  k2w_ = triple(g_);
  tu_ = triple(g_);
  tw_ = triple(g_);
}

void Integrator::advance() {
  assign(up_, uh_);
  assign(wp_, wh_);
  const double dt = cfg_.dt;
  const RhsOpts o{cfg_.nonlinear, cfg_.coupling, !cfg_.nu_scheme,
                  cfg_.dealias ? dealias_cutoff(g_.n) : -1};
  try {
    run_stages(o, dt);
  } catch (const config_error&) {
    // the advective products overflowed before the transform; same verdict
    // as a non-finite result below, just caught one stage earlier
    assign(uh_, up_);
    assign(wh_, wp_);
    throw blowup_error("numerical blow-up", t_);
  }
  leray_spec(uh_);
  if (!finite_triple(uh_) || !finite_triple(wh_)) {
    assign(uh_, up_);
    assign(wh_, wp_);
    throw blowup_error("numerical blow-up", t_);
  }
  t_ += dt;
}

// the two Heun variants; may throw from the product transforms on overflow
void Integrator::run_stages(const RhsOpts& o, double dt) {
  eval_rhs(g_, uh_, wh_, k1u_, k1w_, o);
  if (cfg_.nu_scheme) {
    // Heun in integrating-factor variables:
    //   y* = E(dt)(y + dt k1),  k2 = N(y*),  y+ = E(dt)y + dt/2 (E(dt)k1 + k2)
    // E is exact on the linear part, so linear dynamics incur no time error.
    assign(tu_, uh_);
    add_scaled(tu_, dt, k1u_);
    assign(tw_, wh_);
    add_scaled(tw_, dt, k1w_);
    velocity_semigroup(g_, tu_, dt);
    spin_semigroup(g_, tw_, dt);
    eval_rhs(g_, tu_, tw_, k2u_, k2w_, o);
    velocity_semigroup(g_, uh_, dt);
    spin_semigroup(g_, wh_, dt);
    velocity_semigroup(g_, k1u_, dt);
    spin_semigroup(g_, k1w_, dt);
    add_scaled(uh_, 0.5 * dt, k1u_);
    add_scaled(uh_, 0.5 * dt, k2u_);
    add_scaled(wh_, 0.5 * dt, k1w_);
    add_scaled(wh_, 0.5 * dt, k2w_);
  } else {
    assign(tu_, uh_);
    add_scaled(tu_, dt, k1u_);
    assign(tw_, wh_);
    add_scaled(tw_, dt, k1w_);
    eval_rhs(g_, tu_, tw_, k2u_, k2w_, o);
    add_scaled(uh_, 0.5 * dt, k1u_);
    add_scaled(uh_, 0.5 * dt, k2u_);
    add_scaled(wh_, 0.5 * dt, k1w_);
    add_scaled(wh_, 0.5 * dt, k2w_);
  }
}

State Integrator::state() const {
  State s;
  s.u = from_spectral(uh_);
  s.w = from_spectral(wh_);
  s.t = t_;
  return s;
}

EnergySample Integrator::sample() const {
  EnergySample s;
  s.t = t_;
  s.energy_u = l2sq_spec(uh_);
  s.energy_w = l2sq_spec(wh_);
  s.grad_u = h1dot_sq_spec(uh_);
  s.grad_w = h1dot_sq_spec(wh_);
  s.div_w = divergence_sq_spec(wh_);
  s.cross = curl_inner_spec(uh_, wh_);
  return s;
}

void rhs(const VectorField& u, const VectorField& w, VectorField& du,
         VectorField& dw, const SolverConfig& cfg) {
  if (!(u.grid == w.grid)) throw config_error("rhs: u and w live on different grids");
  check_finite(u, "rhs");
  check_finite(w, "rhs");
  if (linf(divergence(u)) > 1e-10 * std::max(1.0, linf(u)))
    throw config_error("rhs: velocity is not divergence-free within tolerance");
  const GridSpec& g = u.grid;
  const SpectralTriple uh = to_spectral(u);
  const SpectralTriple wh = to_spectral(w);
  SpectralTriple duh = triple(g), dwh = triple(g);
  const RhsOpts o{cfg.nonlinear, cfg.coupling, true,
                  cfg.dealias ? dealias_cutoff(g.n) : -1};
  eval_rhs(g, uh, wh, duh, dwh, o);
  du = from_spectral(duh);
  dw = from_spectral(dwh);
}

State step(const State& s, const SolverConfig& cfg) {
  Integrator it(s, cfg);
  it.advance();
  return it.state();
}

ScalarField recover_pressure(const VectorField& u) {
  check_finite(u, "recover_pressure");
  const GridSpec& g = u.grid;
  g.validate();
  // -lap p = div div (u (x) u): accumulate q = sum_ij k_i k_j (u_i u_j)^ and
  // invert p^ = -q / |k|^2 with zero mean; the Nyquist shell carries no
  // derivative symbol, so p^ vanishes there and the residual is exact.
  SpectralField acc = make_spectral(g);
  ScalarField prod = make_scalar(g);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      for (std::size_t q = 0; q < g.cells(); ++q) prod.s[q] = u.c[i][q] * u.c[j][q];
      const SpectralField ph = to_spectral(prod);
      const double fac = i == j ? 1.0 : 2.0;
      for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
        if (ny) return;
        const double ki = i == 0 ? k1 : (i == 1 ? k2 : k3);
        const double kj = j == 0 ? k1 : (j == 1 ? k2 : k3);
        acc.m[id] += fac * ki * kj * ph.m[id];
      });
    }
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    const double m2 = k1 * k1 + k2 * k2 + k3 * k3;
    acc.m[id] = (ny || m2 == 0.0) ? 0.0 : -acc.m[id] / m2;
  });
  return from_spectral(acc);
}

namespace {

// (a.grad)b evaluated with spectral derivatives and pointwise contraction.
VectorField convective(const VectorField& a, const VectorField& b) {
  const auto t = gradient_tensor(b);
  VectorField out = make_vector(a.grid);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < out.c[i].size(); ++q)
      out.c[i][q] = a.c[0][q] * t[3 * i + 0].s[q] + a.c[1][q] * t[3 * i + 1].s[q] +
                    a.c[2][q] * t[3 * i + 2].s[q];
  return out;
}

}  // namespace

VectorField eq1_residual(const VectorField& du_dt, const VectorField& u,
                         const ScalarField& p, const VectorField& w) {
  if (!(du_dt.grid == u.grid) || !(p.grid == u.grid) || !(w.grid == u.grid))
    throw config_error("eq1_residual: grid mismatch");
  const VectorField lap = laplacian(u);
  const VectorField adv = convective(u, u);
  const VectorField gp = gradient(p);
  const VectorField cw = curl(w);
  VectorField res = make_vector(u.grid);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < res.c[i].size(); ++q)
      res.c[i][q] =
          du_dt.c[i][q] - lap.c[i][q] + adv.c[i][q] + gp.c[i][q] - 0.5 * cw.c[i][q];
  return res;
}

VectorField eq2_residual(const VectorField& dw_dt, const VectorField& u,
                         const VectorField& w) {
  if (!(dw_dt.grid == w.grid) || !(u.grid == w.grid))
    throw config_error("eq2_residual: grid mismatch");
  const VectorField lap = laplacian(w);
  const VectorField gd = grad_div(w);
  const VectorField adv = convective(u, w);
  const VectorField cu = curl(u);
  VectorField res = make_vector(w.grid);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < res.c[i].size(); ++q)
      res.c[i][q] = dw_dt.c[i][q] - lap.c[i][q] - gd.c[i][q] + w.c[i][q] +
                    adv.c[i][q] - 0.5 * cu.c[i][q];
  return res;
}

namespace {

int scale_ratio(double lambda, bool& reciprocal) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw config_error("scale: lambda must be positive");
  const double r = std::round(lambda);
  if (r >= 1.0 && std::abs(lambda - r) <= 1e-9 * r) {
    reciprocal = false;
    return static_cast<int>(r);
  }
  const double inv = 1.0 / lambda;
  const double ri = std::round(inv);
  if (ri >= 2.0 && std::abs(inv - ri) <= 1e-9 * ri) {
    reciprocal = true;
    return static_cast<int>(ri);
  }
  throw config_error("scale: lambda must be an integer or the reciprocal of one");
}

// Exact remap f(x) -> f(lambda x): modes move to lambda * k. Content on the
// Nyquist shell or incompatible with lambda (landing outside the band for
// lambda = m, or off the m-periodic sublattice for lambda = 1/m) is rejected
// above a relative floor of 1e-13.
SpectralField scale_spec(const SpectralField& in, int m, bool reciprocal,
                         double factor) {
  const GridSpec& g = in.grid;
  const int n = g.n, half = n / 2;
  double maxmag = 0.0;
  for (const auto& v : in.m) maxmag = std::max(maxmag, std::abs(v));
  const double tol = 1e-13 * maxmag;

  std::size_t id = 0;
  for (int j3 = 0; j3 < n; ++j3)
    for (int j2 = 0; j2 < n; ++j2)
      for (int j1 = 0; j1 < g.nh(); ++j1, ++id) {
        if (std::abs(in.m[id]) <= tol) continue;
        const int a1 = j1 == half ? half : j1;
        const int a2 = std::abs(g.signed_k(j2));
        const int a3 = std::abs(g.signed_k(j3));
        if (a1 == half || a2 == half || a3 == half)
          throw config_error("scale: field carries Nyquist content");
        if (!reciprocal) {
          if (m * std::max({a1, a2, a3}) > half - 1)
            throw config_error("scale: modes alias out of band under lambda");
        } else {
          if (a1 % m != 0 || std::abs(g.signed_k(j2)) % m != 0 ||
              std::abs(g.signed_k(j3)) % m != 0)
            throw config_error("scale: field is not periodic on the lambda sublattice");
        }
      }

  SpectralField out = make_spectral(g);
  id = 0;
  for (int j3 = 0; j3 < n; ++j3)
    for (int j2 = 0; j2 < n; ++j2)
      for (int j1 = 0; j1 < g.nh(); ++j1, ++id) {
        const int q1 = j1, q2 = g.signed_k(j2), q3 = g.signed_k(j3);
        if (g.nyquist(j1) || g.nyquist(j2) || g.nyquist(j3)) continue;
        if (!reciprocal) {
          if (q1 % m != 0 || q2 % m != 0 || q3 % m != 0) continue;
          out.m[id] = factor * mode(in, q1 / m, q2 / m, q3 / m);
        } else {
          if (std::max({std::abs(q1), std::abs(q2), std::abs(q3)}) * m > half - 1)
            continue;
          out.m[id] = factor * mode(in, m * q1, m * q2, m * q3);
        }
      }
  return out;
}

}  // namespace

ScalarField scale_field(const ScalarField& f, double lambda, int power) {
  bool reciprocal = false;
  const int m = scale_ratio(lambda, reciprocal);
  const double factor = std::pow(lambda, power);
  if (m == 1 && !reciprocal && power == 0) return f;
  return from_spectral(scale_spec(to_spectral(f), m, reciprocal, factor));
}

VectorField scale_field(const VectorField& f, double lambda, int power) {
  bool reciprocal = false;
  const int m = scale_ratio(lambda, reciprocal);
  const double factor = std::pow(lambda, power);
  const SpectralTriple s = to_spectral(f);
  SpectralTriple out{scale_spec(s[0], m, reciprocal, factor),
                     scale_spec(s[1], m, reciprocal, factor),
                     scale_spec(s[2], m, reciprocal, factor)};
  return from_spectral(out);
}

ScaledTriplet scale_triplet(const VectorField& u, const ScalarField& p,
                            const VectorField& w, double lambda) {
  return ScaledTriplet{scale_field(u, lambda, 1), scale_field(p, lambda, 2),
                       scale_field(w, lambda, 2)};
}

Trajectory simulate(const State& init, const SolverConfig& cfg,
                    const RecordObserver& on_record) {
  cfg.validate();
  Trajectory tr;
  tr.grid = init.u.grid;
  tr.config = cfg;
  const long nsteps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  if (nsteps < 1) throw config_error("t_end must cover at least one step");
  Integrator it(init, cfg);
  if (cfg.cfl > 0.0 && cfg.dt > cfg.cfl * cfl_dt(init.u))
    throw config_error("dt exceeds the advective CFL bound at t = 0");

  const auto record = [&](long stepidx) {
    tr.record_steps.push_back(stepidx);
    const State s = it.state();
    if (cfg.cfl > 0.0 && !tr.cfl_exceeded && cfg.dt > cfg.cfl * cfl_dt(s.u)) {
      tr.cfl_exceeded = true;
      tr.cfl_exceeded_time = s.t;
    }
    if (on_record) on_record(s, stepidx);
  };

  tr.series.push_back(it.sample());
  record(0);
  for (long i = 1; i <= nsteps; ++i) {
    try {
      it.advance();
    } catch (const blowup_error& e) {
      tr.blew_up = true;
      tr.blowup_time = e.last_valid_time;
      if (tr.record_steps.empty() || tr.record_steps.back() != i - 1) record(i - 1);
      break;
    }
    tr.series.push_back(it.sample());
    if (i % cfg.record_every == 0 || i == nsteps) record(i);
  }
  tr.final_state = it.state();
  return tr;
}

namespace {

// Cumulative integral on a uniform grid: Simpson panels with stride two,
// seeded at index 1 by the three-point half-panel rule (exact on quadratics).
std::vector<double> cumulative_integral(const std::vector<double>& f, double dt) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  if (n == 2) {
    out[1] = 0.5 * dt * (f[0] + f[1]);
    return out;
  }
  out[1] = dt / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
  for (std::size_t i = 2; i < n; ++i)
    out[i] = out[i - 2] + dt / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
  return out;
}

}  // namespace

std::vector<BudgetRow> energy_budget(const Trajectory& tr) {
  const auto& s = tr.series;
  std::vector<BudgetRow> rows(s.size());
  if (s.empty()) return rows;
  const double dt = tr.config.dt;
  std::vector<double> dis(s.size()), pat(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    dis[i] = s[i].grad_u + s[i].grad_w + s[i].div_w + s[i].energy_w - s[i].cross;
    pat[i] = s[i].grad_u + 2.0 * s[i].grad_w + s[i].energy_w + 2.0 * s[i].div_w;
  }
  const std::vector<double> idis = cumulative_integral(dis, dt);
  const std::vector<double> ipat = cumulative_integral(pat, dt);
  const double e0 = 0.5 * (s[0].energy_u + s[0].energy_w);
  const double n0 = s[0].energy_u + s[0].energy_w;
  for (std::size_t i = 0; i < s.size(); ++i) {
    BudgetRow& r = rows[i];
    r.t = s[i].t;
    r.energy_u = s[i].energy_u;
    r.energy_w = s[i].energy_w;
    r.grad_u = s[i].grad_u;
    r.grad_w = s[i].grad_w;
    r.div_w = s[i].div_w;
    const double elapsed = s[i].t - s[0].t;
    r.balance_residual = (0.5 * (s[i].energy_u + s[i].energy_w) - e0 + idis[i]) /
                         (std::max(e0, 1e-300) * std::max(elapsed, dt));
    r.def11_slack = (s[i].energy_u + s[i].energy_w) + ipat[i] - n0;
  }
  return rows;
}

std::vector<double> divw_residual(const std::vector<State>& snaps) {
  if (snaps.size() < 3)
    throw config_error("divw_residual: need at least three snapshots");
  const GridSpec& g = snaps[0].u.grid;
  const double dtr = snaps[1].t - snaps[0].t;
  if (!(dtr > 0.0)) throw config_error("divw_residual: snapshots must advance in time");
  for (std::size_t j = 0; j < snaps.size(); ++j) {
    if (!(snaps[j].u.grid == g) || !(snaps[j].w.grid == g))
      throw config_error("divw_residual: snapshots on mixed grids");
    if (j > 0 && std::abs(snaps[j].t - snaps[j - 1].t - dtr) > 1e-9 * dtr)
      throw config_error("divw_residual: snapshots must be uniformly spaced");
  }
  const int K = dealias_cutoff(g.n);
  std::vector<double> norms;
  norms.reserve(snaps.size() - 2);
  ScalarField prod = make_scalar(g);
  for (std::size_t j = 1; j + 1 < snaps.size(); ++j) {
    const ScalarField dprev = divergence(snaps[j - 1].w);
    const ScalarField dnext = divergence(snaps[j + 1].w);
    const ScalarField dmid = divergence(snaps[j].w);
    const ScalarField lap = laplacian(dmid);
    // div div (w (x) u) with the integrator's product truncation
    SpectralField acc = make_spectral(g);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        for (std::size_t q = 0; q < g.cells(); ++q)
          prod.s[q] = snaps[j].w.c[a][q] * snaps[j].u.c[b][q];
        SpectralField ph = to_spectral(prod);
        dealias(ph, K);
        for_each_spectral_bin(g,
                              [&](std::size_t id, double k1, double k2, double k3, bool ny) {
                                if (ny) return;
                                const double ka = a == 0 ? k1 : (a == 1 ? k2 : k3);
                                const double kb = b == 0 ? k1 : (b == 1 ? k2 : k3);
                                acc.m[id] -= ka * kb * ph.m[id];
                              });
      }
    const ScalarField src = from_spectral(acc);
    ScalarField res = make_scalar(g);
    for (std::size_t q = 0; q < g.cells(); ++q)
      res.s[q] = (dnext.s[q] - dprev.s[q]) / (2.0 * dtr) - 2.0 * lap.s[q] +
                 dmid.s[q] + src.s[q];
    norms.push_back(l2(res));
  }
  return norms;
}

VectorField taylor_green_velocity(const GridSpec& g, double amplitude, int a) {
  g.validate();
  if (a < 1 || a > g.n / 2 - 1)
    throw config_error("taylor_green_velocity: wavenumber out of band");
  if (!std::isfinite(amplitude))
    throw config_error("taylor_green_velocity: non-finite amplitude");
  const double s = 2.0 * M_PI / g.box_length * a;
  return sample_vector(g, [amplitude, s](double x1, double x2, double) {
    return std::array<double, 3>{amplitude * std::cos(s * x1) * std::sin(s * x2),
                                 -amplitude * std::sin(s * x1) * std::cos(s * x2),
                                 0.0};
  });
}

VectorField single_mode_velocity(const GridSpec& g, double amplitude, int q) {
  g.validate();
  if (q < 1 || q > g.n / 2 - 1)
    throw config_error("single_mode_velocity: wavenumber out of band");
  const double s = 2.0 * M_PI / g.box_length * q;
  return sample_vector(g, [amplitude, s](double, double, double x3) {
    return std::array<double, 3>{amplitude * std::sin(s * x3), 0.0, 0.0};
  });
}

VectorField single_mode_spin(const GridSpec& g, double amplitude, int q) {
  g.validate();
  if (q < 1 || q > g.n / 2 - 1)
    throw config_error("single_mode_spin: wavenumber out of band");
  const double s = 2.0 * M_PI / g.box_length * q;
  return sample_vector(g, [amplitude, s](double, double, double x3) {
    return std::array<double, 3>{0.0, 0.0, amplitude * std::sin(s * x3)};
  });
}

VectorField self_similar_velocity(const GridSpec& g, double amplitude, double sigma,
                                  double tau) {
  g.validate();
  if (!(sigma > 0.0) || !(tau > 0.0))
    throw config_error("self_similar_velocity: sigma and tau must be positive");
  const double L = g.box_length;
  const double c = 0.5 * L;
  const double s = std::sqrt(tau);
  const auto wrap = [L](double d) { return d - L * std::round(d / L); };
  return sample_vector(g, [=](double x1, double x2, double x3) {
    const double xi1 = wrap(x1 - c) / s;
    const double xi2 = wrap(x2 - c) / s;
    const double xi3 = wrap(x3 - c) / s;
    const double env =
        amplitude / s *
        std::exp(-(xi1 * xi1 + xi2 * xi2 + xi3 * xi3) / (2.0 * sigma * sigma));
    return std::array<double, 3>{-xi2 * env, xi1 * env, 0.0};
  });
}

}  // namespace mp
