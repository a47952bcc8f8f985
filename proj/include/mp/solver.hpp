// Time integration of the coupled velocity / microrotation system on the
// periodic box,
//
//   d_t u = lap(u) - (u.grad)u - grad(p) + (1/2) curl(w),   div(u) = 0,
//   d_t w = lap(w) + grad(div(w)) - w - (u.grad)w + (1/2) curl(u),
//
// with the pressure gradient eliminated by the Leray projector. w carries no
// solenoidal constraint. The integrator works on spectral coefficients: the
// per-mode linear parts (lap for u; lap + grad div - 1 for w) are applied by
// their exact matrix exponentials, the advection and half-curl coupling are
// advanced by an explicit second-order Runge-Kutta step in integrating-factor
// variables. Quadratic products are formed pointwise in physical space and
// truncated by the 2/3 rule, so for band-limited states the semi-discrete
// energy identity holds to rounding and the recorded budget isolates the time
// discretization error.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "mp/grid.hpp"

namespace mp {

struct State {
  VectorField u;  // velocity, divergence-free
  VectorField w;  // microrotation
  double t = 0.0;
  ScalarField p;  // diagnostic pressure; empty unless recovered
};

struct SolverConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  bool nu_scheme = true;   // exact per-mode treatment of the linear part;
                           // false = fully explicit Runge-Kutta (reference)
  bool dealias = true;     // 2/3-rule truncation of quadratic products
  long record_every = 1;   // cadence of recorded rows / observer calls
  std::uint64_t seed = 0;  // consumed by random initial-condition families
  double cfl = 0.5;        // advective CFL fraction enforced at t = 0;
                           // re-checked at record times; 0 disables
  bool nonlinear = true;   // advection terms
  bool coupling = true;    // the half-curl exchange terms

  void validate() const;  // throws config_error
};

// Largest advective step h / max_x sum_i |u_i(x)|; +inf for a still field.
double cfl_dt(const VectorField& u);

// Entries (row-major, (i,j) at 3i+j) of the antisymmetric matrix field built
// from w whose row divergence d_j W_ij reproduces curl(w).
std::array<ScalarField, 9> wmatrix(const VectorField& w);

// Full projected right-hand side of the system at one instant:
//   du = P[lap(u) - (u.grad)u + (1/2)curl(w)]
//   dw = lap(w) + grad(div(w)) - w - (u.grad)w + (1/2)curl(u)
// Rejects u whose divergence exceeds 1e-10 * max(1, |u|_inf). The nonlinear
// and coupling switches of cfg apply; dt/t_end/record cadence do not.
void rhs(const VectorField& u, const VectorField& w, VectorField& du,
         VectorField& dw, const SolverConfig& cfg = {});

// One step of size cfg.dt. Throws blowup_error when non-finite values appear.
State step(const State& s, const SolverConfig& cfg);

// Solves -lap(p) = div div (u (x) u) spectrally with mean-zero normalization.
ScalarField recover_pressure(const VectorField& u);

// Pointwise strong-form residuals of the two equations; the caller supplies
// the time-derivative slice. Advection enters in convective form, so these
// accept fields that are not divergence-free.
VectorField eq1_residual(const VectorField& du_dt, const VectorField& u,
                         const ScalarField& p, const VectorField& w);
VectorField eq2_residual(const VectorField& dw_dt, const VectorField& u,
                         const VectorField& w);

// f_lambda(x) = lambda^power f(lambda x) for lambda an integer or the
// reciprocal of one (the lattice maps onto itself). Implemented as an exact
// spectral mode remap; fields carrying modes incompatible with lambda
// (aliasing out of band, or off the lambda-periodic sublattice) are rejected.
ScalarField scale_field(const ScalarField& f, double lambda, int power);
VectorField scale_field(const VectorField& f, double lambda, int power);

// The natural scaling of the system: u -> lambda u(lambda x),
// p -> lambda^2 p(lambda x), w -> lambda^2 w(lambda x); the time dilation
// t -> lambda^2 t is the caller's affair when sampling time-dependent data.
struct ScaledTriplet {
  VectorField u;
  ScalarField p;
  VectorField w;
};
ScaledTriplet scale_triplet(const VectorField& u, const ScalarField& p,
                            const VectorField& w, double lambda);

// Instantaneous quadratic functionals of one state.
struct EnergySample {
  double t = 0.0;
  double energy_u = 0.0;  // ||u||_2^2
  double energy_w = 0.0;  // ||w||_2^2
  double grad_u = 0.0;    // ||grad u||_2^2
  double grad_w = 0.0;    // ||grad w||_2^2
  double div_w = 0.0;     // ||div w||_2^2
  double cross = 0.0;     // integral (curl u) . w
};

// One row of the integrated energy budget. balance_residual is
//   [E(t) - E(0) + int_0^t (grad_u + grad_w + div_w + energy_w - cross)]
//     / (E(0) * max(t, dt)),   E = (energy_u + energy_w) / 2,
// which vanishes for exact solutions of the system. def11_slack is
//   energy_u + energy_w |_0^t + int_0^t (grad_u + 2 grad_w + energy_w + 2 div_w)
// and is non-positive for exact solutions (up to quadrature error), since
// 2 int (curl u).w <= ||grad u||^2 + ||w||^2 for divergence-free u.
struct BudgetRow {
  double t = 0.0;
  double energy_u = 0.0;
  double energy_w = 0.0;
  double grad_u = 0.0;
  double grad_w = 0.0;
  double div_w = 0.0;
  double balance_residual = 0.0;
  double def11_slack = 0.0;
};

struct Trajectory {
  GridSpec grid;
  SolverConfig config;
  std::vector<EnergySample> series;  // one sample per step, including t = 0
  std::vector<long> record_steps;    // indices into series at record cadence
  State final_state;                 // last valid state
  bool blew_up = false;
  double blowup_time = std::numeric_limits<double>::quiet_NaN();
  bool cfl_exceeded = false;
  double cfl_exceeded_time = std::numeric_limits<double>::quiet_NaN();
};

// Called at every record point (step 0, every record_every-th step, and the
// final step) with the freshly synthesized physical state.
using RecordObserver = std::function<void(const State&, long step)>;

// Runs ceil(t_end / dt) uniform steps from the initial state. On blow-up the
// trajectory is truncated and flagged instead of throwing.
Trajectory simulate(const State& init, const SolverConfig& cfg,
                    const RecordObserver& on_record = nullptr);

// Cumulative budget along the dense series, one row per step. Time integrals
// use composite Simpson quadrature on the uniform grid (odd endpoints closed
// by the three-point half-panel rule), so the quadrature error is higher
// order than the scheme's.
std::vector<BudgetRow> energy_budget(const Trajectory& tr);

// Residual of the divergence equation satisfied by w,
//   d_t(div w) - 2 lap(div w) + div w + div div (w (x) u) = 0,
// evaluated along uniformly spaced snapshots with a central time difference;
// returns the L2 norm at each interior snapshot. The quadratic source is
// truncated like the integrator's products so the residual measures time
// discretization alone. Needs at least three snapshots.
std::vector<double> divw_residual(const std::vector<State>& snaps);

// Spectral-state stepper behind step()/simulate(), exposed for fine-grained
// control in tests and diagnostics drivers.
struct RhsOpts;  // internal right-hand-side switches

class Integrator {
 public:
  Integrator(const State& init, const SolverConfig& cfg);

  void advance();  // one step; throws blowup_error, state stays last-valid
  double time() const { return t_; }
  const GridSpec& grid() const { return g_; }
  State state() const;          // synthesizes physical fields
  EnergySample sample() const;  // from spectral data, no transforms

 private:
  void run_stages(const RhsOpts& o, double dt);

  GridSpec g_;
  SolverConfig cfg_;
  double t_ = 0.0;
  SpectralTriple uh_, wh_;      // current state
  SpectralTriple up_, wp_;      // previous step (restored on blow-up)
  SpectralTriple k1u_, k1w_, k2u_, k2w_, tu_, tw_;  // stage storage
};

// Initial-condition families.
VectorField taylor_green_velocity(const GridSpec& g, double amplitude, int a);
// amp * (sin(q x3), 0, 0): a single divergence-free mode pair.
VectorField single_mode_velocity(const GridSpec& g, double amplitude, int q);
// amp * (0, 0, sin(q x3)): a single mode with nonzero divergence.
VectorField single_mode_spin(const GridSpec& g, double amplitude, int q);

// The radially shrinking profile u(x) = tau^{-1/2} U(d / sqrt(tau)) with
// U(xi) = amplitude * exp(-|xi|^2 / (2 sigma^2)) * (-xi_2, xi_1, 0) and d the
// minimum-image displacement from the box center; tau stands for the time to
// the focusing instant. Exactly divergence-free in the continuum; periodic by
// construction and smooth wherever the envelope has decayed at the seam.
VectorField self_similar_velocity(const GridSpec& g, double amplitude,
                                  double sigma, double tau);

}  // namespace mp
