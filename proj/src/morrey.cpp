#include "mp/morrey.hpp"

#include <algorithm>
#include <cmath>

#include "mp/util.hpp"

namespace mp {

namespace {

// Slice membership in a time window, with a tolerance that forgives the
// rounding of accumulated step times at the window edges.
bool in_window(double s, double lo, double hi) {
  const double tol = 1e-9 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  return s >= lo - tol && s <= hi + tol;
}

void check_trajectory(const std::vector<State>& traj) {
  if (traj.size() < 2)
    throw config_error("morrey: need at least two recorded slices");
  const GridSpec& g = traj.front().u.grid;
  g.validate();
  for (std::size_t j = 0; j < traj.size(); ++j) {
    const State& s = traj[j];
    if (!(s.u.grid == g) || s.u.c[0].size() != g.cells())
      throw config_error("morrey: trajectory slices disagree on the grid");
    if (j > 0 && !(traj[j].t > traj[j - 1].t))
      throw config_error("morrey: trajectory times must be strictly increasing");
  }
}

// |f|^p cell by cell; p = 2 stays in the exact squared-norm arithmetic.
std::vector<double> pth_power(const VectorField& f, double p) {
  const std::size_t m = f.c[0].size();
  std::vector<double> pp(m);
  const double halfp = 0.5 * p;
  for (std::size_t i = 0; i < m; ++i) {
    const double ff = f.c[0][i] * f.c[0][i] + f.c[1][i] * f.c[1][i] +
                      f.c[2][i] * f.c[2][i];
    pp[i] = halfp == 1.0 ? ff : std::pow(ff, halfp);
  }
  return pp;
}

double root(double bracket, double p) {
  return p == 2.0 ? std::sqrt(bracket) : std::pow(bracket, 1.0 / p);
}

// Ball sums around every lattice center, in center scan order.
std::vector<double> ball_sums(const GridSpec& g,
                              const std::vector<std::array<int, 3>>& offsets,
                              int stride, const std::vector<double>& pp) {
  const double h3 = g.h() * g.h() * g.h();
  std::vector<double> out;
  std::vector<double> buf;
  buf.reserve(offsets.size());
  for (int i3 = 0; i3 < g.n; i3 += stride)
    for (int i2 = 0; i2 < g.n; i2 += stride)
      for (int i1 = 0; i1 < g.n; i1 += stride) {
        buf.clear();
        for (const auto& o : offsets) {
          const int a1 = (i1 + o[0] + g.n) % g.n;
          const int a2 = (i2 + o[1] + g.n) % g.n;
          const int a3 = (i3 + o[2] + g.n) % g.n;
          buf.push_back(pp[g.idx(a1, a2, a3)]);
        }
        out.push_back(h3 * pairwise_sum(buf));
      }
  return out;
}

std::array<double, 3> center_point(const GridSpec& g, int stride,
                                   std::size_t flat) {
  const int per = (g.n + stride - 1) / stride;
  const int c1 = static_cast<int>(flat) % per;
  const int c2 = static_cast<int>(flat / per) % per;
  const int c3 = static_cast<int>(flat / (static_cast<std::size_t>(per) * per));
  return g.point(c1 * stride, c2 * stride, c3 * stride);
}

}  // namespace

void MorreyParams::validate() const {
  if (!(p > 1.0) || !std::isfinite(p) || !(q >= p) || !std::isfinite(q))
    throw config_error("morrey: need 1 < p <= q, finite");
  if (radii.empty()) throw config_error("morrey: radii set is empty");
  for (double r : radii)
    if (!(r > 0.0) || !std::isfinite(r))
      throw config_error("morrey: radii must be positive");
  if (center_stride < 1)
    throw config_error("morrey: center_stride must be >= 1");
}

std::vector<double> dyadic_radii(const GridSpec& g) {
  g.validate();
  std::vector<double> out;
  const double cap = 0.5 * g.box_length * (1.0 + 1e-12);
  for (double r = g.h(); r <= cap; r *= 2.0) out.push_back(r);
  return out;
}

MorreyEstimate morrey_spatial(const VectorField& f, const MorreyParams& params) {
  params.validate();
  const GridSpec& g = f.grid;
  g.validate();
  for (int k = 0; k < 3; ++k)
    if (f.c[k].size() != g.cells())
      throw config_error("morrey_spatial: field size disagrees with its grid");

  const std::vector<double> pp = pth_power(f, params.p);
  const double wexp = -3.0 * (1.0 - params.p / params.q);

  MorreyEstimate est;
  double sup = 0.0;
  for (double r : params.radii) {
    const auto offsets = ball_offsets(g, r);
    const double weight = std::pow(r, wexp);
    const std::vector<double> sums =
        ball_sums(g, offsets, params.center_stride, pp);
    for (std::size_t c = 0; c < sums.size(); ++c) {
      const double bracket = weight * sums[c];
      if (bracket > sup) {
        sup = bracket;
        est.center = center_point(g, params.center_stride, c);
        est.radius = r;
      }
    }
  }
  est.value = root(sup, params.p);
  return est;
}

MorreyEstimate morrey_parabolic(const std::vector<State>& traj,
                                const MorreyParams& params) {
  params.validate();
  check_trajectory(traj);
  const GridSpec& g = traj.front().u.grid;
  const std::size_t m = traj.size();

  std::vector<std::vector<double>> pp(m);
  for (std::size_t j = 0; j < m; ++j) pp[j] = pth_power(traj[j].u, params.p);
  const double wexp = -5.0 * (1.0 - params.p / params.q);

  MorreyEstimate est;
  double sup = 0.0;
  for (double r : params.radii) {
    const auto offsets = ball_offsets(g, r);
    const double weight = std::pow(r, wexp);
    std::vector<std::vector<double>> sums(m);
    for (std::size_t j = 0; j < m; ++j)
      sums[j] = ball_sums(g, offsets, params.center_stride, pp[j]);
    for (std::size_t jt = 0; jt < m; ++jt) {
      const double t0 = traj[jt].t;
      // Recorded slices inside the two-sided window, a contiguous run.
      std::size_t lo = m, hi = 0;
      for (std::size_t j = 0; j < m; ++j)
        if (in_window(traj[j].t, t0 - r * r, t0 + r * r)) {
          lo = std::min(lo, j);
          hi = std::max(hi, j);
        }
      if (lo >= hi) continue;  // fewer than two slices
      for (std::size_t c = 0; c < sums[0].size(); ++c) {
        double acc = 0.0;
        for (std::size_t j = lo; j < hi; ++j)
          acc += 0.5 * (sums[j][c] + sums[j + 1][c]) *
                 (traj[j + 1].t - traj[j].t);
        const double bracket = weight * acc;
        if (bracket > sup) {
          sup = bracket;
          est.center = center_point(g, params.center_stride, c);
          est.radius = r;
          est.time = t0;
        }
      }
    }
  }
  est.value = root(sup, params.p);
  return est;
}

MorreyEstimate type_one_to_morrey_bridge(const TypeIReport& report) {
  MorreyEstimate est;
  est.value = std::sqrt(report.M);
  est.center = report.x0;
  est.radius = report.r;
  est.time = report.t;
  return est;
}

EmbeddingCheck type_one_embedding_check(const std::vector<State>& traj,
                                        double r0, double T,
                                        int center_stride) {
  const TypeIReport rep = type_one_monitor(traj, r0, T, center_stride);
  EmbeddingCheck chk;
  chk.spatial = std::sqrt(rep.M);

  const GridSpec& g = traj.front().u.grid;
  const double h = g.h();
  const double tol = 1e-9 * std::max(1.0, std::abs(T));

  std::vector<double> radii{r0};
  for (double rr = 0.5 * r0; rr >= h; rr *= 0.5) radii.push_back(rr);

  std::vector<std::size_t> sel;
  for (std::size_t j = 0; j < traj.size(); ++j)
    if (traj[j].t > T - r0 * r0 - tol && traj[j].t <= T + tol)
      sel.push_back(j);

  std::vector<std::vector<double>> pp(sel.size());
  for (std::size_t j = 0; j < sel.size(); ++j)
    pp[j] = pth_power(traj[sel[j]].u, 2.0);

  double sup = 0.0;
  for (double rr : radii) {
    const auto offsets = ball_offsets(g, rr);
    const double weight = std::pow(rr, -3.0);
    // Monitored times for this radius: the contiguous tail of sel.
    std::vector<std::size_t> live;
    for (std::size_t j = 0; j < sel.size(); ++j)
      if (traj[sel[j]].t > T - rr * rr - tol) live.push_back(j);
    if (live.size() < 2) continue;
    std::vector<std::vector<double>> sums(live.size());
    for (std::size_t j = 0; j < live.size(); ++j)
      sums[j] = ball_sums(g, offsets, center_stride, pp[live[j]]);
    for (std::size_t jt = 0; jt < live.size(); ++jt) {
      const double t0 = traj[sel[live[jt]]].t;
      std::size_t lo = live.size(), hi = 0;
      for (std::size_t j = 0; j < live.size(); ++j)
        if (in_window(traj[sel[live[j]]].t, t0 - rr * rr, t0 + rr * rr)) {
          lo = std::min(lo, j);
          hi = std::max(hi, j);
        }
      if (lo >= hi) continue;
      for (std::size_t c = 0; c < sums[0].size(); ++c) {
        double acc = 0.0;
        for (std::size_t j = lo; j < hi; ++j)
          acc += 0.5 * (sums[j][c] + sums[j + 1][c]) *
                 (traj[sel[live[j + 1]]].t - traj[sel[live[j]]].t);
        sup = std::max(sup, weight * acc);
      }
    }
  }
  chk.parabolic = std::sqrt(sup);
  chk.holds = chk.parabolic <= chk.constant * chk.spatial * (1.0 + 1e-12);
  return chk;
}

}  // namespace mp
