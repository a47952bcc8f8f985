#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mp/ckn.hpp"
#include "mp/grid.hpp"
#include "mp/morrey.hpp"
#include "mp/util.hpp"
#include "support.hpp"

using namespace mp;

namespace {

State vel_slice(double t, VectorField u) {
  State s;
  s.u = std::move(u);
  s.t = t;
  return s;
}

VectorField constant_vector(const GridSpec& g, std::array<double, 3> c) {
  VectorField f = make_vector(g);
  for (int k = 0; k < 3; ++k)
    for (double& v : f.c[k]) v = c[k];
  return f;
}

VectorField scaled(VectorField f, double c) {
  for (auto& comp : f.c)
    for (double& v : comp) v *= c;
  return f;
}

// |f|^p per cell, same expression shape as the library uses.
std::vector<double> pth(const VectorField& f, double p) {
  std::vector<double> out(f.c[0].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ff = f.c[0][i] * f.c[0][i] + f.c[1][i] * f.c[1][i] +
                      f.c[2][i] * f.c[2][i];
    out[i] = std::pow(ff, 0.5 * p);
  }
  return out;
}

// Ball mass around one center by scanning the whole offset cube, plain
// left-to-right accumulation; only the membership test matches the library.
double brute_ball(const GridSpec& g, const std::vector<double>& pp, int i1,
                  int i2, int i3, double r) {
  const double h = g.h();
  const int lo = -(g.n / 2), hi = (g.n - 1) / 2;
  double sum = 0.0;
  for (int o3 = lo; o3 <= hi; ++o3)
    for (int o2 = lo; o2 <= hi; ++o2)
      for (int o1 = lo; o1 <= hi; ++o1) {
        const double d1 = o1 * h, d2 = o2 * h, d3 = o3 * h;
        if (d1 * d1 + d2 * d2 + d3 * d3 < r * r)
          sum += pp[g.idx((i1 + o1 + g.n) % g.n, (i2 + o2 + g.n) % g.n,
                          (i3 + o3 + g.n) % g.n)];
      }
  return h * h * h * sum;
}

MorreyEstimate brute_spatial(const VectorField& f, const MorreyParams& prm) {
  const GridSpec& g = f.grid;
  const std::vector<double> pp = pth(f, prm.p);
  MorreyEstimate est;
  double sup = 0.0;
  for (double r : prm.radii) {
    const double w = std::pow(r, -3.0 * (1.0 - prm.p / prm.q));
    for (int i3 = 0; i3 < g.n; i3 += prm.center_stride)
      for (int i2 = 0; i2 < g.n; i2 += prm.center_stride)
        for (int i1 = 0; i1 < g.n; i1 += prm.center_stride) {
          const double bracket = w * brute_ball(g, pp, i1, i2, i3, r);
          if (bracket > sup) {
            sup = bracket;
            est.center = g.point(i1, i2, i3);
            est.radius = r;
          }
        }
  }
  est.value = std::pow(sup, 1.0 / prm.p);
  return est;
}

bool in_window(double s, double lo, double hi) {
  const double tol = 1e-9 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  return s >= lo - tol && s <= hi + tol;
}

MorreyEstimate brute_parabolic(const std::vector<State>& traj,
                               const MorreyParams& prm) {
  const GridSpec& g = traj.front().u.grid;
  std::vector<std::vector<double>> pp(traj.size());
  for (std::size_t j = 0; j < traj.size(); ++j) pp[j] = pth(traj[j].u, prm.p);
  MorreyEstimate est;
  double sup = 0.0;
  for (double r : prm.radii) {
    const double w = std::pow(r, -5.0 * (1.0 - prm.p / prm.q));
    for (std::size_t jt = 0; jt < traj.size(); ++jt) {
      const double t0 = traj[jt].t;
      std::vector<std::size_t> sel;
      for (std::size_t j = 0; j < traj.size(); ++j)
        if (in_window(traj[j].t, t0 - r * r, t0 + r * r)) sel.push_back(j);
      if (sel.size() < 2) continue;
      for (int i3 = 0; i3 < g.n; i3 += prm.center_stride)
        for (int i2 = 0; i2 < g.n; i2 += prm.center_stride)
          for (int i1 = 0; i1 < g.n; i1 += prm.center_stride) {
            double acc = 0.0;
            for (std::size_t k = 0; k + 1 < sel.size(); ++k) {
              const double sa = brute_ball(g, pp[sel[k]], i1, i2, i3, r);
              const double sb = brute_ball(g, pp[sel[k + 1]], i1, i2, i3, r);
              acc += 0.5 * (sa + sb) * (traj[sel[k + 1]].t - traj[sel[k]].t);
            }
            const double bracket = w * acc;
            if (bracket > sup) {
              sup = bracket;
              est.center = g.point(i1, i2, i3);
              est.radius = r;
              est.time = t0;
            }
          }
    }
  }
  est.value = std::pow(sup, 1.0 / prm.p);
  return est;
}

std::vector<State> random_traj(const GridSpec& g,
                               const std::vector<double>& times,
                               std::uint64_t seed) {
  std::vector<State> traj;
  for (std::size_t j = 0; j < times.size(); ++j)
    traj.push_back(
        vel_slice(times[j], random_vector(g, seed + j, 4, 1.0, true)));
  return traj;
}

}  // namespace

TEST_CASE("morrey parameters reject ill-formed input") {
  const GridSpec g = ts::grid(8);
  MorreyParams prm;
  prm.radii = {1.0};
  REQUIRE_NOTHROW(prm.validate());

  SECTION("exponents") {
    MorreyParams bad = prm;
    bad.p = 1.0;
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    bad.p = 0.5;
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    bad = prm;
    bad.q = bad.p - 0.5;
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    bad = prm;
    bad.q = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(bad.validate(), config_error);
  }

  SECTION("radii") {
    MorreyParams bad = prm;
    bad.radii.clear();
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    bad.radii = {1.0, -0.5};
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    bad.radii = {0.0};
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    bad.radii = {std::numeric_limits<double>::quiet_NaN()};
    REQUIRE_THROWS_AS(bad.validate(), config_error);
  }

  SECTION("stride") {
    MorreyParams bad = prm;
    bad.center_stride = 0;
    REQUIRE_THROWS_AS(bad.validate(), config_error);
  }

  SECTION("trajectories") {
    const VectorField u = random_vector(g, 3, 2, 1.0, true);
    std::vector<State> traj;
    REQUIRE_THROWS_AS(morrey_parabolic(traj, prm), config_error);
    traj.push_back(vel_slice(0.1, u));
    REQUIRE_THROWS_AS(morrey_parabolic(traj, prm), config_error);
    traj.push_back(vel_slice(0.1, u));  // not strictly increasing
    REQUIRE_THROWS_AS(morrey_parabolic(traj, prm), config_error);
    traj.back().t = 0.2;
    REQUIRE_NOTHROW(morrey_parabolic(traj, prm));
    traj.push_back(vel_slice(0.3, make_vector(ts::grid(4))));
    REQUIRE_THROWS_AS(morrey_parabolic(traj, prm), config_error);
  }

  SECTION("field shape") {
    VectorField f = make_vector(g);
    f.c[1].resize(10);
    REQUIRE_THROWS_AS(morrey_spatial(f, prm), config_error);
  }
}

TEST_CASE("zero fields give exactly zero estimates") {
  const GridSpec g = ts::grid(12);
  MorreyParams prm;
  prm.radii = dyadic_radii(g);

  SECTION("spatial") {
    const MorreyEstimate est = morrey_spatial(make_vector(g), prm);
    REQUIRE(est.value == 0.0);
    REQUIRE(est.radius == 0.0);
    REQUIRE(std::isnan(est.time));
  }

  SECTION("parabolic") {
    std::vector<State> traj{vel_slice(0.0, make_vector(g)),
                            vel_slice(0.5, make_vector(g))};
    prm.flavor = MorreyFlavor::parabolic;
    const MorreyEstimate est = morrey_parabolic(traj, prm);
    REQUIRE(est.value == 0.0);
    REQUIRE(std::isnan(est.time));
  }
}

TEST_CASE("a constant field matches the discrete closed form") {
  // For f = c the bracket at radius r is r^w h^3 |B_r| |c|^p with
  // w = -3 (1 - p/q), monotone in r, so the largest radius wins and the
  // first center in scan order is reported.
  const GridSpec g = ts::grid(16);
  const std::array<double, 3> c = {0.6, -0.3, 1.2};
  const double cc = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
  const VectorField f = constant_vector(g, c);

  MorreyParams prm;
  prm.p = 2.0;
  prm.q = 3.0;
  prm.radii = {0.7, 1.3};
  const MorreyEstimate est = morrey_spatial(f, prm);

  const double h3 = g.h() * g.h() * g.h();
  const double count = static_cast<double>(ball_offsets(g, 1.3).size());
  const double expected = std::sqrt(std::pow(1.3, -1.0) * h3 * count * cc);
  REQUIRE(ts::rel_err(est.value, expected) < 1e-13);
  REQUIRE(est.radius == 1.3);
  REQUIRE(est.center == g.point(0, 0, 0));

  // Continuum sanity: |B_r| ~ (4 pi / 3) r^3 up to surface wobble.
  const double continuum = std::sqrt((4.0 * M_PI / 3.0) * 1.3 * 1.3 * cc);
  REQUIRE(ts::rel_err(est.value, continuum) < 0.2);
}

TEST_CASE("p = q with a covering radius reduces to the global norm") {
  // The weight exponent vanishes and a radius beyond sqrt(3) pi covers the
  // whole torus from any center, so the estimate is the plain L^p norm.
  const GridSpec g = ts::grid(16);
  const VectorField f = random_vector(g, 17, 5, 1.0, false);

  MorreyParams prm;
  prm.p = 2.5;
  prm.q = 2.5;
  prm.radii = {5.5};
  const MorreyEstimate est = morrey_spatial(f, prm);

  REQUIRE(ball_offsets(g, 5.5).size() == g.cells());
  double acc = 0.0;
  for (double v : pth(f, prm.p)) acc += v;
  const double h3 = g.h() * g.h() * g.h();
  const double expected = std::pow(h3 * acc, 1.0 / prm.p);
  REQUIRE(ts::rel_err(est.value, expected) < 1e-13);
  REQUIRE(est.radius == 5.5);
}

TEST_CASE("spatial estimate agrees with a full brute-force scan") {
  const GridSpec g = ts::grid(16);
  const VectorField f = random_vector(g, 11, 5, 1.0, false);

  MorreyParams prm;
  prm.p = 2.0;
  prm.q = 3.5;
  prm.radii = {2.5 * g.h(), 0.9, 1.7};
  prm.center_stride = 2;

  const MorreyEstimate est = morrey_spatial(f, prm);
  const MorreyEstimate ref = brute_spatial(f, prm);
  REQUIRE(est.value > 0.0);
  REQUIRE(ts::rel_err(est.value, ref.value) < 1e-12);
  REQUIRE(est.radius == ref.radius);
  REQUIRE(est.center == ref.center);
}

TEST_CASE("space-time estimate agrees with a full brute-force scan") {
  const GridSpec g = ts::grid(16);
  const std::vector<State> traj =
      random_traj(g, {0.3, 0.45, 0.7, 0.75, 1.0}, 20);

  MorreyParams prm;
  prm.p = 2.0;
  prm.q = 5.0;
  prm.radii = {0.55, 0.85};
  prm.center_stride = 4;
  prm.flavor = MorreyFlavor::parabolic;

  const MorreyEstimate est = morrey_parabolic(traj, prm);
  const MorreyEstimate ref = brute_parabolic(traj, prm);
  REQUIRE(est.value > 0.0);
  REQUIRE(ts::rel_err(est.value, ref.value) < 1e-12);
  REQUIRE(est.radius == ref.radius);
  REQUIRE(est.time == ref.time);
  REQUIRE(est.center == ref.center);
}

TEST_CASE("estimates are absolutely homogeneous") {
  const GridSpec g = ts::grid(12);
  const VectorField f = random_vector(g, 5, 4, 1.0, true);

  SECTION("doubling at p = 2 is exact") {
    // Scaling every component by 2 multiplies each squared norm by 4, a
    // power of two, so the whole pipeline scales without any rounding.
    MorreyParams prm;
    prm.radii = {0.9, 1.4};
    const MorreyEstimate a = morrey_spatial(f, prm);
    const MorreyEstimate b = morrey_spatial(scaled(f, 2.0), prm);
    REQUIRE(b.value == 2.0 * a.value);
    REQUIRE(b.radius == a.radius);
    REQUIRE(b.center == a.center);

    prm.flavor = MorreyFlavor::parabolic;
    std::vector<State> traj{vel_slice(0.0, f),
                            vel_slice(0.4, scaled(f, 0.5)),
                            vel_slice(0.9, scaled(f, 1.25))};
    std::vector<State> traj2;
    for (const State& s : traj)
      traj2.push_back(vel_slice(s.t, scaled(s.u, 2.0)));
    const MorreyEstimate pa = morrey_parabolic(traj, prm);
    const MorreyEstimate pb = morrey_parabolic(traj2, prm);
    REQUIRE(pb.value == 2.0 * pa.value);
    REQUIRE(pb.time == pa.time);
  }

  SECTION("general factors scale to rounding") {
    MorreyParams prm;
    prm.p = 3.0;
    prm.q = 4.0;
    prm.radii = {1.1};
    const MorreyEstimate a = morrey_spatial(f, prm);
    const MorreyEstimate b = morrey_spatial(scaled(f, 1.7), prm);
    REQUIRE(ts::rel_err(b.value, 1.7 * a.value) < 1e-13);
  }
}

TEST_CASE("growing the sample set never lowers the estimate") {
  const GridSpec g = ts::grid(16);
  const VectorField f = random_vector(g, 29, 5, 1.0, false);

  MorreyParams prm;
  prm.q = 4.0;
  prm.radii = {0.9};
  const double one = morrey_spatial(f, prm).value;
  prm.radii = {0.9, 1.4};
  const double two = morrey_spatial(f, prm).value;
  REQUIRE(one <= two);

  prm.center_stride = 4;
  const double coarse = morrey_spatial(f, prm).value;
  prm.center_stride = 2;
  const double mid = morrey_spatial(f, prm).value;
  prm.center_stride = 1;
  const double fine = morrey_spatial(f, prm).value;
  REQUIRE(coarse <= mid);
  REQUIRE(mid <= fine);
}

TEST_CASE("the morrey bound built from a type-one report mirrors it") {
  const GridSpec g = ts::grid(16);
  const std::vector<State> traj =
      random_traj(g, {0.3, 0.6, 0.9, 1.2, 1.5}, 40);

  const TypeIReport rep = type_one_monitor(traj, 1.2, 1.5, 2);
  REQUIRE(rep.M > 0.0);
  const MorreyEstimate est = type_one_to_morrey_bridge(rep);
  REQUIRE(est.value == std::sqrt(rep.M));
  REQUIRE(est.center == rep.x0);
  REQUIRE(est.radius == rep.r);
  REQUIRE(est.time == rep.t);
}

TEST_CASE("windowed space-time mass is controlled by the spatial bound") {
  // Every slice of every windowed integral is itself a candidate of the
  // type-one scan, and each window spans at most 2 r^2, so the parabolic
  // quantity can never exceed sqrt(2) times the spatial one.
  const GridSpec g = ts::grid(16);
  const std::vector<double> times = {0.3, 0.6, 0.9, 1.2, 1.5};

  SECTION("random trajectory") {
    const std::vector<State> traj = random_traj(g, times, 40);
    const TypeIReport rep = type_one_monitor(traj, 1.2, 1.5, 2);
    const EmbeddingCheck chk = type_one_embedding_check(traj, 1.2, 1.5, 2);
    REQUIRE(chk.spatial == std::sqrt(rep.M));
    REQUIRE(chk.constant == std::sqrt(2.0));
    REQUIRE(chk.parabolic > 0.0);
    REQUIRE(chk.parabolic <= chk.constant * chk.spatial * (1.0 + 1e-12));
    REQUIRE(chk.holds);
  }

  SECTION("zero trajectory") {
    std::vector<State> traj;
    for (double t : times) traj.push_back(vel_slice(t, make_vector(g)));
    const EmbeddingCheck chk = type_one_embedding_check(traj, 1.2, 1.5, 2);
    REQUIRE(chk.spatial == 0.0);
    REQUIRE(chk.parabolic == 0.0);
    REQUIRE(chk.holds);
  }
}

TEST_CASE("constant space-time fields pick the largest window") {
  // With f = c every bracket is r^{-3} |B_r| |c|^2 times the clipped window
  // span, so the largest radius wins and the earliest covering time is
  // reported.
  const GridSpec g = ts::grid(16);
  const std::array<double, 3> c = {0.4, 0.7, -0.2};
  const double cc = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
  std::vector<State> traj;
  for (int j = 0; j <= 4; ++j)
    traj.push_back(vel_slice(0.25 * j, constant_vector(g, c)));

  MorreyParams prm;
  prm.p = 2.0;
  prm.q = 5.0;
  prm.radii = {0.3, 0.5, 0.9};  // windows at 0.3 hold one slice and drop out
  prm.flavor = MorreyFlavor::parabolic;
  const MorreyEstimate est = morrey_parabolic(traj, prm);

  REQUIRE(est.radius == 0.9);
  REQUIRE(est.time == 0.25);
  REQUIRE(est.center == g.point(0, 0, 0));

  const double h3 = g.h() * g.h() * g.h();
  const double count = static_cast<double>(ball_offsets(g, 0.9).size());
  const double expected =
      std::sqrt(std::pow(0.9, -3.0) * h3 * count * cc * 1.0);
  REQUIRE(ts::rel_err(est.value, expected) < 1e-13);

  // Continuum sanity with the recorded span clipped to one time unit.
  const double continuum = std::sqrt((4.0 * M_PI / 3.0) * cc);
  REQUIRE(ts::rel_err(est.value, continuum) < 0.35);
}

TEST_CASE("dyadic radius ladder spans cell size to half the box") {
  SECTION("power-of-two grid reaches the half box exactly") {
    const GridSpec g = ts::grid(32);
    const std::vector<double> r = dyadic_radii(g);
    REQUIRE(r.size() == 5);
    REQUIRE(r.front() == g.h());
    REQUIRE(r.back() == 0.5 * g.box_length);
    for (std::size_t j = 0; j + 1 < r.size(); ++j)
      REQUIRE(r[j + 1] == 2.0 * r[j]);
  }

  SECTION("other grids stop below it") {
    const GridSpec g = ts::grid(20);
    const std::vector<double> r = dyadic_radii(g);
    REQUIRE(r.size() == 4);
    REQUIRE(r.back() <= 0.5 * g.box_length);
  }
}
