#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "mp/grid.hpp"
#include "support.hpp"

using namespace mp;

TEST_CASE("pairwise sum matches long double reference") {
  Rng rng(7);
  std::vector<double> a(10001);
  long double ref = 0.0L;
  for (auto& v : a) {
    v = rng.uniform(-1.0, 1.0);
    ref += v;
  }
  CHECK(std::abs(pairwise_sum(a) - static_cast<double>(ref)) < 1e-12);
}

TEST_CASE("rng is deterministic and roughly standard normal") {
  Rng a(42), b(42);
  double mean = 0.0, var = 0.0;
  const int ns = 20000;
  for (int i = 0; i < ns; ++i) {
    const double x = a.gaussian();
    CHECK(x == b.gaussian());
    mean += x;
    var += x * x;
  }
  mean /= ns;
  var = var / ns - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(make_scalar(GridSpec{7, 2 * M_PI}), config_error);
  CHECK_THROWS_AS(make_scalar(GridSpec{2, 2 * M_PI}), config_error);
  CHECK_THROWS_AS(make_scalar(GridSpec{16, -1.0}), config_error);
  CHECK_NOTHROW(make_scalar(GridSpec{16, 1.0}));
}

TEST_CASE("transform round trip and mean mode") {
  const auto g = ts::grid(16);
  ScalarField f = random_scalar(g, 123, 5, 1.0);
  SpectralField s = to_spectral(f);

  // mode(0) is the spatial mean.
  double mean = 0.0;
  for (double v : f.s) mean += v;
  mean /= static_cast<double>(f.s.size());
  CHECK(std::abs(s.m[0].real() - mean) < 1e-14);
  CHECK(std::abs(s.m[0].imag()) < 1e-14);

  ScalarField back = from_spectral(s);
  CHECK(ts::max_diff(f, back) < 1e-13);
}

TEST_CASE("sine mode coefficients") {
  const auto g = ts::grid(16);
  ScalarField f = sample_scalar(g, [](double x1, double, double) { return std::sin(x1); });
  SpectralField s = to_spectral(f);
  // sin(x1) = (e^{i x1} - e^{-i x1}) / (2i), so mode(+1) = -i/2, mode(-1) = +i/2.
  CHECK(std::abs(mode(s, 1, 0, 0) - std::complex<double>(0.0, -0.5)) < 1e-14);
  CHECK(std::abs(mode(s, -1, 0, 0) - std::complex<double>(0.0, 0.5)) < 1e-14);
  CHECK(std::abs(mode(s, 2, 0, 0)) < 1e-14);
  CHECK(std::abs(mode(s, 0, 1, 0)) < 1e-14);
}

TEST_CASE("mode accessor resolves conjugate half") {
  const auto g = ts::grid(16);
  ScalarField f = random_scalar(g, 5, 6, 1.0);
  SpectralField s = to_spectral(f);
  for (int k1 : {1, 3})
    for (int k2 : {-5, 0, 2})
      for (int k3 : {-1, 4}) {
        const auto a = mode(s, k1, k2, k3);
        const auto b = mode(s, -k1, -k2, -k3);
        CHECK(std::abs(a - std::conj(b)) < 1e-15);
      }
}

TEST_CASE("parseval for scalar and vector fields") {
  const auto g = ts::grid(16);
  ScalarField f = random_scalar(g, 17, 7, 2.0);
  CHECK(ts::rel_err(l2sq_spec(to_spectral(f)), l2sq(f)) < 1e-12);

  VectorField v = random_vector(g, 18, 7, 1.5, false);
  CHECK(ts::rel_err(l2sq_spec(to_spectral(v)), l2sq(v)) < 1e-12);
}

TEST_CASE("derivatives of single harmonics") {
  const auto g = ts::grid(16);

  VectorField f = sample_vector(g, [](double x1, double, double) {
    return std::array<double, 3>{std::sin(x1), 0.0, 0.0};
  });
  ScalarField d = divergence(f);
  ScalarField want = sample_scalar(g, [](double x1, double, double) { return std::cos(x1); });
  CHECK(ts::max_diff(d, want) < 1e-13);

  VectorField c = curl(sample_vector(g, [](double x1, double, double) {
    return std::array<double, 3>{0.0, 0.0, std::sin(x1)};
  }));
  VectorField cwant = sample_vector(g, [](double x1, double, double) {
    return std::array<double, 3>{0.0, -std::cos(x1), 0.0};
  });
  CHECK(ts::max_diff(c, cwant) < 1e-13);

  VectorField lap = laplacian(f);
  VectorField lwant = sample_vector(g, [](double x1, double, double) {
    return std::array<double, 3>{-std::sin(x1), 0.0, 0.0};
  });
  CHECK(ts::max_diff(lap, lwant) < 1e-13);

  ScalarField p = sample_scalar(g, [](double x1, double x2, double) {
    return std::sin(x1) * std::sin(x2);
  });
  VectorField gr = gradient(p);
  VectorField gwant = sample_vector(g, [](double x1, double x2, double) {
    return std::array<double, 3>{std::cos(x1) * std::sin(x2),
                                 std::sin(x1) * std::cos(x2), 0.0};
  });
  CHECK(ts::max_diff(gr, gwant) < 1e-13);
}

TEST_CASE("vector calculus identities on random fields") {
  const auto g = ts::grid(32);
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    VectorField f = random_vector(g, seed, 9, 1.0, false);

    // div curl = 0 and curl grad = 0.
    CHECK(linf(divergence(curl(f))) < 1e-12);
    ScalarField p = random_scalar(g, seed + 100, 9, 1.0);
    CHECK(linf(curl(gradient(p))) < 1e-12);

    // laplacian = grad div - curl curl.
    VectorField lhs = laplacian(f);
    VectorField gd = grad_div(f);
    VectorField cc = curl(curl(f));
    double m = 0.0;
    for (int i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < lhs.c[i].size(); ++j)
        m = std::max(m, std::abs(lhs.c[i][j] - (gd.c[i][j] - cc.c[i][j])));
    CHECK(m < 1e-12);

    // div(grad p) = laplacian p.
    ScalarField dv = divergence(gradient(p));
    ScalarField lp = laplacian(p);
    CHECK(ts::max_diff(dv, lp) < 1e-12);
  }
}

// Independent projection oracle: apply P = I - k k^T/|k|^2 per mode through
// the mode() accessor and compare against leray_project.
TEST_CASE("leray projection against per-mode matrix oracle") {
  const auto g = ts::grid(16);
  VectorField f = random_vector(g, 99, 6, 1.0, false);
  VectorField pf = leray_project(f);

  SpectralTriple fs = to_spectral(f);
  SpectralTriple ps = to_spectral(pf);
  const int half = g.n / 2;
  double worst = 0.0;
  for (int k3 = -half; k3 < half; ++k3)
    for (int k2 = -half; k2 < half; ++k2)
      for (int k1 = -half; k1 < half; ++k1) {
        const std::complex<double> in[3] = {mode(fs[0], k1, k2, k3),
                                            mode(fs[1], k1, k2, k3),
                                            mode(fs[2], k1, k2, k3)};
        std::complex<double> want[3];
        const double kk[3] = {double(k1), double(k2), double(k3)};
        const double m2 = kk[0] * kk[0] + kk[1] * kk[1] + kk[2] * kk[2];
        const bool ny = k1 == -half || k2 == -half || k3 == -half;
        if (m2 == 0.0) {
          for (int i = 0; i < 3; ++i) want[i] = in[i];
        } else if (ny) {
          for (int i = 0; i < 3; ++i) want[i] = 0.0;
        } else {
          for (int i = 0; i < 3; ++i) {
            want[i] = in[i];
            for (int j = 0; j < 3; ++j) want[i] -= kk[i] * kk[j] / m2 * in[j];
          }
        }
        for (int i = 0; i < 3; ++i)
          worst = std::max(worst, std::abs(mode(ps[i], k1, k2, k3) - want[i]));
      }
  CHECK(worst < 1e-13);

  // Projection leaves the result divergence-free and is idempotent.
  CHECK(linf(divergence(pf)) < 1e-12);
  CHECK(ts::max_diff(leray_project(pf), pf) < 1e-12);

  // A gradient projects to zero (mean removed by construction here).
  ScalarField p = random_scalar(g, 7, 5, 1.0);
  CHECK(linf(leray_project(gradient(p))) < 1e-12);
}

TEST_CASE("gradient tensor agrees with divergence and curl") {
  const auto g = ts::grid(16);
  VectorField f = random_vector(g, 31, 6, 1.0, false);
  const auto t = gradient_tensor(f);

  ScalarField dv = divergence(f);
  VectorField cl = curl(f);
  double worst_div = 0.0, worst_curl = 0.0, worst_h1 = 0.0;
  for (std::size_t j = 0; j < dv.s.size(); ++j) {
    const double trace = t[0].s[j] + t[4].s[j] + t[8].s[j];
    worst_div = std::max(worst_div, std::abs(trace - dv.s[j]));
    // curl_i = eps_{ijk} d_j u_k, tensor entry (i, j) = d_j u_i.
    const double c0 = t[3 * 2 + 1].s[j] - t[3 * 1 + 2].s[j];
    const double c1 = t[3 * 0 + 2].s[j] - t[3 * 2 + 0].s[j];
    const double c2 = t[3 * 1 + 0].s[j] - t[3 * 0 + 1].s[j];
    worst_curl = std::max({worst_curl, std::abs(c0 - cl.c[0][j]),
                           std::abs(c1 - cl.c[1][j]), std::abs(c2 - cl.c[2][j])});
  }
  CHECK(worst_div < 1e-12);
  CHECK(worst_curl < 1e-12);

  double frob = 0.0;
  for (const auto& e : t) frob += l2sq(e);
  worst_h1 = std::abs(frob - h1dot_sq(f)) / std::max(1.0, frob);
  CHECK(worst_h1 < 1e-12);
}

TEST_CASE("h1 seminorm of a single harmonic") {
  const auto g = ts::grid(16);
  VectorField f = ts::shear_x3(g);  // u = (sin x3, 0, 0)
  const double L3 = std::pow(g.box_length, 3);
  CHECK(ts::rel_err(l2sq(f), L3 / 2.0) < 1e-12);
  CHECK(ts::rel_err(h1dot_sq(f), L3 / 2.0) < 1e-12);
}

TEST_CASE("dealias removes only modes above the cutoff") {
  const auto g = ts::grid(16);
  ScalarField f = sample_scalar(g, [](double x1, double x2, double x3) {
    return std::sin(3 * x1) + std::cos(6 * x2) + std::sin(5 * x3 - x1);
  });
  SpectralField s = to_spectral(f);
  const int K = dealias_cutoff(g.n);  // 5 for n = 16
  REQUIRE(K == 5);
  dealias(s, K);
  CHECK(std::abs(mode(s, 3, 0, 0) - std::complex<double>(0.0, -0.5)) < 1e-14);
  CHECK(std::abs(mode(s, 0, 6, 0)) < 1e-15);
  CHECK(std::abs(mode(s, -1, 0, 5) - std::complex<double>(0.0, -0.5)) < 1e-14);

  // 2/3-rule arithmetic: products of retained modes alias only onto dropped bins.
  for (int n : {16, 32, 48, 64, 96, 128}) {
    const int c = dealias_cutoff(n);
    CHECK(3 * c < n);      // alias image k + n or k - n of |k| <= 2c stays outside |k| <= c
    CHECK(2 * c < n - c);
  }
}

TEST_CASE("nyquist shell is annihilated by operators but kept by transforms") {
  const auto g = ts::grid(8);
  // cos(4 x1) lives exactly on the Nyquist shell for n = 8.
  ScalarField f = sample_scalar(g, [](double x1, double, double) { return std::cos(4 * x1); });
  SpectralField s = to_spectral(f);
  CHECK(std::abs(mode(s, 4, 0, 0) - 1.0) < 1e-14);  // +4 and -4 coincide: weight 1
  ScalarField back = from_spectral(s);
  CHECK(ts::max_diff(f, back) < 1e-13);
  CHECK(linf(gradient(f)) < 1e-13);
  CHECK(linf(laplacian(f)) < 1e-13);
}

TEST_CASE("random fields are deterministic, normalized, and optionally solenoidal") {
  const auto g = ts::grid(16);
  VectorField a = random_vector(g, 2024, 5, 0.7, true);
  VectorField b = random_vector(g, 2024, 5, 0.7, true);
  CHECK(ts::max_diff(a, b) == 0.0);

  CHECK(std::abs(linf(a) - 0.7) < 1e-12);
  CHECK(linf(divergence(a)) < 1e-12);

  // Mean mode removed when divfree is requested.
  SpectralTriple s = to_spectral(a);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(s[i].m[0]) < 1e-15);

  VectorField c = random_vector(g, 2025, 5, 0.7, true);
  CHECK(ts::max_diff(a, c) > 1e-3);
}

TEST_CASE("non-finite samples are rejected") {
  const auto g = ts::grid(8);
  ScalarField f = make_scalar(g);
  f.s[3] = std::nan("");
  CHECK_THROWS_AS(to_spectral(f), config_error);
  VectorField v = make_vector(g);
  v.c[1][5] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(divergence(v), config_error);
}
