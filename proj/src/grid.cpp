#include "mp/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace mp {

void GridSpec::validate() const {
  if (n < 4 || n % 2 != 0)
    throw config_error("grid n must be an even integer >= 4, got " + std::to_string(n));
  if (!(box_length > 0.0))
    throw config_error("box_length must be positive");
}

ScalarField make_scalar(const GridSpec& g) {
  g.validate();
  return ScalarField{g, std::vector<double>(g.cells(), 0.0)};
}

VectorField make_vector(const GridSpec& g) {
  g.validate();
  VectorField f{g, {}};
  for (auto& c : f.c) c.assign(g.cells(), 0.0);
  return f;
}

SpectralField make_spectral(const GridSpec& g) {
  g.validate();
  return SpectralField{g, std::vector<std::complex<double>>(g.spectral_size())};
}

ScalarField sample_scalar(const GridSpec& g,
                          const std::function<double(double, double, double)>& f) {
  ScalarField out = make_scalar(g);
  for (int i3 = 0; i3 < g.n; ++i3)
    for (int i2 = 0; i2 < g.n; ++i2)
      for (int i1 = 0; i1 < g.n; ++i1)
        out.s[g.idx(i1, i2, i3)] = f(g.coord(i1), g.coord(i2), g.coord(i3));
  return out;
}

VectorField sample_vector(
    const GridSpec& g,
    const std::function<std::array<double, 3>(double, double, double)>& f) {
  VectorField out = make_vector(g);
  for (int i3 = 0; i3 < g.n; ++i3)
    for (int i2 = 0; i2 < g.n; ++i2)
      for (int i1 = 0; i1 < g.n; ++i1) {
        const auto v = f(g.coord(i1), g.coord(i2), g.coord(i3));
        const std::size_t id = g.idx(i1, i2, i3);
        out.c[0][id] = v[0];
        out.c[1][id] = v[1];
        out.c[2][id] = v[2];
      }
  return out;
}

void check_finite(const ScalarField& f, const char* what) {
  for (double v : f.s)
    if (!std::isfinite(v))
      throw config_error(std::string(what) + ": non-finite sample in scalar field");
}

void check_finite(const VectorField& f, const char* what) {
  for (const auto& comp : f.c)
    for (double v : comp)
      if (!std::isfinite(v))
        throw config_error(std::string(what) + ": non-finite sample in vector field");
}

// One FFTW plan pair per grid size, created once with FFTW_ESTIMATE on
// dedicated aligned buffers. Estimate plans are chosen without timing runs
// and the buffers never change alignment, so results are bit-reproducible.
// Execution copies through the internal buffers under a mutex.
namespace {

class Fft {
 public:
  explicit Fft(int n) : n_(n), nh_(n / 2 + 1) {
    const std::size_t rn = static_cast<std::size_t>(n_) * n_ * n_;
    const std::size_t cn = static_cast<std::size_t>(nh_) * n_ * n_;
    rbuf_ = fftw_alloc_real(rn);
    cbuf_ = fftw_alloc_complex(cn);
    // Logical dims slowest..fastest are (axis3, axis2, axis1); axis 1 is the
    // contiguous one and carries the halved spectrum.
    fwd_ = fftw_plan_dft_r2c_3d(n_, n_, n_, rbuf_, cbuf_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_3d(n_, n_, n_, cbuf_, rbuf_, FFTW_ESTIMATE);
  }
  ~Fft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(rbuf_);
    fftw_free(cbuf_);
  }

  void forward(const double* phys, std::complex<double>* spec) {
    std::lock_guard<std::mutex> lock(mu_);
    const std::size_t rn = static_cast<std::size_t>(n_) * n_ * n_;
    const std::size_t cn = static_cast<std::size_t>(nh_) * n_ * n_;
    std::copy(phys, phys + rn, rbuf_);
    fftw_execute(fwd_);
    const double scale = 1.0 / static_cast<double>(rn);
    for (std::size_t i = 0; i < cn; ++i)
      spec[i] = std::complex<double>(cbuf_[i][0] * scale, cbuf_[i][1] * scale);
  }

  void backward(const std::complex<double>* spec, double* phys) {
    std::lock_guard<std::mutex> lock(mu_);
    const std::size_t rn = static_cast<std::size_t>(n_) * n_ * n_;
    const std::size_t cn = static_cast<std::size_t>(nh_) * n_ * n_;
    for (std::size_t i = 0; i < cn; ++i) {
      cbuf_[i][0] = spec[i].real();
      cbuf_[i][1] = spec[i].imag();
    }
    fftw_execute(bwd_);
    std::copy(rbuf_, rbuf_ + rn, phys);
  }

 private:
  int n_, nh_;
  double* rbuf_;
  fftw_complex* cbuf_;
  fftw_plan fwd_, bwd_;
  std::mutex mu_;
};

Fft& fft_for(int n) {
  static std::mutex reg_mu;
  static std::map<int, std::unique_ptr<Fft>> registry;
  std::lock_guard<std::mutex> lock(reg_mu);
  auto it = registry.find(n);
  if (it == registry.end())
    it = registry.emplace(n, std::make_unique<Fft>(n)).first;
  return *it->second;
}

}  // namespace

SpectralField to_spectral(const ScalarField& f) {
  f.grid.validate();
  check_finite(f, "to_spectral");
  SpectralField out = make_spectral(f.grid);
  fft_for(f.grid.n).forward(f.s.data(), out.m.data());
  return out;
}

ScalarField from_spectral(const SpectralField& f) {
  f.grid.validate();
  ScalarField out = make_scalar(f.grid);
  fft_for(f.grid.n).backward(f.m.data(), out.s.data());
  return out;
}

SpectralTriple to_spectral(const VectorField& f) {
  f.grid.validate();
  check_finite(f, "to_spectral");
  SpectralTriple out{make_spectral(f.grid), make_spectral(f.grid), make_spectral(f.grid)};
  for (int i = 0; i < 3; ++i)
    fft_for(f.grid.n).forward(f.c[i].data(), out[i].m.data());
  return out;
}

VectorField from_spectral(const SpectralTriple& f) {
  f[0].grid.validate();
  VectorField out = make_vector(f[0].grid);
  for (int i = 0; i < 3; ++i)
    fft_for(out.grid.n).backward(f[i].m.data(), out.c[i].data());
  return out;
}

std::complex<double> mode(const SpectralField& f, int k1, int k2, int k3) {
  const int n = f.grid.n;
  auto wrap = [n](int j) { return ((j % n) + n) % n; };
  if (k1 >= 0) return f.m[f.grid.sidx(k1, wrap(k2), wrap(k3))];
  return std::conj(f.m[f.grid.sidx(-k1, wrap(-k2), wrap(-k3))]);
}

namespace {

constexpr std::complex<double> I{0.0, 1.0};

}  // namespace

SpectralField divergence_spec(const SpectralTriple& f) {
  SpectralField out = make_spectral(f[0].grid);
  for_each_spectral_bin(out.grid, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    out.m[id] = ny ? 0.0 : I * (k1 * f[0].m[id] + k2 * f[1].m[id] + k3 * f[2].m[id]);
  });
  return out;
}

SpectralTriple curl_spec(const SpectralTriple& f) {
  const GridSpec& g = f[0].grid;
  SpectralTriple out{make_spectral(g), make_spectral(g), make_spectral(g)};
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    if (ny) {
      out[0].m[id] = out[1].m[id] = out[2].m[id] = 0.0;
      return;
    }
    out[0].m[id] = I * (k2 * f[2].m[id] - k3 * f[1].m[id]);
    out[1].m[id] = I * (k3 * f[0].m[id] - k1 * f[2].m[id]);
    out[2].m[id] = I * (k1 * f[1].m[id] - k2 * f[0].m[id]);
  });
  return out;
}

SpectralTriple laplacian_spec(const SpectralTriple& f) {
  const GridSpec& g = f[0].grid;
  SpectralTriple out{make_spectral(g), make_spectral(g), make_spectral(g)};
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    const double m2 = ny ? 0.0 : -(k1 * k1 + k2 * k2 + k3 * k3);
    out[0].m[id] = m2 * f[0].m[id];
    out[1].m[id] = m2 * f[1].m[id];
    out[2].m[id] = m2 * f[2].m[id];
  });
  return out;
}

SpectralTriple grad_div_spec(const SpectralTriple& f) {
  const GridSpec& g = f[0].grid;
  SpectralTriple out{make_spectral(g), make_spectral(g), make_spectral(g)};
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    if (ny) {
      out[0].m[id] = out[1].m[id] = out[2].m[id] = 0.0;
      return;
    }
    const std::complex<double> kd = k1 * f[0].m[id] + k2 * f[1].m[id] + k3 * f[2].m[id];
    out[0].m[id] = -k1 * kd;
    out[1].m[id] = -k2 * kd;
    out[2].m[id] = -k3 * kd;
  });
  return out;
}

SpectralTriple gradient_spec(const SpectralField& s) {
  const GridSpec& g = s.grid;
  SpectralTriple out{make_spectral(g), make_spectral(g), make_spectral(g)};
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    const std::complex<double> v = ny ? 0.0 : I * s.m[id];
    out[0].m[id] = v * k1;
    out[1].m[id] = v * k2;
    out[2].m[id] = v * k3;
  });
  return out;
}

void leray_spec(SpectralTriple& f) {
  const GridSpec& g = f[0].grid;
  for_each_spectral_bin(g, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    const double m2 = k1 * k1 + k2 * k2 + k3 * k3;
    if (m2 == 0.0) return;  // mean mode passed through
    if (ny) {
      f[0].m[id] = f[1].m[id] = f[2].m[id] = 0.0;
      return;
    }
    const std::complex<double> kd =
        (k1 * f[0].m[id] + k2 * f[1].m[id] + k3 * f[2].m[id]) / m2;
    f[0].m[id] -= k1 * kd;
    f[1].m[id] -= k2 * kd;
    f[2].m[id] -= k3 * kd;
  });
}

ScalarField divergence(const VectorField& f) {
  check_finite(f, "divergence");
  return from_spectral(divergence_spec(to_spectral(f)));
}

VectorField curl(const VectorField& f) {
  check_finite(f, "curl");
  return from_spectral(curl_spec(to_spectral(f)));
}

VectorField laplacian(const VectorField& f) {
  check_finite(f, "laplacian");
  return from_spectral(laplacian_spec(to_spectral(f)));
}

ScalarField laplacian(const ScalarField& f) {
  check_finite(f, "laplacian");
  SpectralField s = to_spectral(f);
  for_each_spectral_bin(f.grid, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
    s.m[id] *= ny ? 0.0 : -(k1 * k1 + k2 * k2 + k3 * k3);
  });
  return from_spectral(s);
}

VectorField grad_div(const VectorField& f) {
  check_finite(f, "grad_div");
  return from_spectral(grad_div_spec(to_spectral(f)));
}

VectorField gradient(const ScalarField& f) {
  check_finite(f, "gradient");
  return from_spectral(gradient_spec(to_spectral(f)));
}

VectorField leray_project(const VectorField& f) {
  check_finite(f, "leray_project");
  SpectralTriple s = to_spectral(f);
  leray_spec(s);
  return from_spectral(s);
}

std::array<ScalarField, 9> gradient_tensor(const VectorField& f) {
  check_finite(f, "gradient_tensor");
  const SpectralTriple s = to_spectral(f);
  std::array<ScalarField, 9> out{
      make_scalar(f.grid), make_scalar(f.grid), make_scalar(f.grid),
      make_scalar(f.grid), make_scalar(f.grid), make_scalar(f.grid),
      make_scalar(f.grid), make_scalar(f.grid), make_scalar(f.grid)};
  SpectralField d = make_spectral(f.grid);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for_each_spectral_bin(f.grid, [&](std::size_t id, double k1, double k2, double k3, bool ny) {
        const double kj = j == 0 ? k1 : (j == 1 ? k2 : k3);
        d.m[id] = ny ? 0.0 : I * kj * s[i].m[id];
      });
      out[3 * i + j] = from_spectral(d);
    }
  }
  return out;
}

int dealias_cutoff(int n) { return (n - 1) / 3; }

void dealias(SpectralField& f, int cutoff) {
  const GridSpec& g = f.grid;
  const int n = g.n, nh = g.nh();
  std::size_t id = 0;
  for (int j3 = 0; j3 < n; ++j3) {
    const int a3 = std::abs(g.signed_k(j3));
    for (int j2 = 0; j2 < n; ++j2) {
      const int a2 = std::abs(g.signed_k(j2));
      const bool drop23 = a2 > cutoff || a3 > cutoff;
      for (int j1 = 0; j1 < nh; ++j1, ++id)
        if (drop23 || j1 > cutoff) f.m[id] = 0.0;
    }
  }
}

void dealias(SpectralTriple& f, int cutoff) {
  for (auto& c : f) dealias(c, cutoff);
}

double linf(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.s) m = std::max(m, std::abs(v));
  return m;
}

double linf(const VectorField& f) {
  double m = 0.0;
  for (const auto& comp : f.c)
    for (double v : comp) m = std::max(m, std::abs(v));
  return m;
}

namespace {

double sumsq(const std::vector<double>& a) {
  std::vector<double> sq(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) sq[i] = a[i] * a[i];
  return pairwise_sum(sq);
}

}  // namespace

double l2sq(const ScalarField& f) {
  const double h = f.grid.h();
  return h * h * h * sumsq(f.s);
}

double l2sq(const VectorField& f) {
  const double h = f.grid.h();
  return h * h * h * (sumsq(f.c[0]) + sumsq(f.c[1]) + sumsq(f.c[2]));
}

double l2(const ScalarField& f) { return std::sqrt(l2sq(f)); }
double l2(const VectorField& f) { return std::sqrt(l2sq(f)); }

double lq_norm(const ScalarField& f, double q) {
  if (!(q >= 1.0)) throw config_error("lq_norm: exponent must be >= 1");
  const double h = f.grid.h();
  std::vector<double> terms(f.s.size());
  for (std::size_t i = 0; i < f.s.size(); ++i) terms[i] = std::pow(std::abs(f.s[i]), q);
  return std::pow(h * h * h * pairwise_sum(terms), 1.0 / q);
}

double lq_norm(const VectorField& f, double q) {
  if (!(q >= 1.0)) throw config_error("lq_norm: exponent must be >= 1");
  const double h = f.grid.h();
  std::vector<double> terms(f.c[0].size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double m2 = f.c[0][i] * f.c[0][i] + f.c[1][i] * f.c[1][i] + f.c[2][i] * f.c[2][i];
    terms[i] = std::pow(m2, 0.5 * q);
  }
  return std::pow(h * h * h * pairwise_sum(terms), 1.0 / q);
}

std::array<double, 3> min_image(const GridSpec& g, const std::array<double, 3>& a,
                                const std::array<double, 3>& b) {
  const double L = g.box_length;
  std::array<double, 3> d;
  for (int c = 0; c < 3; ++c) {
    d[c] = a[c] - b[c];
    d[c] -= L * std::round(d[c] / L);
  }
  return d;
}

std::vector<std::size_t> ball_cells(const GridSpec& g,
                                    const std::array<double, 3>& x0, double r) {
  g.validate();
  if (!(r > 0.0) || !std::isfinite(r))
    throw config_error("ball_cells: radius must be positive");
  const double r2 = r * r;
  std::vector<std::size_t> cells;
  for (int i3 = 0; i3 < g.n; ++i3)
    for (int i2 = 0; i2 < g.n; ++i2)
      for (int i1 = 0; i1 < g.n; ++i1) {
        const auto d = min_image(g, g.point(i1, i2, i3), x0);
        if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] < r2)
          cells.push_back(g.idx(i1, i2, i3));
      }
  return cells;
}

std::vector<std::array<int, 3>> ball_offsets(const GridSpec& g, double r) {
  g.validate();
  if (!(r > 0.0) || !std::isfinite(r))
    throw config_error("ball_offsets: radius must be positive");
  const double h = g.h(), r2 = r * r;
  // Each axis offset range holds exactly n values, so shifted indices stay
  // distinct mod n even when r exceeds half the box.
  const int lo = -(g.n / 2), hi = (g.n - 1) / 2;
  std::vector<std::array<int, 3>> offsets;
  for (int o3 = lo; o3 <= hi; ++o3)
    for (int o2 = lo; o2 <= hi; ++o2)
      for (int o1 = lo; o1 <= hi; ++o1) {
        const double d1 = o1 * h, d2 = o2 * h, d3 = o3 * h;
        if (d1 * d1 + d2 * d2 + d3 * d3 < r2)
          offsets.push_back({o1, o2, o3});
      }
  return offsets;
}

double min_image_dist(const GridSpec& g, const std::array<double, 3>& a,
                      const std::array<double, 3>& b) {
  const auto d = min_image(g, a, b);
  return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
}

double inner(const VectorField& a, const VectorField& b) {
  if (!(a.grid == b.grid)) throw config_error("inner: grid mismatch");
  const double h = a.grid.h();
  std::vector<double> prod(a.c[0].size());
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < prod.size(); ++j) prod[j] = a.c[i][j] * b.c[i][j];
    total += pairwise_sum(prod);
  }
  return h * h * h * total;
}

// Conjugate-half weights: interior k1 bins stand for a reflected pair.
namespace {

double spec_weighted_sum(const SpectralField& f, bool weight_k2, bool drop_nyquist) {
  const GridSpec& g = f.grid;
  const int n = g.n, nh = g.nh();
  std::vector<double> terms(g.spectral_size());
  std::size_t id = 0;
  for (int j3 = 0; j3 < n; ++j3) {
    const double k3 = g.kappa(j3);
    const bool ny3 = g.nyquist(j3);
    for (int j2 = 0; j2 < n; ++j2) {
      const double k2 = g.kappa(j2);
      const bool ny23 = ny3 || g.nyquist(j2);
      for (int j1 = 0; j1 < nh; ++j1, ++id) {
        const double k1 = g.kappa(j1);
        const double pair = (j1 == 0 || 2 * j1 == n) ? 1.0 : 2.0;
        const double w = weight_k2 ? (k1 * k1 + k2 * k2 + k3 * k3) : 1.0;
        const double drop = (drop_nyquist && (ny23 || g.nyquist(j1))) ? 0.0 : 1.0;
        terms[id] = pair * w * drop * std::norm(f.m[id]);
      }
    }
  }
  const double L = g.box_length;
  return L * L * L * pairwise_sum(terms);
}

}  // namespace

double l2sq_spec(const SpectralField& f) { return spec_weighted_sum(f, false, false); }

double l2sq_spec(const SpectralTriple& f) {
  return l2sq_spec(f[0]) + l2sq_spec(f[1]) + l2sq_spec(f[2]);
}

double h1dot_sq_spec(const SpectralTriple& f) {
  return spec_weighted_sum(f[0], true, true) + spec_weighted_sum(f[1], true, true) +
         spec_weighted_sum(f[2], true, true);
}

double h1dot_sq(const VectorField& f) { return h1dot_sq_spec(to_spectral(f)); }

double divergence_sq_spec(const SpectralTriple& f) {
  const GridSpec& g = f[0].grid;
  const int n = g.n, nh = g.nh();
  std::vector<double> terms(g.spectral_size());
  std::size_t id = 0;
  for (int j3 = 0; j3 < n; ++j3) {
    const double k3 = g.kappa(j3);
    const bool ny3 = g.nyquist(j3);
    for (int j2 = 0; j2 < n; ++j2) {
      const double k2 = g.kappa(j2);
      const bool ny23 = ny3 || g.nyquist(j2);
      for (int j1 = 0; j1 < nh; ++j1, ++id) {
        if (ny23 || g.nyquist(j1)) {
          terms[id] = 0.0;
          continue;
        }
        const double k1 = g.kappa(j1);
        const std::complex<double> d =
            k1 * f[0].m[id] + k2 * f[1].m[id] + k3 * f[2].m[id];
        const double pair = (j1 == 0 || 2 * j1 == n) ? 1.0 : 2.0;
        terms[id] = pair * std::norm(d);
      }
    }
  }
  const double L = g.box_length;
  return L * L * L * pairwise_sum(terms);
}

double curl_inner_spec(const SpectralTriple& a, const SpectralTriple& b) {
  const GridSpec& g = a[0].grid;
  if (!(g == b[0].grid)) throw config_error("curl_inner_spec: grid mismatch");
  const int n = g.n, nh = g.nh();
  std::vector<double> terms(g.spectral_size());
  std::size_t id = 0;
  for (int j3 = 0; j3 < n; ++j3) {
    const double k3 = g.kappa(j3);
    const bool ny3 = g.nyquist(j3);
    for (int j2 = 0; j2 < n; ++j2) {
      const double k2 = g.kappa(j2);
      const bool ny23 = ny3 || g.nyquist(j2);
      for (int j1 = 0; j1 < nh; ++j1, ++id) {
        if (ny23 || g.nyquist(j1)) {
          terms[id] = 0.0;
          continue;
        }
        const double k1 = g.kappa(j1);
        const std::complex<double> c0 = I * (k2 * a[2].m[id] - k3 * a[1].m[id]);
        const std::complex<double> c1 = I * (k3 * a[0].m[id] - k1 * a[2].m[id]);
        const std::complex<double> c2 = I * (k1 * a[1].m[id] - k2 * a[0].m[id]);
        const double pair = (j1 == 0 || 2 * j1 == n) ? 1.0 : 2.0;
        terms[id] = pair * (c0 * std::conj(b[0].m[id]) + c1 * std::conj(b[1].m[id]) +
                            c2 * std::conj(b[2].m[id]))
                               .real();
      }
    }
  }
  const double L = g.box_length;
  return L * L * L * pairwise_sum(terms);
}

ScalarField random_scalar(const GridSpec& g, std::uint64_t seed, int kmax,
                          double amplitude) {
  g.validate();
  Rng rng(seed);
  ScalarField f = make_scalar(g);
  for (auto& v : f.s) v = rng.gaussian();
  SpectralField s = to_spectral(f);
  dealias(s, kmax);
  f = from_spectral(s);
  const double m = linf(f);
  if (m > 0.0)
    for (auto& v : f.s) v *= amplitude / m;
  return f;
}

VectorField random_vector(const GridSpec& g, std::uint64_t seed, int kmax,
                          double amplitude, bool divfree) {
  g.validate();
  Rng rng(seed);
  VectorField f = make_vector(g);
  for (auto& comp : f.c)
    for (auto& v : comp) v = rng.gaussian();
  SpectralTriple s = to_spectral(f);
  dealias(s, kmax);
  if (divfree) {
    leray_spec(s);
    for (auto& c : s) c.m[0] = 0.0;  // mean removed so div-free means curl range
  }
  f = from_spectral(s);
  const double m = linf(f);
  if (m > 0.0)
    for (auto& comp : f.c)
      for (auto& v : comp) v *= amplitude / m;
  return f;
}

}  // namespace mp
