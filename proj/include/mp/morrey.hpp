// Sampled Morrey norms.  The spatial form takes the sup over sampled balls
// of (r^{-3(1-p/q)} int_{B(x0,r)} |f|^p)^{1/p}; the parabolic form weights
// two-sided time windows |t - t0| < r^2 with r^{-5(1-p/q)} instead.  Both
// are lower bounds of the continuum norms: the sup runs over a finite
// sample set of centers, radii, and recorded times.
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "mp/ckn.hpp"
#include "mp/grid.hpp"
#include "mp/solver.hpp"

namespace mp {

enum class MorreyFlavor { spatial, parabolic };

struct MorreyParams {
  double p = 2.0;
  double q = 3.0;
  std::vector<double> radii;  // positive; typically dyadic_radii(g)
  int center_stride = 2;      // every center_stride-th grid point per axis
  MorreyFlavor flavor = MorreyFlavor::spatial;

  // Throws config_error unless 1 < p <= q (finite), the radius set is
  // nonempty with positive finite entries, and center_stride >= 1.
  void validate() const;
};

struct MorreyEstimate {
  double value = 0.0;
  // First sample attaining the sup, in scan order (radii in the given
  // order, then recorded times, then centers); meaningful when value > 0.
  std::array<double, 3> center = {0.0, 0.0, 0.0};
  double radius = 0.0;
  // Window center of the parabolic argmax; the spatial flavor leaves NaN.
  double time = std::numeric_limits<double>::quiet_NaN();
};

// Dyadic radii h * 2^j up to half the box length, the default sample set.
std::vector<double> dyadic_radii(const GridSpec& g);

MorreyEstimate morrey_spatial(const VectorField& f, const MorreyParams& params);

// Velocity Morrey norm over recorded slices; windows are clipped to the
// recorded range implicitly, and windows holding fewer than two slices
// contribute nothing.  Requires at least two recorded slices.
MorreyEstimate morrey_parabolic(const std::vector<State>& traj,
                                const MorreyParams& params);

// The type one functional sup (1/r) int_B |u|^2 is exactly the sampled
// M^{2,3}_x bracket, since r^{-3(1-2/3)} = 1/r; its square root converts
// the report into the Morrey estimate at the same argmax.
MorreyEstimate type_one_to_morrey_bridge(const TypeIReport& report);

// Checks the embedding M^{2,3}_x (uniformly on the monitored times) into
// M^{2,5}_{t,x} on the same samples the type one monitor scans: windows are
// intersected with the monitored range ]T - r^2, T], so every slice in the
// time integral is itself a candidate of the spatial sup and the inequality
// parabolic <= sqrt(2) * spatial holds sample-wise by construction.  holds
// allows a 1e-12 relative slack for reordered roundoff.
struct EmbeddingCheck {
  double spatial = 0.0;    // sqrt of the type one sup
  double parabolic = 0.0;  // sampled M^{2,5}_{t,x} estimate on those samples
  double constant = 1.4142135623730951;
  bool holds = false;
};
EmbeddingCheck type_one_embedding_check(const std::vector<State>& traj,
                                        double r0, double T,
                                        int center_stride = 2);

}  // namespace mp
