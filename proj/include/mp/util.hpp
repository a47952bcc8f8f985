// Shared plumbing: error types, deterministic RNG, fixed-order reductions,
// optional slab parallelism. Everything here is bit-reproducible for a fixed
// input regardless of thread count.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mp {

// Invalid configuration, bad preconditions, malformed input files.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when the integrator meets non-finite values. Carries the time of the
// last valid state; the state itself travels with the exception's thrower.
struct blowup_error : std::runtime_error {
  double last_valid_time;
  blowup_error(const std::string& msg, double t)
      : std::runtime_error(msg), last_valid_time(t) {}
};

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// gaussian transform is pinned here because std::normal_distribution is not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller, cached spare.
  double gaussian();

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Pairwise summation in a fixed order. Deterministic and O(log n) error.
double pairwise_sum(const double* a, std::size_t n);
double pairwise_sum(const std::vector<double>& a);

// Splits [0, n) into contiguous chunks over the configured thread count.
// Chunks write disjoint data, so results are identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// Global thread count, default 1; the CLI sets it from MPBOX_THREADS.
int thread_count();
void set_thread_count(int n);

// FNV-1a, used to stamp reports with a scenario hash.
std::uint64_t fnv1a(const std::string& bytes);

std::string format_double(double v);  // shortest round-trip "%.17g"

}  // namespace mp
