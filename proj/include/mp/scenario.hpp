// Scenario files, snapshot persistence, the CSV time series, and the report
// plumbing behind the mpbox driver. A scenario is line-oriented text with
// section headers:
//
//   name = decay
//   [grid]         n = 32   box_length = 6.283185307179586
//   [solver]       dt = 1e-3   t_end = 1   record_every = 10   cfl = 0.5
//                  seed = 0   dealias = true   nonlinear = true
//                  coupling = true   nu_scheme = true
//   [init]         family = zero | taylor-green | single-mode | self-similar
//                           | random | snapshot
//                  amplitude, mode, sigma, tau, kmax, slope, path,
//                  spin_family = zero | single-mode | random,
//                  spin_amplitude, spin_mode, spin_kmax
//   [output]       dir = out   snapshots = true
//   [diagnostics]  ball = backward 0.5  3.1 3.1 3.1  0.4      (repeatable)
//                  morrey = parabolic 2 5 2  0.4 0.8          (radii optional)
//                  monitor = 0.5  1.0  0.5  1e-3  [x1 x2 x3]  (r0 T S eps)
//                  tau0 = 6   kappa = 0   eps_regularity = 1e-2
//
// '#' starts a comment, keys are lower-case, later assignments win except
// for the repeatable ones. Unknown keys are an error and are reported all
// together, so a typo cannot silently disable a diagnostic. Every numeric
// parameter is validated on load, and referenced paths must exist.
//
// Snapshots are fixed-width little-endian binary: magic "MPF1", a version
// word, the three axis sizes, box_length, time, a flags word (bit 0: the
// pressure array is present), then 6 or 7 arrays of n^3 doubles in grid
// order (axis 1 fastest). Writing and reading round-trips bit for bit, so
// reruns can be diffed at the byte level.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mp/ckn.hpp"
#include "mp/grid.hpp"
#include "mp/morrey.hpp"
#include "mp/solver.hpp"

namespace mp {

struct InitSpec {
  std::string family = "zero";
  double amplitude = 1.0;
  int mode = 1;        // wavenumber of the analytic families
  double sigma = 0.5;  // self-similar profile width
  double tau = 1.0;    // self-similar time to focusing
  int kmax = 4;        // random band limit
  double slope = 0.0;  // random spectrum reweighting |k|^slope
  std::string path;    // snapshot family source

  std::string spin_family = "zero";
  double spin_amplitude = 0.0;
  int spin_mode = 1;
  int spin_kmax = 2;
};

struct DiagnosticsSpec {
  std::vector<ParabolicBall> balls;  // one scaled-quantities report each

  bool morrey = false;
  MorreyParams morrey_params;  // empty radii select the dyadic ladder

  bool monitor = false;  // type-one sup, embedding check, concentration
  double monitor_r0 = 0.0;
  double monitor_T = 0.0;
  double monitor_S = 0.0;
  double monitor_eps = 0.0;
  std::array<double, 3> monitor_center = {0.0, 0.0, 0.0};

  double tau0 = 6.0;
  double kappa = 0.0;  // 0 requests the solved default
  double eps_regularity = 1e-2;
};

struct Scenario {
  std::string name = "run";
  GridSpec grid;
  SolverConfig solver;
  InitSpec init;
  std::string output_dir = ".";
  bool write_snapshots = true;
  DiagnosticsSpec diag;
  std::string source_text;  // raw scenario bytes, hashed into every report

  // Cross-field checks beyond the syntax: family names, parameter ranges,
  // ball well-formedness, monitor window shape, existence of init.path.
  void validate() const;
};

// Parses scenario text; source_name seasons error messages. Throws
// config_error on syntax errors, unknown keys (all listed), or validation
// failures.
Scenario parse_scenario(const std::string& text,
                        const std::string& source_name);
Scenario load_scenario(const std::string& path);

// Builds the configured initial fields. Random families draw from
// solver.seed (the spin field from a decorrelated stream); the snapshot
// family restores the stored state including its time.
State initial_state(const Scenario& sc);

// Band-limited random field with mode magnitudes reweighted by |k|^slope
// before synthesis; slope 0 reduces to random_vector. Normalized to the
// amplitude in the sup norm.
VectorField spectrum_velocity(const GridSpec& g, std::uint64_t seed, int kmax,
                              double amplitude, double slope, bool divfree);

// --- snapshot files ---

void write_snapshot(const std::string& path, const State& s);
State read_snapshot(const std::string& path);

// All *.mpf files under dir (non-recursive), ordered by time; throws when
// none parse or two carry the same instant.
std::vector<State> read_snapshot_dir(const std::string& dir);

// --- CSV time series ---

// Header plus one row per record step:
//   t,energy_u,energy_w,grad_u,grad_w,div_w,energy_balance_residual,
//   def11_slack
// in shortest round-trip decimal ("%.17g"), newline-terminated. The header
// string is part of the format and never changes.
extern const char* const kBudgetCsvHeader;
std::string budget_csv(const Trajectory& tr);

// --- structured reports ---

// Insertion-ordered flat JSON object writer. Doubles render at full
// precision; non-finite values become null (JSON has no literals for them).
class JsonWriter {
 public:
  JsonWriter& num(const std::string& key, double v);
  JsonWriter& integer(const std::string& key, long long v);
  JsonWriter& boolean(const std::string& key, bool v);
  JsonWriter& str(const std::string& key, const std::string& v);
  JsonWriter& raw(const std::string& key, const std::string& json);
  std::string object() const;

  static std::string array(const std::vector<double>& v);
  static std::string escape(const std::string& s);

 private:
  std::vector<std::pair<std::string, std::string>> fields_;
};

// Parsers for the diagnostics mini-grammars, shared between scenario files
// and CLI flags: "backward|centered t0 x1 x2 x3 r" for balls,
// "r0 T S eps [x1 x2 x3]" for monitors.
ParabolicBall parse_ball_spec(const std::string& spec);
void parse_monitor_spec(const std::string& spec, DiagnosticsSpec& d);

// Writes the configured diagnostic reports for an in-memory trajectory:
// <prefix>.ckn<k>.json per ball, <prefix>.morrey.json, <prefix>.monitor.json.
// The spatial morrey flavor reads the final slice; empty radii select the
// dyadic ladder of the trajectory's grid. Returns the paths written.
std::vector<std::string> write_diagnostics(const DiagnosticsSpec& d,
                                           const std::vector<State>& traj,
                                           const std::string& prefix,
                                           const std::string& hash);

// --- end-to-end run ---

struct RunOutputs {
  int exit_code = 0;  // 0 done, 2 blow-up (outputs truncated)
  std::string hash;   // fnv1a of the scenario text, hex
  std::string csv_path;
  std::vector<std::string> snapshot_paths;
  std::vector<std::string> report_paths;  // run report first
  Trajectory trajectory;
};

// Simulates the scenario and writes every artifact under output_dir:
// <name>.csv, <name>_NNNNNN.mpf at the record cadence, <name>.run.json,
// and one report file per requested diagnostic (<name>.ckn<k>.json,
// <name>.morrey.json, <name>.monitor.json). Diagnostics run on the recorded
// in-memory trajectory; after a blow-up they are skipped and the truncated
// series is still written. Throws config_error for unusable configurations;
// numerical blow-up is reported through exit_code = 2, not an exception.
RunOutputs run_scenario(const Scenario& sc);

}  // namespace mp
