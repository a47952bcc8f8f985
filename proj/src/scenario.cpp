#include "mp/scenario.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mp/util.hpp"

namespace fs = std::filesystem;

namespace mp {

namespace {

// --- scenario text ---

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

struct ParseCtx {
  std::string source;
  int line = 0;

  [[noreturn]] void fail(const std::string& what) const {
    const std::string at = line > 0 ? ":" + std::to_string(line) : "";
    throw config_error(source + at + ": " + what);
  }
};

double parse_double(const ParseCtx& ctx, const std::string& key,
                    const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty())
    ctx.fail(key + ": not a number: '" + v + "'");
  return x;
}

long parse_long(const ParseCtx& ctx, const std::string& key,
                const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty())
    ctx.fail(key + ": not an integer: '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const ParseCtx& ctx, const std::string& key,
                        const std::string& v) {
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty() || v[0] == '-')
    ctx.fail(key + ": not an unsigned integer: '" + v + "'");
  return x;
}

bool parse_bool(const ParseCtx& ctx, const std::string& key,
                const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  ctx.fail(key + ": not a boolean (true/false/1/0): '" + v + "'");
}

ParabolicBall parse_ball(const ParseCtx& ctx, const std::string& v) {
  const auto t = tokens(v);
  if (t.size() != 6)
    ctx.fail("ball: expected 'backward|centered t0 x1 x2 x3 r', got '" + v +
             "'");
  ParabolicBall b;
  if (t[0] == "backward")
    b.flavor = BallFlavor::backward;
  else if (t[0] == "centered")
    b.flavor = BallFlavor::centered;
  else
    ctx.fail("ball: unknown flavor '" + t[0] + "'");
  b.t0 = parse_double(ctx, "ball t0", t[1]);
  for (int k = 0; k < 3; ++k)
    b.x0[k] = parse_double(ctx, "ball center", t[2 + k]);
  b.r = parse_double(ctx, "ball r", t[5]);
  return b;
}

void parse_morrey(const ParseCtx& ctx, const std::string& v,
                  DiagnosticsSpec& d) {
  const auto t = tokens(v);
  if (t.size() < 4)
    ctx.fail("morrey: expected 'spatial|parabolic p q stride [radii...]'");
  if (t[0] == "spatial")
    d.morrey_params.flavor = MorreyFlavor::spatial;
  else if (t[0] == "parabolic")
    d.morrey_params.flavor = MorreyFlavor::parabolic;
  else
    ctx.fail("morrey: unknown flavor '" + t[0] + "'");
  d.morrey_params.p = parse_double(ctx, "morrey p", t[1]);
  d.morrey_params.q = parse_double(ctx, "morrey q", t[2]);
  d.morrey_params.center_stride =
      static_cast<int>(parse_long(ctx, "morrey stride", t[3]));
  d.morrey_params.radii.clear();
  for (std::size_t k = 4; k < t.size(); ++k)
    d.morrey_params.radii.push_back(parse_double(ctx, "morrey radius", t[k]));
  d.morrey = true;
}

void parse_monitor(const ParseCtx& ctx, const std::string& v,
                   DiagnosticsSpec& d) {
  const auto t = tokens(v);
  if (t.size() != 4 && t.size() != 7)
    ctx.fail("monitor: expected 'r0 T S eps [x1 x2 x3]'");
  d.monitor_r0 = parse_double(ctx, "monitor r0", t[0]);
  d.monitor_T = parse_double(ctx, "monitor T", t[1]);
  d.monitor_S = parse_double(ctx, "monitor S", t[2]);
  d.monitor_eps = parse_double(ctx, "monitor eps", t[3]);
  if (t.size() == 7)
    for (int k = 0; k < 3; ++k)
      d.monitor_center[k] = parse_double(ctx, "monitor center", t[4 + k]);
  d.monitor = true;
}

bool name_ok(const std::string& s) {
  if (s.empty() || s == "." || s == "..") return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
          c == '-' || c == '.'))
      return false;
  return true;
}

// --- binary encoding, little-endian fixed width ---

void put_u32(std::string& b, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b.push_back(static_cast<char>(v >> (8 * k)));
}

void put_f64(std::string& b, double v) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) b.push_back(static_cast<char>(u >> (8 * k)));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[k]))
         << (8 * k);
  return v;
}

double get_f64(const char* p) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[k]))
         << (8 * k);
  return std::bit_cast<double>(v);
}

constexpr std::uint32_t kSnapshotVersion = 1;
constexpr std::size_t kHeaderBytes = 40;

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out.good()) throw config_error("short write: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw config_error("read failed: " + path);
  return buf.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

// --- parsing ---

Scenario parse_scenario(const std::string& text,
                        const std::string& source_name) {
  Scenario sc;
  ParseCtx ctx{source_name, 0};
  std::string section;
  bool section_known = true;
  std::vector<std::string> unknown;

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++ctx.line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') ctx.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      section_known = section == "grid" || section == "solver" ||
                      section == "init" || section == "output" ||
                      section == "diagnostics";
      if (!section_known) unknown.push_back("[" + section + "]");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) ctx.fail("expected key = value: '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) ctx.fail("empty key");
    if (!section_known) continue;  // the section itself is already reported

    bool known = true;
    if (section.empty()) {
      if (key == "name")
        sc.name = val;
      else
        known = false;
    } else if (section == "grid") {
      if (key == "n")
        sc.grid.n = static_cast<int>(parse_long(ctx, key, val));
      else if (key == "box_length")
        sc.grid.box_length = parse_double(ctx, key, val);
      else
        known = false;
    } else if (section == "solver") {
      if (key == "dt")
        sc.solver.dt = parse_double(ctx, key, val);
      else if (key == "t_end")
        sc.solver.t_end = parse_double(ctx, key, val);
      else if (key == "record_every")
        sc.solver.record_every = parse_long(ctx, key, val);
      else if (key == "cfl")
        sc.solver.cfl = parse_double(ctx, key, val);
      else if (key == "seed")
        sc.solver.seed = parse_u64(ctx, key, val);
      else if (key == "dealias")
        sc.solver.dealias = parse_bool(ctx, key, val);
      else if (key == "nonlinear")
        sc.solver.nonlinear = parse_bool(ctx, key, val);
      else if (key == "coupling")
        sc.solver.coupling = parse_bool(ctx, key, val);
      else if (key == "nu_scheme")
        sc.solver.nu_scheme = parse_bool(ctx, key, val);
      else
        known = false;
    } else if (section == "init") {
      if (key == "family")
        sc.init.family = val;
      else if (key == "amplitude")
        sc.init.amplitude = parse_double(ctx, key, val);
      else if (key == "mode")
        sc.init.mode = static_cast<int>(parse_long(ctx, key, val));
      else if (key == "sigma")
        sc.init.sigma = parse_double(ctx, key, val);
      else if (key == "tau")
        sc.init.tau = parse_double(ctx, key, val);
      else if (key == "kmax")
        sc.init.kmax = static_cast<int>(parse_long(ctx, key, val));
      else if (key == "slope")
        sc.init.slope = parse_double(ctx, key, val);
      else if (key == "path")
        sc.init.path = val;
      else if (key == "spin_family")
        sc.init.spin_family = val;
      else if (key == "spin_amplitude")
        sc.init.spin_amplitude = parse_double(ctx, key, val);
      else if (key == "spin_mode")
        sc.init.spin_mode = static_cast<int>(parse_long(ctx, key, val));
      else if (key == "spin_kmax")
        sc.init.spin_kmax = static_cast<int>(parse_long(ctx, key, val));
      else
        known = false;
    } else if (section == "output") {
      if (key == "dir")
        sc.output_dir = val;
      else if (key == "snapshots")
        sc.write_snapshots = parse_bool(ctx, key, val);
      else
        known = false;
    } else if (section == "diagnostics") {
      if (key == "ball")
        sc.diag.balls.push_back(parse_ball(ctx, val));
      else if (key == "morrey")
        parse_morrey(ctx, val, sc.diag);
      else if (key == "monitor")
        parse_monitor(ctx, val, sc.diag);
      else if (key == "tau0")
        sc.diag.tau0 = parse_double(ctx, key, val);
      else if (key == "kappa")
        sc.diag.kappa = parse_double(ctx, key, val);
      else if (key == "eps_regularity")
        sc.diag.eps_regularity = parse_double(ctx, key, val);
      else
        known = false;
    }
    if (!known)
      unknown.push_back(section.empty() ? key : "[" + section + "] " + key);
  }

  if (!unknown.empty()) {
    std::string msg = "scenario " + source_name + ": unknown keys:";
    for (const std::string& k : unknown) msg += " " + k;
    throw config_error(msg);
  }

  sc.source_text = text;
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  return parse_scenario(read_file(path), path);
}

void Scenario::validate() const {
  if (!name_ok(name))
    throw config_error("scenario: name must be nonempty [A-Za-z0-9_.-]");
  grid.validate();
  solver.validate();

  const std::string& fam = init.family;
  if (fam != "zero" && fam != "taylor-green" && fam != "single-mode" &&
      fam != "self-similar" && fam != "random" && fam != "snapshot")
    throw config_error("scenario: unknown init family '" + fam + "'");
  if (!std::isfinite(init.amplitude))
    throw config_error("scenario: init amplitude must be finite");
  if ((fam == "taylor-green" || fam == "single-mode") && init.mode < 1)
    throw config_error("scenario: init mode must be >= 1");
  if (fam == "self-similar" &&
      (!(init.sigma > 0.0) || !std::isfinite(init.sigma) ||
       !(init.tau > 0.0) || !std::isfinite(init.tau)))
    throw config_error("scenario: self-similar needs sigma > 0 and tau > 0");
  if (fam == "random" && (init.kmax < 1 || !std::isfinite(init.slope)))
    throw config_error("scenario: random needs kmax >= 1 and finite slope");
  if (fam == "snapshot") {
    if (init.path.empty())
      throw config_error("scenario: snapshot family needs path");
    if (!fs::exists(init.path))
      throw config_error("scenario: init path does not exist: " + init.path);
    if (init.spin_family != "zero")
      throw config_error(
          "scenario: the snapshot family carries its own spin field");
  }

  const std::string& sfam = init.spin_family;
  if (sfam != "zero" && sfam != "single-mode" && sfam != "random")
    throw config_error("scenario: unknown spin family '" + sfam + "'");
  if (!std::isfinite(init.spin_amplitude))
    throw config_error("scenario: spin amplitude must be finite");
  if (sfam == "single-mode" && init.spin_mode < 1)
    throw config_error("scenario: spin mode must be >= 1");
  if (sfam == "random" && init.spin_kmax < 1)
    throw config_error("scenario: spin kmax must be >= 1");

  if (output_dir.empty()) throw config_error("scenario: output dir is empty");

  for (const ParabolicBall& b : diag.balls) b.validate();
  if (diag.morrey) {
    MorreyParams probe = diag.morrey_params;
    if (probe.radii.empty()) probe.radii = {1.0};  // ladder filled at run time
    probe.validate();
  }
  if (diag.monitor) {
    if (!(diag.monitor_r0 > 0.0) ||
        !(diag.monitor_r0 * diag.monitor_r0 < diag.monitor_T))
      throw config_error("scenario: monitor needs 0 < r0 and r0^2 < T");
    if (!(diag.monitor_S > 0.0) || !(diag.monitor_S < 1.0))
      throw config_error("scenario: monitor needs S in (0, 1)");
    if (!(diag.monitor_eps > 0.0))
      throw config_error("scenario: monitor needs eps > 0");
  }
  if (!(diag.tau0 > 5.0) || !(diag.tau0 <= 7.5))
    throw config_error("scenario: tau0 must lie in (5, 15/2]");
  if (diag.kappa != 0.0 && !(diag.kappa > 0.0 && diag.kappa < 0.5))
    throw config_error("scenario: kappa must be 0 (solve) or in (0, 1/2)");
  if (!(diag.eps_regularity > 0.0))
    throw config_error("scenario: eps_regularity must be > 0");
}

// --- initial data ---

VectorField spectrum_velocity(const GridSpec& g, std::uint64_t seed, int kmax,
                              double amplitude, double slope, bool divfree) {
  VectorField f = random_vector(g, seed, kmax, 1.0, divfree);
  if (slope != 0.0) {
    SpectralTriple s = to_spectral(f);
    const GridSpec& sg = s[0].grid;
    for (int j3 = 0; j3 < sg.n; ++j3)
      for (int j2 = 0; j2 < sg.n; ++j2)
        for (int k1 = 0; k1 < sg.nh(); ++k1) {
          const double k2 = sg.kappa(k1) * sg.kappa(k1) +
                            sg.kappa(j2) * sg.kappa(j2) +
                            sg.kappa(j3) * sg.kappa(j3);
          const double factor = k2 > 0.0 ? std::pow(std::sqrt(k2), slope) : 1.0;
          const std::size_t q = sg.sidx(k1, j2, j3);
          for (int c = 0; c < 3; ++c) s[c].m[q] *= factor;
        }
    f = from_spectral(s);
  }
  const double m = linf(f);
  if (m > 0.0)
    for (auto& comp : f.c)
      for (auto& v : comp) v *= amplitude / m;
  return f;
}

State initial_state(const Scenario& sc) {
  sc.validate();
  const GridSpec& g = sc.grid;
  const InitSpec& ic = sc.init;

  if (ic.family == "snapshot") {
    State s = read_snapshot(ic.path);
    if (!(s.u.grid == g))
      throw config_error("scenario: snapshot grid disagrees with [grid]");
    return s;
  }

  State s;
  s.t = 0.0;
  if (ic.family == "zero")
    s.u = make_vector(g);
  else if (ic.family == "taylor-green")
    s.u = taylor_green_velocity(g, ic.amplitude, ic.mode);
  else if (ic.family == "single-mode")
    s.u = single_mode_velocity(g, ic.amplitude, ic.mode);
  else if (ic.family == "self-similar")
    s.u = self_similar_velocity(g, ic.amplitude, ic.sigma, ic.tau);
  else  // random
    s.u = spectrum_velocity(g, sc.solver.seed, ic.kmax, ic.amplitude,
                            ic.slope, true);

  if (ic.spin_family == "zero")
    s.w = make_vector(g);
  else if (ic.spin_family == "single-mode")
    s.w = single_mode_spin(g, ic.spin_amplitude, ic.spin_mode);
  else  // random, decorrelated from the velocity stream
    s.w = random_vector(g, sc.solver.seed + 0x9e3779b97f4a7c15ULL,
                        ic.spin_kmax, ic.spin_amplitude, false);
  return s;
}

// --- snapshots ---

void write_snapshot(const std::string& path, const State& s) {
  const GridSpec& g = s.u.grid;
  g.validate();
  const std::size_t cells = g.cells();
  for (int k = 0; k < 3; ++k)
    if (s.u.c[k].size() != cells)
      throw config_error("snapshot: velocity size disagrees with its grid");
  if (!(s.w.grid == g))
    throw config_error("snapshot: state carries no spin field");
  for (int k = 0; k < 3; ++k)
    if (s.w.c[k].size() != cells)
      throw config_error("snapshot: spin size disagrees with its grid");
  const bool with_p = !s.p.s.empty();
  if (with_p && (s.p.s.size() != cells || !(s.p.grid == g)))
    throw config_error("snapshot: pressure size disagrees with its grid");

  std::string b;
  b.reserve(kHeaderBytes + (with_p ? 7 : 6) * cells * 8);
  b += "MPF1";
  put_u32(b, kSnapshotVersion);
  for (int k = 0; k < 3; ++k) put_u32(b, static_cast<std::uint32_t>(g.n));
  put_f64(b, g.box_length);
  put_f64(b, s.t);
  put_u32(b, with_p ? 1u : 0u);
  for (int k = 0; k < 3; ++k)
    for (double v : s.u.c[k]) put_f64(b, v);
  for (int k = 0; k < 3; ++k)
    for (double v : s.w.c[k]) put_f64(b, v);
  if (with_p)
    for (double v : s.p.s) put_f64(b, v);
  write_file(path, b);
}

State read_snapshot(const std::string& path) {
  const std::string b = read_file(path);
  if (b.size() < kHeaderBytes)
    throw config_error("snapshot " + path + ": truncated header");
  if (std::memcmp(b.data(), "MPF1", 4) != 0)
    throw config_error("snapshot " + path + ": bad magic");
  if (get_u32(b.data() + 4) != kSnapshotVersion)
    throw config_error("snapshot " + path + ": unsupported version");
  const std::uint32_t n1 = get_u32(b.data() + 8);
  const std::uint32_t n2 = get_u32(b.data() + 12);
  const std::uint32_t n3 = get_u32(b.data() + 16);
  if (n1 != n2 || n1 != n3)
    throw config_error("snapshot " + path + ": grid is not cubic");
  GridSpec g;
  g.n = static_cast<int>(n1);
  g.box_length = get_f64(b.data() + 20);
  g.validate();
  const double time = get_f64(b.data() + 28);
  const std::uint32_t flags = get_u32(b.data() + 36);
  if (flags & ~1u)
    throw config_error("snapshot " + path + ": unknown flags");
  const bool with_p = flags & 1u;
  const std::size_t cells = g.cells();
  const std::size_t expect = kHeaderBytes + (with_p ? 7 : 6) * cells * 8;
  if (b.size() != expect)
    throw config_error("snapshot " + path + ": payload length mismatch");

  State s;
  s.t = time;
  s.u = make_vector(g);
  s.w = make_vector(g);
  const char* p = b.data() + kHeaderBytes;
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < cells; ++i, p += 8) s.u.c[k][i] = get_f64(p);
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < cells; ++i, p += 8) s.w.c[k][i] = get_f64(p);
  if (with_p) {
    s.p = make_scalar(g);
    for (std::size_t i = 0; i < cells; ++i, p += 8) s.p.s[i] = get_f64(p);
  }
  return s;
}

std::vector<State> read_snapshot_dir(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw config_error("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".mpf")
      paths.push_back(e.path().string());
  if (paths.empty()) throw config_error("no .mpf snapshots under " + dir);
  std::sort(paths.begin(), paths.end());

  std::vector<State> traj;
  for (const std::string& p : paths) traj.push_back(read_snapshot(p));
  std::sort(traj.begin(), traj.end(),
            [](const State& a, const State& b) { return a.t < b.t; });
  for (std::size_t j = 1; j < traj.size(); ++j)
    if (!(traj[j].t > traj[j - 1].t))
      throw config_error("snapshots under " + dir +
                         " repeat the instant t = " +
                         format_double(traj[j].t));
  return traj;
}

// --- CSV ---

const char* const kBudgetCsvHeader =
    "t,energy_u,energy_w,grad_u,grad_w,div_w,energy_balance_residual,"
    "def11_slack";

std::string budget_csv(const Trajectory& tr) {
  const std::vector<BudgetRow> rows = energy_budget(tr);
  std::string out = kBudgetCsvHeader;
  out += '\n';
  for (long idx : tr.record_steps) {
    const BudgetRow& r = rows.at(static_cast<std::size_t>(idx));
    out += format_double(r.t);
    out += ',';
    out += format_double(r.energy_u);
    out += ',';
    out += format_double(r.energy_w);
    out += ',';
    out += format_double(r.grad_u);
    out += ',';
    out += format_double(r.grad_w);
    out += ',';
    out += format_double(r.div_w);
    out += ',';
    out += format_double(r.balance_residual);
    out += ',';
    out += format_double(r.def11_slack);
    out += '\n';
  }
  return out;
}

// --- JSON ---

std::string JsonWriter::escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

namespace {
std::string json_number(double v) {
  return std::isfinite(v) ? format_double(v) : std::string("null");
}
}  // namespace

JsonWriter& JsonWriter::num(const std::string& key, double v) {
  fields_.emplace_back(key, json_number(v));
  return *this;
}

JsonWriter& JsonWriter::integer(const std::string& key, long long v) {
  fields_.emplace_back(key, std::to_string(v));
  return *this;
}

JsonWriter& JsonWriter::boolean(const std::string& key, bool v) {
  fields_.emplace_back(key, v ? "true" : "false");
  return *this;
}

JsonWriter& JsonWriter::str(const std::string& key, const std::string& v) {
  fields_.emplace_back(key, "\"" + escape(v) + "\"");
  return *this;
}

JsonWriter& JsonWriter::raw(const std::string& key, const std::string& json) {
  fields_.emplace_back(key, json);
  return *this;
}

std::string JsonWriter::object() const {
  std::string out = "{";
  for (std::size_t k = 0; k < fields_.size(); ++k) {
    if (k) out += ",";
    out += "\"" + escape(fields_[k].first) + "\":" + fields_[k].second;
  }
  out += "}\n";
  return out;
}

std::string JsonWriter::array(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ",";
    out += json_number(v[k]);
  }
  out += "]";
  return out;
}

// --- end-to-end run ---

namespace {

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::regular_candidate: return "regular_candidate";
    case Verdict::singular_candidate: return "singular_candidate";
    default: return "inconclusive";
  }
}

std::string xyz(const std::array<double, 3>& x) {
  return JsonWriter::array({x[0], x[1], x[2]});
}

void emit_ckn(const DiagnosticsSpec& d, const std::string& hash,
              const std::vector<State>& recorded, const std::string& prefix,
              std::vector<std::string>& paths) {
  for (std::size_t k = 0; k < d.balls.size(); ++k) {
    const ParabolicBall& ball = d.balls[k];
    CknReport rep = ckn_quantities(recorded, ball, d.kappa, d.tau0);
    rep.verdict = epsilon_regularity_verdict(rep, d.eps_regularity);
    JsonWriter jw;
    jw.str("schema", "ckn")
        .str("scenario_hash", hash)
        .str("flavor",
             ball.flavor == BallFlavor::backward ? "backward" : "centered")
        .num("t0", ball.t0)
        .raw("x0", xyz(ball.x0))
        .num("r", ball.r)
        .num("A_r", rep.A_r)
        .num("alpha_r", rep.alpha_r)
        .num("lambda_r", rep.lambda_r)
        .num("P_r", rep.P_r)
        .num("Lambda_r", rep.Lambda_r)
        .num("Pbb_r", rep.Pbb_r)
        .num("O_r", rep.O_r)
        .num("E_r", rep.E_r)
        .num("kappa", rep.kappa)
        .num("tau0", rep.tau0)
        .num("eps_regularity", d.eps_regularity)
        .str("verdict", verdict_name(rep.verdict))
        .boolean("clipped", rep.clipped);
    const std::string path = prefix + ".ckn" + std::to_string(k) + ".json";
    write_file(path, jw.object());
    paths.push_back(path);
  }
}

void emit_morrey(const DiagnosticsSpec& d, const std::string& hash,
                 const std::vector<State>& recorded, const std::string& prefix,
                 std::vector<std::string>& paths) {
  MorreyParams params = d.morrey_params;
  if (params.radii.empty())
    params.radii = dyadic_radii(recorded.front().u.grid);
  const bool spatial = params.flavor == MorreyFlavor::spatial;
  const MorreyEstimate est = spatial
                                 ? morrey_spatial(recorded.back().u, params)
                                 : morrey_parabolic(recorded, params);
  JsonWriter jw;
  jw.str("schema", "morrey")
      .str("scenario_hash", hash)
      .str("flavor", spatial ? "spatial" : "parabolic")
      .num("p", params.p)
      .num("q", params.q)
      .integer("center_stride", params.center_stride)
      .raw("radii", JsonWriter::array(params.radii))
      .num("value", est.value)
      .raw("argmax_center", xyz(est.center))
      .num("argmax_radius", est.radius)
      .num("argmax_time", est.time);
  if (spatial) jw.num("slice_time", recorded.back().t);
  const std::string path = prefix + ".morrey.json";
  write_file(path, jw.object());
  paths.push_back(path);
}

void emit_monitor(const DiagnosticsSpec& d, const std::string& hash,
                  const std::vector<State>& recorded, const std::string& prefix,
                  std::vector<std::string>& paths) {
  const TypeIReport rep =
      type_one_monitor(recorded, d.monitor_r0, d.monitor_T);
  const MorreyEstimate bridge = type_one_to_morrey_bridge(rep);
  const EmbeddingCheck chk =
      type_one_embedding_check(recorded, d.monitor_r0, d.monitor_T);
  const ConcentrationSeries conc = concentration_monitor(
      recorded, d.monitor_T, d.monitor_S, d.monitor_eps,
      std::numeric_limits<double>::infinity(), d.monitor_center);
  JsonWriter jw;
  jw.str("schema", "monitor")
      .str("scenario_hash", hash)
      .num("r0", d.monitor_r0)
      .num("T", d.monitor_T)
      .num("S", d.monitor_S)
      .num("eps", d.monitor_eps)
      .raw("center", xyz(d.monitor_center))
      .num("type_one_M", rep.M)
      .raw("type_one_x0", xyz(rep.x0))
      .num("type_one_r", rep.r)
      .num("type_one_t", rep.t)
      .num("bridge_value", bridge.value)
      .num("embedding_spatial", chk.spatial)
      .num("embedding_parabolic", chk.parabolic)
      .num("embedding_constant", chk.constant)
      .boolean("embedding_holds", chk.holds)
      .raw("concentration_t", JsonWriter::array(conc.t))
      .raw("concentration_radius", JsonWriter::array(conc.radius))
      .raw("concentration_mass", JsonWriter::array(conc.mass))
      .boolean("concentration_truncated", conc.truncated)
      .boolean("concentration_pass", conc.pass);
  const std::string path = prefix + ".monitor.json";
  write_file(path, jw.object());
  paths.push_back(path);
}

}  // namespace

ParabolicBall parse_ball_spec(const std::string& spec) {
  return parse_ball(ParseCtx{"ball spec", 0}, spec);
}

void parse_monitor_spec(const std::string& spec, DiagnosticsSpec& d) {
  parse_monitor(ParseCtx{"monitor spec", 0}, spec, d);
}

std::vector<std::string> write_diagnostics(const DiagnosticsSpec& d,
                                           const std::vector<State>& traj,
                                           const std::string& prefix,
                                           const std::string& hash) {
  std::vector<std::string> paths;
  emit_ckn(d, hash, traj, prefix, paths);
  if (d.morrey) emit_morrey(d, hash, traj, prefix, paths);
  if (d.monitor) emit_monitor(d, hash, traj, prefix, paths);
  return paths;
}

RunOutputs run_scenario(const Scenario& sc) {
  sc.validate();
  fs::create_directories(sc.output_dir);

  RunOutputs out;
  out.hash = hex64(fnv1a(sc.source_text));

  const State init = initial_state(sc);
  const bool want_traj =
      !sc.diag.balls.empty() || sc.diag.morrey || sc.diag.monitor;
  std::vector<State> recorded;

  const RecordObserver observe = [&](const State& s, long step) {
    if (sc.write_snapshots) {
      char tag[16];
      std::snprintf(tag, sizeof tag, "_%06ld.mpf", step);
      const std::string path =
          (fs::path(sc.output_dir) / (sc.name + tag)).string();
      write_snapshot(path, s);
      out.snapshot_paths.push_back(path);
    }
    if (want_traj) recorded.push_back(s);
  };

  out.trajectory = simulate(init, sc.solver, observe);
  const Trajectory& tr = out.trajectory;

  out.csv_path = (fs::path(sc.output_dir) / (sc.name + ".csv")).string();
  write_file(out.csv_path, budget_csv(tr));

  const bool diag_skipped = want_traj && tr.blew_up;
  JsonWriter jw;
  jw.str("schema", "run")
      .str("name", sc.name)
      .str("scenario_hash", out.hash)
      .integer("n", sc.grid.n)
      .num("box_length", sc.grid.box_length)
      .num("dt", sc.solver.dt)
      .num("t_end", sc.solver.t_end)
      .integer("record_every", sc.solver.record_every)
      .integer("steps", static_cast<long long>(tr.series.size()) - 1)
      .boolean("blew_up", tr.blew_up)
      .num("blowup_time", tr.blowup_time)
      .boolean("cfl_exceeded", tr.cfl_exceeded)
      .num("cfl_exceeded_time", tr.cfl_exceeded_time)
      .num("final_time", tr.series.back().t)
      .num("final_energy_u", tr.series.back().energy_u)
      .num("final_energy_w", tr.series.back().energy_w)
      .boolean("diagnostics_skipped", diag_skipped);
  const std::string run_path =
      (fs::path(sc.output_dir) / (sc.name + ".run.json")).string();
  write_file(run_path, jw.object());
  out.report_paths.push_back(run_path);

  if (want_traj && !tr.blew_up) {
    const std::string prefix = (fs::path(sc.output_dir) / sc.name).string();
    std::vector<std::string> diag_paths =
        write_diagnostics(sc.diag, recorded, prefix, out.hash);
    out.report_paths.insert(out.report_paths.end(), diag_paths.begin(),
                            diag_paths.end());
  }

  out.exit_code = tr.blew_up ? 2 : 0;
  return out;
}

}  // namespace mp
