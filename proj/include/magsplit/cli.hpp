#pragma once

// Command-line front end.  Wires the computational modules (half-plane band
// constants, boundary geometry, effective double-well model, gap formula,
// 2D boundary operator) behind a small set of subcommands:
//
//   constants   band constants and their identity checks
//   geometry    boundary geometry and tunneling data for the configured domain
//   sweep       gap formula and enabled numerical oracles over an h grid (CSV)
//   validate    cross-module invariant suite, machine-readable
//   fit-alpha0  least-squares flux phase offset from measured gaps
//
// Configuration is a flat key = value file with [sections]; every run can
// emit the fully resolved configuration, which re-parses to an equal value
// (round-trip invariant).  Exit codes: 0 success, 1 usage/configuration
// error, 2 failed check (including resolution refusals and domains without
// curvature wells), 3 numerical failure.
//
// All numeric output uses the C locale ('.' decimal separator) and fixed
// significant-digit formatting, so repeated runs produce byte-identical
// files.

#include <algorithm>
#include <clocale>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "magsplit/boundary2d.hpp"
#include "magsplit/curve.hpp"
#include "magsplit/degennes.hpp"
#include "magsplit/effective.hpp"
#include "magsplit/splitting.hpp"

namespace magsplit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitCheckFailed = 2;
inline constexpr int kExitNumerical = 3;

// Oracle validity windows.  The effective model is an asymptotic reduction:
// past h = 0.25 its subleading corrections are no longer small, so a larger
// h proves nothing about the formula.  The 2D solve works in a tubular
// collar of depth 12 scaled lengths; for hbar above 0.25 that collar no
// longer fits inside the domain at the curvature maximum (the frame
// degenerates), and below hbar = 0.05 the tangential grid the resolution
// contract demands outgrows the memory budget of a direct factorization.
inline constexpr double kEffHMin = 1e-6;
inline constexpr double kEffHMax = 0.25;
inline constexpr double kB2dHbarMin = 0.05;
inline constexpr double kB2dHbarMax = 0.25;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  // [domain]
  std::string domain_kind = "ellipse";  // "ellipse" | "curve"
  double ellipse_a = 2.0;
  double ellipse_b = 1.0;
  std::string curve_file;  // two-column samples, used when kind = "curve"
  // [degennes]
  double degennes_t_max = 20.0;
  int degennes_n = 2000;
  // [geometry]
  int geometry_samples = 4096;
  // [hgrid]
  double h_min = 0.0064;
  double h_max = 0.04;
  int h_count = 6;
  std::string h_spacing = "log_h_quarter";  // "log_h_quarter" | "linear_inv_h"
  // [splitting]
  double alpha0 = 0.0;
  bool strict_paper_signs = false;  // use the alternative printed
                                    // normalization c1 = u0^2/6 (the band
                                    // curvature identity check then fails)
  // [oracles]
  bool oracle_effective1d = true;
  bool oracle_boundary2d = false;
  int boundary2d_ppw = 24;
  int boundary2d_ntau = 128;
  bool boundary2d_extrapolate = true;
  // [output]
  std::string out_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x))
    throw ConfigError(where + ": expected a finite number, got '" + v + "'");
  return x;
}

inline int parse_int(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return static_cast<int>(x);
}

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

// Fixed-format float for tables and CSV files ("nan" normalized).
inline std::string fmt(double v, const char* spec = "%.15g") {
  if (std::isnan(v)) return "nan";
  char b[64];
  std::snprintf(b, sizeof b, spec, v);
  return b;
}

// Full-precision float for configuration round-trips.
inline std::string fmt17(double v) { return fmt(v, "%.17g"); }

inline std::string sanitize_note(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& is,
                              const std::string& name = "<config>") {
  RunConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where =
        name + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(where + ": malformed section header '" + line + "'");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value, got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;
    const std::string ctx = where + " (" + qual + ")";
    if (qual == "domain.kind") cfg.domain_kind = val;
    else if (qual == "domain.a") cfg.ellipse_a = detail::parse_double(val, ctx);
    else if (qual == "domain.b") cfg.ellipse_b = detail::parse_double(val, ctx);
    else if (qual == "domain.curve_file") cfg.curve_file = val;
    else if (qual == "degennes.t_max")
      cfg.degennes_t_max = detail::parse_double(val, ctx);
    else if (qual == "degennes.n") cfg.degennes_n = detail::parse_int(val, ctx);
    else if (qual == "geometry.samples")
      cfg.geometry_samples = detail::parse_int(val, ctx);
    else if (qual == "hgrid.h_min") cfg.h_min = detail::parse_double(val, ctx);
    else if (qual == "hgrid.h_max") cfg.h_max = detail::parse_double(val, ctx);
    else if (qual == "hgrid.count") cfg.h_count = detail::parse_int(val, ctx);
    else if (qual == "hgrid.spacing") cfg.h_spacing = val;
    else if (qual == "splitting.alpha0")
      cfg.alpha0 = detail::parse_double(val, ctx);
    else if (qual == "splitting.strict_paper_signs")
      cfg.strict_paper_signs = detail::parse_bool(val, ctx);
    else if (qual == "oracles.effective1d")
      cfg.oracle_effective1d = detail::parse_bool(val, ctx);
    else if (qual == "oracles.boundary2d")
      cfg.oracle_boundary2d = detail::parse_bool(val, ctx);
    else if (qual == "oracles.boundary2d_ppw")
      cfg.boundary2d_ppw = detail::parse_int(val, ctx);
    else if (qual == "oracles.boundary2d_ntau")
      cfg.boundary2d_ntau = detail::parse_int(val, ctx);
    else if (qual == "oracles.boundary2d_extrapolate")
      cfg.boundary2d_extrapolate = detail::parse_bool(val, ctx);
    else if (qual == "output.dir") cfg.out_dir = val;
    else
      throw ConfigError(where + ": unknown key '" + qual + "'");
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  return parse_config(f, path);
}

// Canonical serialization; parse_config(serialize_config(cfg)) == cfg.
inline std::string serialize_config(const RunConfig& cfg) {
  using detail::fmt17;
  std::ostringstream os;
  os << "# resolved run configuration\n"
     << "[domain]\n"
     << "kind = " << cfg.domain_kind << "\n"
     << "a = " << fmt17(cfg.ellipse_a) << "\n"
     << "b = " << fmt17(cfg.ellipse_b) << "\n"
     << "curve_file = " << cfg.curve_file << "\n"
     << "\n[degennes]\n"
     << "t_max = " << fmt17(cfg.degennes_t_max) << "\n"
     << "n = " << cfg.degennes_n << "\n"
     << "\n[geometry]\n"
     << "samples = " << cfg.geometry_samples << "\n"
     << "\n[hgrid]\n"
     << "h_min = " << fmt17(cfg.h_min) << "\n"
     << "h_max = " << fmt17(cfg.h_max) << "\n"
     << "count = " << cfg.h_count << "\n"
     << "spacing = " << cfg.h_spacing << "\n"
     << "\n[splitting]\n"
     << "alpha0 = " << fmt17(cfg.alpha0) << "\n"
     << "strict_paper_signs = " << (cfg.strict_paper_signs ? "true" : "false")
     << "\n"
     << "\n[oracles]\n"
     << "effective1d = " << (cfg.oracle_effective1d ? "true" : "false") << "\n"
     << "boundary2d = " << (cfg.oracle_boundary2d ? "true" : "false") << "\n"
     << "boundary2d_ppw = " << cfg.boundary2d_ppw << "\n"
     << "boundary2d_ntau = " << cfg.boundary2d_ntau << "\n"
     << "boundary2d_extrapolate = "
     << (cfg.boundary2d_extrapolate ? "true" : "false") << "\n"
     << "\n[output]\n"
     << "dir = " << cfg.out_dir << "\n";
  return os.str();
}

// Configuration-level invariants.  Returns human-readable problems (empty
// means valid).  Per-point oracle guard violations inside the h grid are
// not rejected here — the sweep reports them row by row — but a grid that
// lies entirely outside an enabled oracle's validity window is vacuous and
// is refused.
inline std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> bad;
  auto say = [&](const std::string& m) { bad.push_back(m); };
  if (cfg.domain_kind != "ellipse" && cfg.domain_kind != "curve")
    say("domain.kind must be 'ellipse' or 'curve', got '" + cfg.domain_kind +
        "'");
  if (cfg.domain_kind == "ellipse") {
    if (!(cfg.ellipse_a > 0.0) || !(cfg.ellipse_b > 0.0))
      say("domain.a and domain.b must be positive");
  } else if (cfg.domain_kind == "curve") {
    if (cfg.curve_file.empty())
      say("domain.curve_file is required when domain.kind = curve");
    else if (!std::ifstream(cfg.curve_file))
      say("domain.curve_file is not readable: " + cfg.curve_file);
  }
  if (cfg.geometry_samples < 512 || cfg.geometry_samples % 2 != 0)
    say("geometry.samples must be an even number >= 512");
  if (!(cfg.h_min > 0.0) || !(cfg.h_max >= cfg.h_min) || cfg.h_max >= 1.0)
    say("hgrid must satisfy 0 < h_min <= h_max < 1");
  if (cfg.h_count < 1) say("hgrid.count must be >= 1");
  if (cfg.h_count == 1 && cfg.h_min != cfg.h_max)
    say("hgrid.count = 1 requires h_min = h_max");
  if (cfg.h_count > 1 && cfg.h_min == cfg.h_max)
    say("hgrid.count > 1 requires h_min < h_max");
  if (cfg.h_spacing != "log_h_quarter" && cfg.h_spacing != "linear_inv_h")
    say("hgrid.spacing must be 'log_h_quarter' or 'linear_inv_h', got '" +
        cfg.h_spacing + "'");
  if (cfg.oracle_effective1d &&
      (cfg.h_min > kEffHMax || cfg.h_max < kEffHMin))
    say("h grid lies entirely outside the effective oracle validity window [" +
        detail::fmt(kEffHMin) + ", " + detail::fmt(kEffHMax) + "]");
  if (cfg.oracle_boundary2d) {
    const double hb_lo = std::sqrt(cfg.h_min), hb_hi = std::sqrt(cfg.h_max);
    if (hb_lo > kB2dHbarMax || hb_hi < kB2dHbarMin)
      say("h grid lies entirely outside the 2D oracle validity window hbar in "
          "[" +
          detail::fmt(kB2dHbarMin) + ", " + detail::fmt(kB2dHbarMax) + "]");
  }
  if (cfg.boundary2d_ppw < 12 || cfg.boundary2d_ppw > 64)
    say("oracles.boundary2d_ppw must be in [12, 64]");
  if (cfg.boundary2d_ntau < 32 || cfg.boundary2d_ntau > 512)
    say("oracles.boundary2d_ntau must be in [32, 512]");
  if (cfg.out_dir.empty()) say("output.dir must not be empty");
  return bad;
}

// h grid ordered by increasing 1/h (decreasing h).
inline std::vector<double> make_h_grid(const RunConfig& cfg) {
  std::vector<double> hs;
  const int n = cfg.h_count;
  if (n == 1) {
    hs.push_back(cfg.h_min);
    return hs;
  }
  hs.reserve(n);
  if (cfg.h_spacing == "log_h_quarter") {
    // uniform in log x, x = h^{-1/4}
    const double u0 = std::log(std::pow(cfg.h_max, -0.25));
    const double u1 = std::log(std::pow(cfg.h_min, -0.25));
    for (int i = 0; i < n; ++i) {
      const double u = u0 + (u1 - u0) * i / (n - 1);
      hs.push_back(std::exp(-4.0 * u));
    }
  } else {  // linear_inv_h
    const double r0 = 1.0 / cfg.h_max, r1 = 1.0 / cfg.h_min;
    for (int i = 0; i < n; ++i)
      hs.push_back(1.0 / (r0 + (r1 - r0) * i / (n - 1)));
  }
  hs.front() = cfg.h_max;
  hs.back() = cfg.h_min;
  return hs;
}

// ---------------------------------------------------------------------------
// World construction
// ---------------------------------------------------------------------------

inline curve::BoundaryCurve make_curve(const RunConfig& cfg,
                                       double scale = 1.0) {
  if (cfg.domain_kind == "ellipse")
    return curve::BoundaryCurve::ellipse(scale * cfg.ellipse_a,
                                         scale * cfg.ellipse_b);
  std::ifstream f(cfg.curve_file);
  if (!f) throw ConfigError("cannot read curve file: " + cfg.curve_file);
  std::vector<double> xs, ys;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    double x, y;
    if (!(ls >> x >> y))
      throw ConfigError(cfg.curve_file + ":" + std::to_string(lineno) +
                        ": expected two numbers per line");
    xs.push_back(scale * x);
    ys.push_back(scale * y);
  }
  return curve::BoundaryCurve::sampled(std::move(xs), std::move(ys));
}

// Band constants with the configured normalization.  The environment
// variable MAGSPLIT_C1_OVERRIDE, when set, replaces the curvature-coupling
// constant c1 wholesale (a fault-injection hook for the validation suite:
// the band curvature identity mu2 = 6 c1 sqrt(theta0) must then fail).
inline degennes::DeGennesConstants compute_constants(
    const RunConfig& cfg, const degennes::HalfLineGrid& g,
    std::string* source = nullptr) {
  degennes::DeGennesConstants dg = degennes::constants(g);
  std::string src = "computed";
  if (cfg.strict_paper_signs) {
    dg.c1 = dg.u0 * dg.u0 / 6.0;
    src = "strict_printed_normalization";
  }
  if (const char* s = std::getenv("MAGSPLIT_C1_OVERRIDE")) {
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0' || !std::isfinite(v))
      throw ConfigError(std::string("MAGSPLIT_C1_OVERRIDE is not a number: ") +
                        s);
    dg.c1 = v;
    src = "environment_override";
  }
  if (source) *source = src;
  return dg;
}

struct World {
  degennes::HalfLineGrid grid;
  degennes::DeGennesConstants dg;
  std::string c1_source;
  curve::ArcLengthTable tab;
  curve::WellData wells;
  curve::FluxConstant fc;
  effective::EffectivePotential pot;
  effective::AgmonData agmon;
  splitting::SplittingInputs in;
};

inline World build_world(const RunConfig& cfg) {
  World w;
  w.grid = degennes::HalfLineGrid{cfg.degennes_t_max, cfg.degennes_n};
  w.dg = compute_constants(cfg, w.grid, &w.c1_source);
  const curve::BoundaryCurve bc = make_curve(cfg);
  w.tab = curve::reparametrize(bc, cfg.geometry_samples);
  w.wells = curve::locate_wells(w.tab);
  w.fc = curve::flux_constant(bc);
  w.pot = effective::potential(w.tab, w.wells, w.dg);
  w.agmon = effective::agmon_data(w.pot);
  w.in = splitting::assemble(w.dg, w.fc, w.pot, w.agmon, cfg.alpha0);
  return w;
}

// ---------------------------------------------------------------------------
// Check rows (constants command and validation suite)
// ---------------------------------------------------------------------------

struct CheckRow {
  std::string module;
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
  std::string note;
};

inline void add_check(std::vector<CheckRow>& rows, const std::string& module,
                      const std::string& name, double value, double limit,
                      const std::string& note = "") {
  rows.push_back(CheckRow{module, name, value, limit,
                          std::isfinite(value) && value <= limit, note});
}

// Identity checks tying the independently computed band constants together.
inline std::vector<CheckRow> degennes_checks(
    const degennes::HalfLineGrid& g, const degennes::DeGennesConstants& dg,
    const std::string& c1_source) {
  std::vector<CheckRow> rows;
  const std::string note =
      c1_source == "computed" ? "" : "c1 source: " + c1_source;
  add_check(rows, "degennes", "xi0_sq_matches_theta0",
            std::fabs(dg.xi0 * dg.xi0 - dg.theta0), 1e-6);
  add_check(rows, "degennes", "band_at_zero_frequency",
            std::fabs(degennes::mu_band(g, 0.0) - 1.0), 1e-5);
  const auto mr = degennes::moment_residuals(g, dg.xi0, 0.5 * dg.mu2);
  add_check(rows, "degennes", "first_moment_vanishes", mr.r1, 1e-6);
  add_check(rows, "degennes", "curvature_moment_identity", mr.r2, 1e-3);
  add_check(rows, "degennes", "mu2_matches_6c1_sqrt_theta0",
            std::fabs(dg.mu2 - 6.0 * dg.c1 * std::sqrt(dg.theta0)) / dg.mu2,
            1e-3, note);
  const auto c2r = degennes::c2(g, dg.xi0, dg.theta0);
  add_check(rows, "degennes", "c2_matches_half_mu2",
            std::fabs(c2r.c2 - 0.5 * dg.mu2) / (0.5 * dg.mu2), 1e-3);
  return rows;
}

inline std::vector<CheckRow> geometry_checks(const RunConfig& cfg,
                                             const World& w) {
  std::vector<CheckRow> rows;
  double turn = 0.0;
  for (double k : w.tab.kappa) turn += k;
  turn *= w.tab.ds();
  add_check(rows, "geometry", "turning_number_2pi",
            std::fabs(turn - 2.0 * M_PI), 1e-6);
  add_check(rows, "geometry", "gamma0_matches_area_over_2L",
            std::fabs(w.fc.gamma0 - w.fc.area / (2.0 * w.tab.L)) /
                w.fc.gamma0,
            1e-12);
  add_check(rows, "geometry", "curvature_max_at_well",
            std::fabs(w.tab.kappa_at(w.wells.s_r) - w.wells.kappa_max),
            1e-10);
  if (w.wells.symmetric)
    add_check(rows, "geometry", "wells_mirror_symmetric",
              std::fabs(w.wells.s_l + w.wells.s_r), 1e-9 * w.tab.L);
  else
    add_check(rows, "geometry", "wells_mirror_symmetric", 0.0, 1.0,
              "skipped: wells are not mirror images");
  add_check(rows, "geometry", "curvature_second_derivative_positive",
            w.wells.k2 > 0.0 ? 0.0 : 1.0, 0.0);
  // Scale covariance: doubling the domain doubles L, s_r and gamma0,
  // quadruples the area, and halves the curvature extrema.
  {
    const curve::BoundaryCurve b2 = make_curve(cfg, 2.0);
    const curve::ArcLengthTable t2 =
        curve::reparametrize(b2, cfg.geometry_samples);
    const curve::WellData w2 = curve::locate_wells(t2);
    const curve::FluxConstant f2 = curve::flux_constant(b2);
    double dev = std::fabs(t2.L - 2.0 * w.tab.L) / (2.0 * w.tab.L);
    dev = std::max(dev,
                   std::fabs(f2.area - 4.0 * w.fc.area) / (4.0 * w.fc.area));
    dev = std::max(
        dev, std::fabs(f2.gamma0 - 2.0 * w.fc.gamma0) / (2.0 * w.fc.gamma0));
    dev = std::max(dev, std::fabs(w2.kappa_max - 0.5 * w.wells.kappa_max) /
                            (0.5 * w.wells.kappa_max));
    add_check(rows, "geometry", "scaling_covariance_global", dev, 1e-9);
    add_check(rows, "geometry", "scaling_covariance_wells",
              std::fabs(w2.s_r - 2.0 * w.wells.s_r) /
                  (2.0 * std::fabs(w.wells.s_r)),
              5e-6);
  }
  return rows;
}

inline std::vector<CheckRow> effective_checks(const World& w) {
  std::vector<CheckRow> rows;
  add_check(rows, "effective", "potential_vanishes_at_wells",
            std::max(w.pot.at(w.wells.s_r), w.pot.at(w.wells.s_l)), 1e-12);
  double vmin = 0.0;
  for (double v : w.pot.V) vmin = std::min(vmin, v);
  add_check(rows, "effective", "potential_nonnegative", -vmin, 0.0);
  const double g_analytic =
      std::sqrt(w.dg.c1 * w.wells.k2 / w.dg.mu2);
  add_check(rows, "effective", "well_frequency_matches_curvature",
            std::fabs(w.pot.g_r - g_analytic) / g_analytic, 1e-3);
  add_check(rows, "effective", "actions_positive",
            (w.agmon.S_u > 0.0 && w.agmon.S_d > 0.0) ? 0.0 : 1.0, 0.0);
  const auto ev = effective::effective_eigs(w.pot, 0.04, 0.0, 2);
  add_check(rows, "effective", "double_well_pair_ordered",
            (0.0 < ev[0] && ev[0] < ev[1]) ? 0.0 : 1.0, 0.0);
  return rows;
}

inline std::vector<CheckRow> splitting_checks(const World& w,
                                              const std::vector<double>& hs) {
  std::vector<CheckRow> rows;
  bool valid = true;
  std::string vnote;
  try {
    splitting::validate(w.in);
  } catch (const std::exception& e) {
    valid = false;
    vnote = e.what();
  }
  add_check(rows, "splitting", "inputs_validate", valid ? 0.0 : 1.0, 0.0,
            vnote);
  if (!valid) return rows;
  if (w.wells.symmetric)
    add_check(rows, "splitting", "prefactors_match_for_symmetric_arcs",
              std::fabs(w.in.A_u - w.in.A_d) / w.in.A_u, 1e-6);
  double worst_env = 0.0, worst_forms = 0.0;
  for (double h : hs) {
    const auto gap = splitting::gap_formula(w.in, h);
    const auto env = splitting::envelope(w.in, h);
    if (gap.sign > 0.0 && env.sign > 0.0)
      worst_env = std::max(worst_env, gap.log_mag - env.log_mag);
    const auto cenv = splitting::conjecture_envelope(w.in, h);
    worst_forms =
        std::max(worst_forms, std::fabs(env.log_mag - cenv.log_mag));
  }
  add_check(rows, "splitting", "gap_below_envelope", worst_env, 1e-12);
  add_check(rows, "splitting", "theorem_and_conjecture_forms_agree",
            worst_forms, 1e-10);
  return rows;
}

inline std::vector<CheckRow> boundary2d_checks(const World& w) {
  std::vector<CheckRow> rows;
  const double hbar = 0.3;
  const int ns = std::max(
      boundary2d::tangential_points(2.0 * w.tab.L, hbar, 12),
      boundary2d::detail::required_ns(2.0 * w.tab.L, hbar));
  boundary2d::TubularGrid grid{ns, 48, hbar, 12.0, 0.1};
  const auto op = boundary2d::assemble(w.tab, w.wells, grid, w.fc.gamma0);
  using SpMat = boundary2d::SpMat;
  SpMat adj = SpMat(op.K.adjoint());
  const double herm = SpMat(op.K - adj).norm() / op.K.norm();
  add_check(rows, "boundary2d", "assembly_hermitian", herm, 1e-12);
  add_check(rows, "boundary2d", "mass_positive",
            op.M.minCoeff() > 0.0 ? 0.0 : 1.0, 0.0);
  add_check(rows, "boundary2d", "metric_weight_in_range",
            std::max(0.0, 0.05 - op.a_min) +
                std::max(0.0, op.a_max - 1.0 - 1e-12),
            0.0);
  const auto op2 = boundary2d::assemble(w.tab, w.wells, grid, w.fc.gamma0);
  add_check(rows, "boundary2d", "assembly_deterministic",
            SpMat(op.K - op2.K).norm(), 0.0);
  return rows;
}

inline std::vector<CheckRow> cli_checks(const RunConfig& cfg) {
  std::vector<CheckRow> rows;
  {
    std::istringstream is(serialize_config(RunConfig{}));
    add_check(rows, "cli", "config_round_trip_defaults",
              parse_config(is) == RunConfig{} ? 0.0 : 1.0, 0.0);
  }
  {
    std::istringstream is(serialize_config(cfg));
    add_check(rows, "cli", "config_round_trip_current",
              parse_config(is) == cfg ? 0.0 : 1.0, 0.0);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Reporting helpers
// ---------------------------------------------------------------------------

inline void print_check_table(std::ostream& os,
                              const std::vector<CheckRow>& rows) {
  os << "# module,check,value,limit,status,note\n";
  for (const auto& r : rows)
    os << r.module << ',' << r.name << ',' << detail::fmt(r.value, "%.6g")
       << ',' << detail::fmt(r.limit, "%.6g") << ','
       << (r.pass ? "ok" : "FAIL") << ',' << detail::sanitize_note(r.note)
       << "\n";
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.pass ? 0 : 1;
  os << "# summary: " << rows.size() << " checks, " << rows.size() - failed
     << " ok, " << failed << " failed\n";
}

inline nlohmann::json checks_json(const std::vector<CheckRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& r : rows) {
    arr.push_back({{"module", r.module},
                   {"check", r.name},
                   {"value", r.value},
                   {"limit", r.limit},
                   {"pass", r.pass},
                   {"note", r.note}});
    failed += r.pass ? 0 : 1;
  }
  return nlohmann::json{{"checks", arr}, {"n_failed", failed}};
}

inline int finish_checks(const std::vector<CheckRow>& rows, bool json_out,
                         const nlohmann::json& extra,
                         const std::string& fail_prefix) {
  std::size_t failed = 0;
  std::string first_fail;
  for (const auto& r : rows)
    if (!r.pass) {
      ++failed;
      if (first_fail.empty()) first_fail = r.module + "." + r.name;
    }
  if (json_out) {
    nlohmann::json j = checks_json(rows);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = *it;
    std::cout << j.dump(2) << "\n";
  } else {
    print_check_table(std::cout, rows);
  }
  if (failed > 0) {
    std::cerr << fail_prefix << ": check failed: " << first_fail << " ("
              << failed << " of " << rows.size() << " checks failed)\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// constants
// ---------------------------------------------------------------------------

inline int run_constants(const RunConfig& cfg, int grid_n_override,
                         bool json_out) {
  const degennes::HalfLineGrid g{
      cfg.degennes_t_max,
      grid_n_override > 0 ? grid_n_override : cfg.degennes_n};
  std::vector<CheckRow> rows;
  degennes::DeGennesConstants dg{};
  std::string c1_source = "computed";
  bool computed = false;
  try {
    dg = compute_constants(cfg, g, &c1_source);
    computed = true;
  } catch (const std::invalid_argument& e) {
    // Resolution refusal from the half-line grid: report it as a named,
    // failed check rather than computing constants that would be silently
    // wrong at this resolution.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rows.push_back(
        CheckRow{"degennes", "grid_resolution", nan, nan, false, e.what()});
  }
  if (computed) rows = degennes_checks(g, dg, c1_source);

  nlohmann::json extra{
      {"grid", {{"t_max", g.t_max}, {"n", g.n}}},
  };
  if (computed) {
    extra["constants"] = {{"theta0", dg.theta0}, {"xi0", dg.xi0},
                          {"u0", dg.u0},         {"c1", dg.c1},
                          {"mu2", dg.mu2},       {"c1_source", c1_source}};
    if (!json_out) {
      std::cout << "band constants (t_max = " << detail::fmt(g.t_max)
                << ", n = " << g.n << ")\n"
                << "  theta0 = " << detail::fmt(dg.theta0) << "\n"
                << "  xi0    = " << detail::fmt(dg.xi0) << "\n"
                << "  u0     = " << detail::fmt(dg.u0) << "\n"
                << "  c1     = " << detail::fmt(dg.c1)
                << (c1_source == "computed" ? "" : "  (" + c1_source + ")")
                << "\n"
                << "  mu2    = " << detail::fmt(dg.mu2) << "\n\n";
    }
  }
  return finish_checks(rows, json_out, extra, "constants");
}

// ---------------------------------------------------------------------------
// geometry
// ---------------------------------------------------------------------------

inline int run_geometry(const RunConfig& cfg, bool json_out) {
  const World w = build_world(cfg);
  double turn = 0.0;
  for (double k : w.tab.kappa) turn += k;
  turn *= w.tab.ds();
  if (json_out) {
    nlohmann::json j{
        {"domain",
         {{"kind", cfg.domain_kind},
          {"a", cfg.ellipse_a},
          {"b", cfg.ellipse_b},
          {"curve_file", cfg.curve_file},
          {"samples", cfg.geometry_samples}}},
        {"boundary",
         {{"L", w.tab.L},
          {"area", w.fc.area},
          {"gamma0", w.fc.gamma0},
          {"turning_number", turn},
          {"kappa_max", w.wells.kappa_max},
          {"kappa_min", w.wells.kappa_min},
          {"s_r", w.wells.s_r},
          {"s_l", w.wells.s_l},
          {"k2", w.wells.k2},
          {"symmetric", w.wells.symmetric}}},
        {"tunneling",
         {{"S_u", w.in.S_u},
          {"S_d", w.in.S_d},
          {"g", w.in.g},
          {"A_u", w.in.A_u},
          {"A_d", w.in.A_d},
          {"V0", w.in.V0},
          {"VL", w.in.VL}}},
        {"constants", {{"c1_source", w.c1_source}}}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  using detail::fmt;
  std::cout << "boundary geometry (" << cfg.domain_kind;
  if (cfg.domain_kind == "ellipse")
    std::cout << " a = " << fmt(cfg.ellipse_a) << ", b = "
              << fmt(cfg.ellipse_b);
  else
    std::cout << " " << cfg.curve_file;
  std::cout << "; samples = " << cfg.geometry_samples << ")\n"
            << "  L (half-perimeter)   = " << fmt(w.tab.L) << "\n"
            << "  enclosed area        = " << fmt(w.fc.area) << "\n"
            << "  gamma0 = area / (2L) = " << fmt(w.fc.gamma0) << "\n"
            << "  turning number       = " << fmt(turn) << "  (2 pi = "
            << fmt(2.0 * M_PI) << ")\n"
            << "  kappa max / min      = " << fmt(w.wells.kappa_max) << " / "
            << fmt(w.wells.kappa_min) << "\n"
            << "  wells s_r, s_l       = " << fmt(w.wells.s_r) << ", "
            << fmt(w.wells.s_l) << "\n"
            << "  k2 = -kappa''(s_r)   = " << fmt(w.wells.k2) << "\n"
            << "tunneling data of the effective double well\n"
            << "  actions S_u, S_d     = " << fmt(w.in.S_u) << ", "
            << fmt(w.in.S_d) << "\n"
            << "  well frequency g     = " << fmt(w.in.g) << "\n"
            << "  prefactors A_u, A_d  = " << fmt(w.in.A_u) << ", "
            << fmt(w.in.A_d) << "\n"
            << "  barriers V0, VL      = " << fmt(w.in.V0) << ", "
            << fmt(w.in.VL) << "\n";
  if (w.c1_source != "computed")
    std::cout << "  note: c1 source = " << w.c1_source << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep / fit-alpha0
// ---------------------------------------------------------------------------

struct SweepRowOut {
  double h = 0.0, inv_h = 0.0, hbar = 0.0;
  double gap_formula = 0.0, envelope = 0.0, phase = 0.0;
  double l1 = std::numeric_limits<double>::quiet_NaN();
  double l2 = std::numeric_limits<double>::quiet_NaN();
  double gap_eff = std::numeric_limits<double>::quiet_NaN();
  double gap_eff_phys = std::numeric_limits<double>::quiet_NaN();
  double nu1 = std::numeric_limits<double>::quiet_NaN();
  double nu2 = std::numeric_limits<double>::quiet_NaN();
  double gap_2d = std::numeric_limits<double>::quiet_NaN();
  double gap_2d_phys = std::numeric_limits<double>::quiet_NaN();
  std::string reason;
};

// Evaluate the formula and the enabled oracles on the grid.  Failures are
// per-row: the offending columns become NaN and the reason column names the
// guard or error.  Both oracle gaps are also given in the physical
// normalization of the gap formula (effective: h^{3/2} * gap; 2D: h * gap).
inline std::vector<SweepRowOut> compute_rows(const World& w,
                                             const RunConfig& cfg,
                                             const std::vector<double>& hs) {
  std::vector<SweepRowOut> rows;
  rows.reserve(hs.size());
  const auto pred = splitting::predict(w.in, hs);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    SweepRowOut r;
    r.h = hs[i];
    r.inv_h = 1.0 / hs[i];
    r.hbar = std::sqrt(hs[i]);
    r.gap_formula = pred.gap_formula[i].value;
    r.envelope = pred.envelope[i].value;
    r.phase = pred.phase_mod_2pi[i];
    auto note = [&](const std::string& s) {
      if (!r.reason.empty()) r.reason += ';';
      r.reason += detail::sanitize_note(s);
    };
    if (cfg.oracle_effective1d) {
      if (r.h < kEffHMin || r.h > kEffHMax) {
        note("effective: h outside validity window [" +
             detail::fmt(kEffHMin) + ", " + detail::fmt(kEffHMax) + "]");
      } else {
        try {
          // The flux rate enters the circle operator only through theta mod
          // pi/L (an integer shift of the momentum ladder), so reduce it to
          // the fundamental cell to keep the Fourier window centered.
          double theta =
              w.in.gamma0 / r.h - w.in.xi0 / std::sqrt(r.h) - w.in.alpha0;
          theta -= (M_PI / w.in.L) * std::round(theta * w.in.L / M_PI);
          const auto ev = effective::effective_eigs(w.pot, r.h, theta, 2);
          r.l1 = ev[0];
          r.l2 = ev[1];
          r.gap_eff = ev[1] - ev[0];
          r.gap_eff_phys = std::pow(r.h, 1.5) * r.gap_eff;
        } catch (const std::exception& e) {
          note(std::string("effective: ") + e.what());
        }
      }
    }
    if (cfg.oracle_boundary2d) {
      if (r.hbar < kB2dHbarMin || r.hbar > kB2dHbarMax) {
        note("boundary2d: hbar outside validity window [" +
             detail::fmt(kB2dHbarMin) + ", " + detail::fmt(kB2dHbarMax) +
             "]");
      } else {
        try {
          if (cfg.boundary2d_extrapolate) {
            const auto ep = boundary2d::solve_extrapolated(
                w.tab, w.wells, r.hbar, w.fc.gamma0,
                boundary2d::WellVariant::two_well, cfg.boundary2d_ppw,
                cfg.boundary2d_ntau);
            r.nu1 = ep.nu1;
            r.nu2 = ep.nu2;
          } else {
            boundary2d::TubularGrid grid{
                boundary2d::tangential_points(2.0 * w.tab.L, r.hbar,
                                              cfg.boundary2d_ppw),
                cfg.boundary2d_ntau, r.hbar, 12.0, 0.1};
            const auto op =
                boundary2d::assemble(w.tab, w.wells, grid, w.fc.gamma0);
            const auto pr = boundary2d::lowest_pair(op);
            r.nu1 = pr.nu1;
            r.nu2 = pr.nu2;
          }
          r.gap_2d = r.nu2 - r.nu1;
          r.gap_2d_phys = r.h * r.gap_2d;
        } catch (const std::exception& e) {
          note(std::string("boundary2d: ") + e.what());
        }
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os,
                            const std::vector<SweepRowOut>& rows) {
  os << "# rows ordered by increasing inv_h; physical normalizations: "
        "gap_eff_phys = h^(3/2) gap_eff, gap_2d_phys = h gap_2d\n";
  os << "inv_h,h,hbar,gap_formula,envelope,phase_mod_2pi,lambda1_eff,"
        "lambda2_eff,gap_eff,gap_eff_phys,nu1_2d,nu2_2d,gap_2d,gap_2d_phys,"
        "reason\n";
  using detail::fmt;
  for (const auto& r : rows)
    os << fmt(r.inv_h) << ',' << fmt(r.h) << ',' << fmt(r.hbar) << ','
       << fmt(r.gap_formula) << ',' << fmt(r.envelope) << ',' << fmt(r.phase)
       << ',' << fmt(r.l1) << ',' << fmt(r.l2) << ',' << fmt(r.gap_eff) << ','
       << fmt(r.gap_eff_phys) << ',' << fmt(r.nu1) << ',' << fmt(r.nu2) << ','
       << fmt(r.gap_2d) << ',' << fmt(r.gap_2d_phys) << ',' << r.reason
       << "\n";
}

struct OracleSummary {
  std::string name;
  bool enabled = false;
  std::size_t n_rows = 0, n_ok = 0;
  bool compared = false;
  splitting::CompareResult cmp;
};

inline OracleSummary summarize_oracle(
    const std::string& name, bool enabled,
    const splitting::SplittingPrediction& pred,
    const std::vector<double>& gap_phys) {
  OracleSummary s;
  s.name = name;
  s.enabled = enabled;
  s.n_rows = gap_phys.size();
  if (!enabled) return s;
  for (double g : gap_phys)
    if (std::isfinite(g) && g > 0.0) ++s.n_ok;
  if (s.n_ok >= 3 && pred.h.size() >= 3) {
    s.cmp = splitting::compare(pred, gap_phys);
    s.compared = s.cmp.n_used >= 3;
  }
  return s;
}

inline nlohmann::json oracle_summary_json(const OracleSummary& s) {
  nlohmann::json j{{"enabled", s.enabled},
                   {"rows", s.n_rows},
                   {"rows_usable", s.n_ok}};
  if (s.compared) {
    j["slope_numeric"] = s.cmp.slope_numeric;
    j["slope_formula"] = s.cmp.slope_formula;
    j["zeros_numeric"] = s.cmp.zeros_numeric;
    j["zeros_formula"] = s.cmp.zeros_formula;
    j["mean_abs_diff_log"] = s.cmp.mean_abs_diff_log;
    j["n_used"] = s.cmp.n_used;
  }
  return j;
}

inline void print_oracle_summary(std::ostream& os, const OracleSummary& s,
                                 const World& w) {
  if (!s.enabled) {
    os << s.name << " oracle: disabled\n";
    return;
  }
  os << s.name << " oracle: " << s.n_ok << "/" << s.n_rows
     << " rows usable\n";
  if (!s.compared) {
    os << "  (need >= 3 usable rows away from gap zeros for slope and "
          "spacing summaries)\n";
    return;
  }
  using detail::fmt;
  os << "  -log(gap) slope vs h^(-1/4): numeric "
     << fmt(s.cmp.slope_numeric, "%.6g") << ", formula "
     << fmt(s.cmp.slope_formula, "%.6g") << " (action S = "
     << fmt(w.in.S_u < w.in.S_d ? w.in.S_u : w.in.S_d, "%.6g") << ")\n";
  const auto& zn = s.cmp.zeros_numeric;
  if (zn.size() >= 2) {
    double mean = 0.0;
    for (std::size_t i = 1; i < zn.size(); ++i) mean += zn[i] - zn[i - 1];
    mean /= static_cast<double>(zn.size() - 1);
    os << "  gap minima in 1/h: " << zn.size() << " found, mean spacing "
       << fmt(mean, "%.6g") << " (asymptotic spacing pi/(L gamma0) = "
       << fmt(M_PI / (w.in.L * w.in.gamma0), "%.6g") << ")\n";
  } else {
    os << "  gap minima in 1/h: " << zn.size()
       << " found (need >= 2 for a spacing estimate)\n";
  }
}

inline int run_fit_common(const World& w, const RunConfig& cfg,
                          const std::vector<double>& hs,
                          const std::vector<SweepRowOut>& rows, bool json_out,
                          nlohmann::json* json_sink) {
  const bool use_2d = cfg.oracle_boundary2d;
  std::vector<double> gap_phys(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    gap_phys[i] = use_2d ? rows[i].gap_2d_phys : rows[i].gap_eff_phys;
  const char* oracle = use_2d ? "boundary2d" : "effective";
  try {
    const auto fit = splitting::fit_alpha0(w.in, hs, gap_phys);
    if (json_sink) {
      (*json_sink)["fit_alpha0"] = {
          {"oracle", oracle},          {"alpha0", fit.alpha0},
          {"intercept", fit.intercept}, {"rms_residual", fit.rms_residual},
          {"n_used", fit.n_used},       {"n_excluded", fit.n_excluded}};
    }
    if (!json_out) {
      using detail::fmt;
      std::cout << "fit-alpha0 (" << oracle << " oracle)\n"
                << "  alpha0       = " << fmt(fit.alpha0)
                << "  (reduced to [0, pi/L), L = " << fmt(w.in.L, "%.6g")
                << ")\n"
                << "  intercept    = " << fmt(fit.intercept, "%.6g") << "\n"
                << "  rms residual = " << fmt(fit.rms_residual, "%.6g")
                << "\n"
                << "  samples used = " << fit.n_used << " of " << hs.size()
                << " (" << fit.n_excluded
                << " excluded near predicted zeros or non-positive)\n";
    }
    return kExitOk;
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()).find("insufficient data") != std::string::npos) {
      std::cerr << "fit-alpha0: " << e.what() << "\n";
      return kExitCheckFailed;
    }
    throw;
  }
}

inline int run_sweep(const RunConfig& cfg, bool json_out, bool do_fit) {
  const World w = build_world(cfg);
  const std::vector<double> hs = make_h_grid(cfg);
  const auto pred = splitting::predict(w.in, hs);
  const auto rows = compute_rows(w, cfg, hs);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory '" + cfg.out_dir +
                      "': " + ec.message());
  const std::string csv_path =
      (fs::path(cfg.out_dir) / "sweep.csv").string();
  const std::string cfg_path =
      (fs::path(cfg.out_dir) / "resolved_config.cfg").string();
  {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw ConfigError("cannot write " + csv_path);
    write_sweep_csv(csv, rows);
  }
  {
    std::ofstream rc(cfg_path, std::ios::binary);
    if (!rc) throw ConfigError("cannot write " + cfg_path);
    rc << serialize_config(cfg);
  }

  std::vector<double> gap_eff_phys(rows.size()), gap_2d_phys(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    gap_eff_phys[i] = rows[i].gap_eff_phys;
    gap_2d_phys[i] = rows[i].gap_2d_phys;
  }
  const auto se = summarize_oracle("effective", cfg.oracle_effective1d, pred,
                                   gap_eff_phys);
  const auto sb = summarize_oracle("boundary2d", cfg.oracle_boundary2d, pred,
                                   gap_2d_phys);

  nlohmann::json j{
      {"h_grid", hs},
      {"files", {{"csv", csv_path}, {"resolved_config", cfg_path}}},
      {"summary",
       {{"effective", oracle_summary_json(se)},
        {"boundary2d", oracle_summary_json(sb)},
        {"action_S", w.in.S_u < w.in.S_d ? w.in.S_u : w.in.S_d},
        {"asymptotic_zero_spacing", M_PI / (w.in.L * w.in.gamma0)}}}};
  if (json_out) {
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : rows)
      jrows.push_back({{"inv_h", r.inv_h},
                       {"h", r.h},
                       {"hbar", r.hbar},
                       {"gap_formula", r.gap_formula},
                       {"envelope", r.envelope},
                       {"phase_mod_2pi", r.phase},
                       {"lambda1_eff", r.l1},
                       {"lambda2_eff", r.l2},
                       {"gap_eff", r.gap_eff},
                       {"gap_eff_phys", r.gap_eff_phys},
                       {"nu1_2d", r.nu1},
                       {"nu2_2d", r.nu2},
                       {"gap_2d", r.gap_2d},
                       {"gap_2d_phys", r.gap_2d_phys},
                       {"reason", r.reason}});
    j["rows"] = jrows;
  }

  int fit_rc = kExitOk;
  if (do_fit) {
    if (!cfg.oracle_effective1d && !cfg.oracle_boundary2d) {
      std::cerr << "sweep --fit-alpha0 requires an enabled oracle\n";
      return kExitUsage;
    }
    fit_rc = run_fit_common(w, cfg, hs, rows, json_out, &j);
  }

  if (json_out) {
    std::cout << j.dump(2) << "\n";
  } else {
    using detail::fmt;
    std::cout << "sweep: " << hs.size() << " h points, h in ["
              << fmt(cfg.h_min, "%.6g") << ", " << fmt(cfg.h_max, "%.6g")
              << "] (" << cfg.h_spacing << ")\n"
              << "formula: S = " << fmt(w.in.S_u < w.in.S_d ? w.in.S_u
                                                            : w.in.S_d,
                                        "%.6g")
              << ", L = " << fmt(w.in.L, "%.6g") << ", gamma0 = "
              << fmt(w.in.gamma0, "%.6g") << ", pi/(L gamma0) = "
              << fmt(M_PI / (w.in.L * w.in.gamma0), "%.6g") << "\n"
              << "wrote: " << csv_path << "\n"
              << "wrote: " << cfg_path << "\n";
    print_oracle_summary(std::cout, se, w);
    print_oracle_summary(std::cout, sb, w);
    if (w.c1_source != "computed")
      std::cout << "note: c1 source = " << w.c1_source << "\n";
  }
  if (fit_rc != kExitOk) return fit_rc;

  // Per-row failures are tolerated (NaN rows carry their reason); an
  // enabled oracle that produced no usable row at all is a systemic
  // numerical failure.
  for (const auto* s : {&se, &sb}) {
    if (s->enabled && s->n_rows > 0 && s->n_ok == 0) {
      std::cerr << "sweep: " << s->name
                << " oracle produced no usable rows (see reason column in "
                << csv_path << ")\n";
      return kExitNumerical;
    }
  }
  return kExitOk;
}

inline int run_fit_alpha0(const RunConfig& cfg, bool json_out) {
  if (!cfg.oracle_effective1d && !cfg.oracle_boundary2d) {
    std::cerr << "fit-alpha0 requires an enabled oracle "
                 "(oracles.effective1d or oracles.boundary2d)\n";
    return kExitUsage;
  }
  const World w = build_world(cfg);
  const std::vector<double> hs = make_h_grid(cfg);
  const auto rows = compute_rows(w, cfg, hs);
  nlohmann::json j;
  const int rc = run_fit_common(w, cfg, hs, rows, json_out, &j);
  if (json_out && rc == kExitOk) std::cout << j.dump(2) << "\n";
  return rc;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

inline int run_validate(const RunConfig& cfg, const std::string& only,
                        bool json_out) {
  static const std::vector<std::string> kModules = {
      "degennes", "geometry", "effective", "splitting", "boundary2d", "cli"};
  if (!only.empty() &&
      std::find(kModules.begin(), kModules.end(), only) == kModules.end()) {
    std::cerr << "validate: unknown module '" << only
              << "' (expected one of degennes, geometry, effective, "
                 "splitting, boundary2d, cli)\n";
    return kExitUsage;
  }
  auto wanted = [&](const std::string& m) { return only.empty() || only == m; };

  std::vector<CheckRow> rows;
  std::optional<World> world;
  auto get_world = [&]() -> const World& {
    if (!world) world = build_world(cfg);
    return *world;
  };

  if (wanted("degennes")) {
    const degennes::HalfLineGrid g{cfg.degennes_t_max, cfg.degennes_n};
    std::string src;
    const auto dg = compute_constants(cfg, g, &src);
    auto r = degennes_checks(g, dg, src);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (wanted("geometry")) {
    auto r = geometry_checks(cfg, get_world());
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (wanted("effective")) {
    auto r = effective_checks(get_world());
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (wanted("splitting")) {
    auto r = splitting_checks(get_world(), make_h_grid(cfg));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (wanted("boundary2d")) {
    auto r = boundary2d_checks(get_world());
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (wanted("cli")) {
    auto r = cli_checks(cfg);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return finish_checks(rows, json_out, nlohmann::json::object(), "validate");
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

inline int cli_main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  CLI::App app{
      "magsplit: magnetic boundary tunneling — band constants, geometry, "
      "the eigenvalue-splitting formula, and its numerical cross-checks"};
  app.require_subcommand(1);
  app.fallthrough(true);  // accept global flags after the subcommand name

  std::string config_path, out_override, only_module;
  bool json_out = false, strict = false;
  app.add_option("--config", config_path,
                 "configuration file (key = value with [sections])");
  app.add_option("--out", out_override,
                 "output directory (overrides [output] dir)");
  app.add_flag("--json", json_out, "emit machine-readable JSON on stdout");
  app.add_flag("--strict-paper-signs", strict,
               "use the alternative printed normalization c1 = u0^2/6; the "
               "band curvature identity check then fails by design");

  auto* c_const = app.add_subcommand(
      "constants", "half-plane band constants and identity checks");
  int grid_n = 0;
  c_const->add_option("--grid-n", grid_n,
                      "override the half-line grid point count");
  auto* c_geom = app.add_subcommand(
      "geometry", "boundary geometry and tunneling data");
  auto* c_sweep = app.add_subcommand(
      "sweep",
      "evaluate the gap formula and enabled oracles over the h grid");
  bool sweep_fit = false;
  c_sweep->add_flag("--fit-alpha0", sweep_fit,
                    "fit the flux phase offset to the measured gaps");
  auto* c_val = app.add_subcommand(
      "validate", "run the cross-module invariant suite");
  c_val->add_option(
      "--only", only_module,
      "restrict to one module "
      "(degennes|geometry|effective|splitting|boundary2d|cli)");
  auto* c_fit = app.add_subcommand(
      "fit-alpha0",
      "fit the flux phase offset over the configured h grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (strict) cfg.strict_paper_signs = true;

    const auto problems = validate_config(cfg);
    if (!problems.empty()) {
      for (const auto& p : problems)
        std::cerr << "config error: " << p << "\n";
      return kExitUsage;
    }

    if (c_const->parsed()) return run_constants(cfg, grid_n, json_out);
    if (c_geom->parsed()) return run_geometry(cfg, json_out);
    if (c_sweep->parsed()) return run_sweep(cfg, json_out, sweep_fit);
    if (c_val->parsed()) return run_validate(cfg, only_module, json_out);
    if (c_fit->parsed()) return run_fit_alpha0(cfg, json_out);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const curve::NoWellsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    // Adequacy refusals from the numerical layers (grid resolution,
    // truncation depth): the configuration was well-formed but cannot
    // produce a trustworthy result.
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace magsplit::cli

namespace magsplit {
using cli::cli_main;
}  // namespace magsplit
