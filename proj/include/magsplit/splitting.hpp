#pragma once

// Closed-form tunneling-splitting predictions for the magnetic double-well
// problem on a closed boundary loop, plus the fitting and comparison
// utilities used to confront them with direct eigensolver data.
//
// Setting.  The effective model is a one-dimensional flux Schrodinger
// operator (mu2/2)((h^{1/2} D + ...)^2-type kinetic term + V) on a circle of
// circumference 2L whose potential V has two symmetric wells at +-L/2
// separated by barriers through s = 0 ("up" arc) and s = L ("down" arc).
// Its two lowest eigenvalues are exponentially close in h, and the gap
// oscillates with the magnetic flux.  The predicted interaction
// coefficients are
//
//   w(h)  = mu2 h^{1/8}  pi^{-1/2} g^{1/2}
//           ( A_u sqrt(V0) e^{-S_u/h^{1/4}} + A_d sqrt(VL) e^{-S_d/h^{1/4}} )
//
//   w~(h) = mu2 h^{13/8} pi^{-1/2} g^{1/2}
//           ( A_u sqrt(V0) e^{-S_u/h^{1/4}} e^{+i L f(h)}
//           + A_d sqrt(VL) e^{-S_d/h^{1/4}} e^{-i L f(h)} )
//
//   f(h)  = gamma0/h - xi0/sqrt(h) - alpha0
//
// where S_u, S_d are the one-way tunneling actions along the two arcs, g is
// the harmonic frequency of the wells, A_u, A_d the transport prefactors,
// V0 = V(0), VL = V(L) the barrier heights at the arc midpoints, gamma0 the
// enclosed-area flux constant of the boundary, xi0 the half-plane band
// minimizer, and alpha0 a domain-dependent phase offset (the only quantity
// that is fitted from data, never assumed).
//
// w carries the scale of the rescaled effective operator
// (mu2/2)(h^{1/2} D_s^2 + V), whose first gap is 2|w|(1 + o(1)); w~ carries
// the physical eigenvalue scale, gap = 2|w~|(1 + o(1)), and the flux phase.
// The two differ by the exact factor h^{3/2}, so eigensolver data taken in
// one normalization converts to the other via gap_physical =
// h^{3/2} * gap_effective.
//
// For matched arcs the gap factors as envelope * |cos(L f)| with
// envelope = 2 * mu2 h^{13/8} pi^{-1/2} g^{1/2} (A_u sqrt(V0) e^{-S_u/h^{1/4}}
//            + A_d sqrt(VL) e^{-S_d/h^{1/4}}),
// so zeros of the gap form a lattice L f = pi/2 (mod pi) in 1/h with
// asymptotic spacing pi/(L gamma0).
//
// Everything is tracked internally as (log-magnitude, sign/phase) pairs so
// that predictions stay meaningful far below double-precision underflow;
// the plain `value` fields are best-effort doubles that may flush to zero.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "magsplit/curve.hpp"
#include "magsplit/degennes.hpp"
#include "magsplit/effective.hpp"

namespace magsplit::splitting {

namespace detail {

inline double neg_inf() { return -std::numeric_limits<double>::infinity(); }

inline double logsumexp2(double a, double b) {
  if (std::isinf(a) && a < 0.0) return b;
  if (std::isinf(b) && b < 0.0) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// distance from phi to the nearest point of the lattice {pi/2 + k pi}
inline double phase_dist_to_zero(double phi) {
  return std::fabs(std::remainder(phi - M_PI_2, M_PI));
}

}  // namespace detail

// A real scalar stored as log|value| plus sign; `value` is sign*exp(log_mag)
// and may underflow to 0 (or overflow) while log_mag stays exact.
struct LogValue {
  double log_mag = detail::neg_inf();
  double sign = 0.0;  // -1, 0, +1
  double value = 0.0;
};

// A complex scalar stored as log|value| plus principal-value phase.
struct PhasorValue {
  double log_mag = detail::neg_inf();
  double phase = 0.0;  // radians
  std::complex<double> value{0.0, 0.0};
};

// Everything the splitting formulas consume.  All fields except alpha0 must
// be positive and finite; alpha0 is an arbitrary finite phase offset.
struct SplittingInputs {
  // universal half-plane constants
  double theta0 = 0.0;  // band-minimum energy
  double xi0 = 0.0;     // band minimizer (= sqrt(theta0))
  double c1 = 0.0;      // curvature-coupling constant
  double mu2 = 0.0;     // second derivative of the band at its minimum
  // boundary geometry
  double L = 0.0;       // half-perimeter: the wells sit a half-loop apart
  double gamma0 = 0.0;  // enclosed-area flux constant |Omega| / (2L)
  double k2 = 0.0;      // second derivative of curvature at its maximum
  // tunneling data of the effective double-well potential
  double S_u = 0.0, S_d = 0.0;  // one-way actions along the two arcs
  double g = 0.0;               // harmonic frequency of the wells
  double A_u = 0.0, A_d = 0.0;  // transport prefactors of the two arcs
  double V0 = 0.0, VL = 0.0;    // barrier heights at s = 0 and s = L
  // flux phase offset (fitted from data, never assumed)
  double alpha0 = 0.0;
};

inline void validate(const SplittingInputs& in) {
  auto pos = [](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0))
      throw std::invalid_argument(std::string("splitting: input '") + name +
                                  "' must be positive and finite");
  };
  pos(in.theta0, "theta0");
  pos(in.xi0, "xi0");
  pos(in.c1, "c1");
  pos(in.mu2, "mu2");
  pos(in.L, "L");
  pos(in.gamma0, "gamma0");
  pos(in.k2, "k2");
  pos(in.S_u, "S_u");
  pos(in.S_d, "S_d");
  pos(in.g, "g");
  pos(in.A_u, "A_u");
  pos(in.A_d, "A_d");
  pos(in.V0, "V0");
  pos(in.VL, "VL");
  if (!std::isfinite(in.alpha0))
    throw std::invalid_argument("splitting: input 'alpha0' must be finite");
}

// Collect the inputs from the upstream pipeline pieces.
inline SplittingInputs assemble(const degennes::DeGennesConstants& dg,
                                const curve::FluxConstant& flux,
                                const effective::EffectivePotential& P,
                                const effective::AgmonData& a,
                                double alpha0 = 0.0) {
  SplittingInputs in;
  in.theta0 = dg.theta0;
  in.xi0 = dg.xi0;
  in.c1 = dg.c1;
  in.mu2 = dg.mu2;
  in.L = P.L;
  in.gamma0 = flux.gamma0;
  in.k2 = P.wells.k2;
  in.S_u = a.S_u;
  in.S_d = a.S_d;
  in.g = a.g;
  in.A_u = a.A_u;
  in.A_d = a.A_d;
  in.V0 = P.V_fn(0.0);
  in.VL = P.V_fn(P.L);
  in.alpha0 = alpha0;
  validate(in);
  return in;
}

namespace detail {

struct Terms {
  double x;               // h^{-1/4}
  double log_up, log_dn;  // log(A sqrt(V)) - S x for each arc
  double log_pref_eff;    // log( mu2 h^{1/8}  g^{1/2} / sqrt(pi) )
  double log_pref_phys;   // log( mu2 h^{13/8} g^{1/2} / sqrt(pi) )
  double Lf;              // L * f(h), unreduced
};

inline Terms terms(const SplittingInputs& in, double h) {
  if (!(h > 0.0 && h < 1.0))
    throw std::invalid_argument("splitting: h must lie in (0,1)");
  Terms t;
  t.x = std::pow(h, -0.25);
  t.log_up = std::log(in.A_u) + 0.5 * std::log(in.V0) - in.S_u * t.x;
  t.log_dn = std::log(in.A_d) + 0.5 * std::log(in.VL) - in.S_d * t.x;
  const double base =
      std::log(in.mu2) + 0.5 * std::log(in.g) - 0.5 * std::log(M_PI);
  t.log_pref_eff = base + 0.125 * std::log(h);
  t.log_pref_phys = base + 1.625 * std::log(h);
  t.Lf = in.L * (in.gamma0 / h - in.xi0 / std::sqrt(h) - in.alpha0);
  return t;
}

inline LogValue make_log_value(double log_mag, double sign) {
  LogValue v;
  if (sign == 0.0 || (std::isinf(log_mag) && log_mag < 0.0)) return v;
  v.log_mag = log_mag;
  v.sign = sign;
  v.value = sign * std::exp(log_mag);
  return v;
}

}  // namespace detail

// Interaction coefficient of the rescaled effective operator; its first
// spectral gap is 2|w|(1 + o(1)).  Positive for valid inputs.
inline LogValue w_effective(const SplittingInputs& in, double h) {
  validate(in);
  const auto t = detail::terms(in, h);
  return detail::make_log_value(
      t.log_pref_eff + detail::logsumexp2(t.log_up, t.log_dn), 1.0);
}

// L * f(h) reduced to [0, 2 pi).
inline double phase_mod_2pi(const SplittingInputs& in, double h) {
  validate(in);
  double r = std::fmod(detail::terms(in, h).Lf, 2.0 * M_PI);
  if (r < 0.0) r += 2.0 * M_PI;
  return r;
}

// Flux-dressed interaction coefficient at the physical eigenvalue scale;
// the physical first gap is 2|w~|(1 + o(1)).
inline PhasorValue w_tilde(const SplittingInputs& in, double h) {
  validate(in);
  const auto t = detail::terms(in, h);
  const double m = std::max(t.log_up, t.log_dn);
  // reduce before taking sin/cos so the phasor stays accurate at huge L*f
  const double r = std::fmod(t.Lf, 2.0 * M_PI);
  const std::complex<double> z = std::polar(std::exp(t.log_up - m), r) +
                                 std::polar(std::exp(t.log_dn - m), -r);
  PhasorValue out;
  const double az = std::abs(z);
  if (az > 0.0) {
    out.log_mag = t.log_pref_phys + m + std::log(az);
    out.phase = std::arg(z);
    out.value = std::polar(std::exp(out.log_mag), out.phase);
  }
  return out;
}

// Upper envelope of the oscillating gap: 2 (|up term| + |down term|) at the
// physical scale.  For matched arcs, gap = envelope * |cos(L f)| exactly.
// Always positive; gap_formula <= envelope <= 2 * envelope holds pointwise.
inline LogValue envelope(const SplittingInputs& in, double h) {
  validate(in);
  const auto t = detail::terms(in, h);
  return detail::make_log_value(std::log(2.0) + t.log_pref_phys +
                                    detail::logsumexp2(t.log_up, t.log_dn),
                                1.0);
}

// Predicted physical gap 2|w~(h)|.
inline LogValue gap_formula(const SplittingInputs& in, double h) {
  const PhasorValue wt = w_tilde(in, h);
  if (std::isinf(wt.log_mag) && wt.log_mag < 0.0) return LogValue{};
  return detail::make_log_value(std::log(2.0) + wt.log_mag, 1.0);
}

// Equivalent closed form of the symmetric-case envelope with the well
// frequency and barrier height eliminated through the exact identities
// g^2 = c1 k2 / mu2 and V0 = 2 c1 dkappa / mu2 (dkappa = curvature drop
// between the two boundary extrema, recovered here as V0 mu2 / (2 c1)):
//
//   envelope = h^{13/8} A 2^{5/2} c1^{3/4} pi^{-1/2} (k2 mu2)^{1/4}
//              dkappa^{1/2} e^{-S/h^{1/4}}
//
// Requires matched arcs; throws std::invalid_argument otherwise.
inline LogValue conjecture_envelope(const SplittingInputs& in, double h) {
  validate(in);
  const double Sbar = 0.5 * (in.S_u + in.S_d);
  const double Abar = 0.5 * (in.A_u + in.A_d);
  const double Vbar = 0.5 * (in.V0 + in.VL);
  if (std::fabs(in.S_u - in.S_d) > 1e-6 * Sbar ||
      std::fabs(in.A_u - in.A_d) > 1e-3 * Abar ||
      std::fabs(in.V0 - in.VL) > 1e-3 * Vbar)
    throw std::invalid_argument(
        "conjecture_envelope: requires matched arcs (symmetric domain)");
  if (!(h > 0.0 && h < 1.0))
    throw std::invalid_argument("splitting: h must lie in (0,1)");
  const double x = std::pow(h, -0.25);
  const double dkappa = Vbar * in.mu2 / (2.0 * in.c1);
  const double log_mag = 1.625 * std::log(h) + std::log(Abar) +
                         2.5 * std::log(2.0) + 0.75 * std::log(in.c1) -
                         0.5 * std::log(M_PI) +
                         0.25 * std::log(in.k2 * in.mu2) +
                         0.5 * std::log(dkappa) - Sbar * x;
  return detail::make_log_value(log_mag, 1.0);
}

// Symmetric-case gap in the eliminated form: conjecture_envelope * |cos(Lf)|.
inline LogValue conjecture_gap(const SplittingInputs& in, double h) {
  const LogValue env = conjecture_envelope(in, h);
  const double c = std::fabs(std::cos(std::fmod(detail::terms(in, h).Lf,
                                                2.0 * M_PI)));
  if (c == 0.0) return LogValue{};
  return detail::make_log_value(env.log_mag + std::log(c), 1.0);
}

// Formula evaluations over an h grid, kept alongside the inputs that
// produced them so downstream comparisons can recompute phases and zeros.
struct SplittingPrediction {
  SplittingInputs inputs;
  std::vector<double> h;
  std::vector<double> inv_h;
  std::vector<double> x;  // h^{-1/4}
  std::vector<LogValue> w_eff;
  std::vector<PhasorValue> w_tilde;
  std::vector<LogValue> gap_formula;  // 2 |w_tilde|
  std::vector<LogValue> envelope;
  std::vector<double> phase_mod_2pi;  // L f(h) mod 2 pi
};

inline SplittingPrediction predict(const SplittingInputs& in,
                                   const std::vector<double>& h_grid) {
  validate(in);
  if (h_grid.empty())
    throw std::invalid_argument("predict: empty h grid");
  SplittingPrediction p;
  p.inputs = in;
  p.h = h_grid;
  const std::size_t n = h_grid.size();
  p.inv_h.resize(n);
  p.x.resize(n);
  p.w_eff.resize(n);
  p.w_tilde.resize(n);
  p.gap_formula.resize(n);
  p.envelope.resize(n);
  p.phase_mod_2pi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = h_grid[i];
    p.inv_h[i] = 1.0 / h;
    p.x[i] = std::pow(h, -0.25);
    p.w_eff[i] = w_effective(in, h);
    p.w_tilde[i] = w_tilde(in, h);
    p.gap_formula[i] = gap_formula(in, h);
    p.envelope[i] = envelope(in, h);
    p.phase_mod_2pi[i] = phase_mod_2pi(in, h);
  }
  return p;
}

// A zero of cos(L f): L f(h) = pi/2 + k pi.
struct PhaseZero {
  long long k;
  double h;
  double inv_h;
};

// All gap zeros predicted in [h_lo, h_hi], ordered by increasing 1/h.  The
// phase must be monotone in 1/h over the range, which holds whenever
// gamma0 > xi0 / (2 sqrt(1/h_hi)); otherwise std::invalid_argument.
inline std::vector<PhaseZero> formula_zeros(const SplittingInputs& in,
                                            double h_lo, double h_hi) {
  validate(in);
  if (!(h_lo > 0.0 && h_lo <= h_hi && h_hi < 1.0))
    throw std::invalid_argument("formula_zeros: need 0 < h_lo <= h_hi < 1");
  const double rho_lo = 1.0 / h_hi, rho_hi = 1.0 / h_lo;
  if (in.gamma0 - in.xi0 / (2.0 * std::sqrt(rho_lo)) <= 0.0)
    throw std::invalid_argument(
        "formula_zeros: flux phase is not monotone on the requested range "
        "(enclosed-area constant too small)");
  auto psi = [&](double rho) {
    return in.L * (in.gamma0 * rho - in.xi0 * std::sqrt(rho) - in.alpha0);
  };
  const double p_lo = psi(rho_lo), p_hi = psi(rho_hi);
  const long long kmin =
      static_cast<long long>(std::ceil((p_lo - M_PI_2) / M_PI - 1e-12));
  const long long kmax =
      static_cast<long long>(std::floor((p_hi - M_PI_2) / M_PI + 1e-12));
  std::vector<PhaseZero> out;
  for (long long k = kmin; k <= kmax; ++k) {
    const double target = M_PI_2 + static_cast<double>(k) * M_PI;
    auto G = [&](double rho) { return psi(rho) - target; };
    if (G(rho_lo) > 0.0 || G(rho_hi) < 0.0) continue;  // ceil/floor fuzz
    boost::math::tools::eps_tolerance<double> tol(48);
    std::uintmax_t it = 200;
    const auto br = boost::math::tools::toms748_solve(G, rho_lo, rho_hi,
                                                      tol, it);
    const double rho = 0.5 * (br.first + br.second);
    out.push_back(PhaseZero{k, 1.0 / rho, rho});
  }
  return out;
}

// Result of fitting the phase offset alpha0 to measured gaps.
struct AlphaFit {
  double alpha0;        // fitted offset, reduced to [0, pi/L)
  double intercept;     // constant log offset absorbed by the fit
  double rms_residual;  // rms of (log gap_num - log gap_formula - intercept)
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;  // near-zero or non-positive samples dropped
};

// Least-squares fit of alpha0 in [0, pi/L) minimizing
//   sum ( log gap_numeric - log gap_formula(alpha0) - intercept )^2
// over the grid, excluding samples whose phase lies within 5% of a
// half-period of a predicted zero (where log gap is singular) and samples
// with non-positive measured gap.  The intercept is free, so any constant
// normalization factor in the data is absorbed; an h-dependent mismatch is
// not, and callers must pre-scale (gap_physical = h^{3/2} * gap_effective).
//
// Preconditions (std::runtime_error "fit_alpha0: insufficient data" when
// violated): the phase L f must span at least 3 pi across the grid (at
// least three oscillation zeros), the arcs must be near-symmetric so the
// oscillation is visible (exp(|S_u - S_d| h^{-1/4}) <= 4 at the largest h),
// and at least 6 usable samples must survive exclusion.
inline AlphaFit fit_alpha0(const SplittingInputs& in0,
                           const std::vector<double>& h_grid,
                           const std::vector<double>& gap_numeric) {
  validate(in0);
  if (h_grid.size() != gap_numeric.size() || h_grid.empty())
    throw std::invalid_argument(
        "fit_alpha0: grid and gap arrays must have equal nonzero length");
  SplittingInputs in = in0;
  in.alpha0 = 0.0;

  struct Pt {
    double Lf0;      // phase at alpha0 = 0
    double log_pref; // log_pref_phys + max(log_up, log_dn) + log 2
    double eu, ed;   // arc weights rescaled by the max
    double log_gn;   // log of the measured gap
    bool valid;
  };
  const std::size_t n = h_grid.size();
  std::vector<Pt> pts(n);
  double span_lo = std::numeric_limits<double>::infinity();
  double span_hi = -std::numeric_limits<double>::infinity();
  double x_min = std::numeric_limits<double>::infinity();
  std::size_t n_valid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = detail::terms(in, h_grid[i]);
    const double m = std::max(t.log_up, t.log_dn);
    Pt& p = pts[i];
    p.Lf0 = t.Lf;
    p.log_pref = std::log(2.0) + t.log_pref_phys + m;
    p.eu = std::exp(t.log_up - m);
    p.ed = std::exp(t.log_dn - m);
    const double gn = gap_numeric[i];
    p.valid = std::isfinite(gn) && gn > 0.0;
    p.log_gn = p.valid ? std::log(gn) : 0.0;
    n_valid += p.valid ? 1 : 0;
    span_lo = std::min(span_lo, t.Lf);
    span_hi = std::max(span_hi, t.Lf);
    x_min = std::min(x_min, t.x);
  }
  const double span = span_hi - span_lo;
  if (span < 3.0 * M_PI) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "fit_alpha0: insufficient data: flux phase spans %.3f rad "
                  "< 3 pi across the grid (need >= 3 oscillation zeros)",
                  span);
    throw std::runtime_error(msg);
  }
  if (std::fabs(in.S_u - in.S_d) * x_min > std::log(4.0))
    throw std::runtime_error(
        "fit_alpha0: insufficient data: arc asymmetry suppresses the "
        "oscillation (exp(|S_u - S_d| h^{-1/4}) > 4 over the whole grid)");
  if (n_valid < 6)
    throw std::runtime_error(
        "fit_alpha0: insufficient data: fewer than 6 positive gap samples");

  const double period = M_PI / in.L;
  const double excl = 0.05 * M_PI;
  auto objective = [&](double a) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t used = 0;
    std::vector<double> r;
    r.reserve(n);
    for (const Pt& p : pts) {
      if (!p.valid) continue;
      const double Lf = p.Lf0 - in.L * a;
      if (detail::phase_dist_to_zero(Lf) < excl) continue;
      const double c2 = std::cos(2.0 * std::fmod(Lf, 2.0 * M_PI));
      const double az =
          std::sqrt(p.eu * p.eu + p.ed * p.ed + 2.0 * p.eu * p.ed * c2);
      const double log_gf = p.log_pref + std::log(az);
      const double resid = p.log_gn - log_gf;
      r.push_back(resid);
      sum += resid;
      ++used;
    }
    if (used < 6) return std::numeric_limits<double>::infinity();
    const double c = sum / static_cast<double>(used);
    for (double v : r) sum2 += (v - c) * (v - c);
    return sum2;
  };

  const int n_scan = 256;
  double best_a = 0.0, best_obj = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_scan; ++i) {
    const double a = period * i / n_scan;
    const double o = objective(a);
    if (o < best_obj) {
      best_obj = o;
      best_a = a;
    }
  }
  if (std::isinf(best_obj))
    throw std::runtime_error(
        "fit_alpha0: insufficient data: fewer than 6 samples survive the "
        "near-zero exclusion");
  const double step = period / n_scan;
  const auto mn = boost::math::tools::brent_find_minima(
      objective, best_a - step, best_a + step, 30);
  double a_fit = std::fmod(mn.first, period);
  if (a_fit < 0.0) a_fit += period;

  AlphaFit out;
  out.alpha0 = a_fit;
  // recompute the absorbed intercept and rms on the used set
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> resid;
  for (const Pt& p : pts) {
    if (!p.valid) continue;
    const double Lf = p.Lf0 - in.L * a_fit;
    if (detail::phase_dist_to_zero(Lf) < excl) continue;
    const double c2 = std::cos(2.0 * std::fmod(Lf, 2.0 * M_PI));
    const double az =
        std::sqrt(p.eu * p.eu + p.ed * p.ed + 2.0 * p.eu * p.ed * c2);
    resid.push_back(p.log_gn - p.log_pref - std::log(az));
    sum += resid.back();
    ++used;
  }
  out.intercept = sum / static_cast<double>(used);
  double sum2 = 0.0;
  for (double v : resid) sum2 += (v - out.intercept) * (v - out.intercept);
  out.rms_residual = std::sqrt(sum2 / static_cast<double>(used));
  out.n_used = used;
  out.n_excluded = n - used;
  return out;
}

// Pointwise and aggregate comparison of measured gaps against a prediction.
struct ComparePoint {
  double h = 0.0, inv_h = 0.0, x = 0.0;
  double log_gap_numeric = 0.0;  // NaN when the sample is invalid
  double log_gap_formula = 0.0;  // -inf at exact formula zeros
  double diff_log = 0.0;         // numeric - formula
  double rel_err_log = 0.0;      // |diff_log| / |log_gap_formula|
  bool near_zero = false;        // phase within 5% of a half-period of a zero
  bool used = false;             // enters the aggregate statistics
};

struct CompareResult {
  std::vector<ComparePoint> points;
  // least-squares slopes of -log gap against x = h^{-1/4} over used points
  double slope_numeric = 0.0;
  double slope_formula = 0.0;
  // gap-zero locations in 1/h: measured minima (refined by a linear
  // crossing through the two lowest straddling samples) and predicted
  std::vector<double> zeros_numeric;
  std::vector<double> zeros_formula;
  std::vector<double> zero_offsets;  // |measured - nearest predicted|
  double grid_step_inv_h = 0.0;      // largest 1/h spacing of the grid
  double mean_abs_diff_log = 0.0, max_abs_diff_log = 0.0;
  double mean_rel_err_log = 0.0, max_rel_err_log = 0.0;
  std::size_t n_used = 0;
};

// The numeric gaps must share the prediction's normalization (physical
// gap = 2|w~|); convert effective-operator gaps via h^{3/2} * gap first.
// The h grid must be strictly monotone.
inline CompareResult compare(const SplittingPrediction& pred,
                             const std::vector<double>& gap_numeric) {
  const std::size_t n = pred.h.size();
  if (gap_numeric.size() != n)
    throw std::invalid_argument(
        "compare: prediction and numeric gap count mismatch");
  if (n < 3)
    throw std::invalid_argument("compare: need at least 3 grid points");
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < n; ++i) {
    inc = inc && pred.h[i] > pred.h[i - 1];
    dec = dec && pred.h[i] < pred.h[i - 1];
  }
  if (!inc && !dec)
    throw std::invalid_argument("compare: h grid must be strictly monotone");

  CompareResult res;
  res.points.resize(n);
  // order indices by increasing 1/h
  std::vector<std::size_t> ord(n);
  for (std::size_t i = 0; i < n; ++i) ord[i] = dec ? i : n - 1 - i;

  SplittingInputs in = pred.inputs;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double sum_diff = 0.0, sum_rel = 0.0;
  double sx = 0.0, sxx = 0.0, syn = 0.0, sxyn = 0.0, syf = 0.0, sxyf = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ComparePoint& p = res.points[i];
    p.h = pred.h[i];
    p.inv_h = pred.inv_h[i];
    p.x = pred.x[i];
    p.log_gap_formula = pred.gap_formula[i].sign > 0.0
                            ? pred.gap_formula[i].log_mag
                            : detail::neg_inf();
    const double Lf = detail::terms(in, p.h).Lf;
    p.near_zero = detail::phase_dist_to_zero(Lf) < 0.05 * M_PI;
    const double gn = gap_numeric[i];
    const bool valid = std::isfinite(gn) && gn > 0.0;
    p.log_gap_numeric = valid ? std::log(gn) : nan;
    p.diff_log = valid ? p.log_gap_numeric - p.log_gap_formula : nan;
    p.rel_err_log =
        valid && std::isfinite(p.log_gap_formula) && p.log_gap_formula != 0.0
            ? std::fabs(p.diff_log) / std::fabs(p.log_gap_formula)
            : nan;
    p.used = valid && !p.near_zero && std::isfinite(p.log_gap_formula);
    if (p.used) {
      ++used;
      sum_diff += std::fabs(p.diff_log);
      sum_rel += std::fabs(p.rel_err_log);
      res.max_abs_diff_log =
          std::max(res.max_abs_diff_log, std::fabs(p.diff_log));
      res.max_rel_err_log =
          std::max(res.max_rel_err_log, std::fabs(p.rel_err_log));
      sx += p.x;
      sxx += p.x * p.x;
      syn += -p.log_gap_numeric;
      sxyn += -p.x * p.log_gap_numeric;
      syf += -p.log_gap_formula;
      sxyf += -p.x * p.log_gap_formula;
    }
  }
  res.n_used = used;
  if (used >= 2) {
    const double den =
        static_cast<double>(used) * sxx - sx * sx;
    if (den > 0.0) {
      res.slope_numeric = (static_cast<double>(used) * sxyn - sx * syn) / den;
      res.slope_formula = (static_cast<double>(used) * sxyf - sx * syf) / den;
    }
    res.mean_abs_diff_log = sum_diff / static_cast<double>(used);
    res.mean_rel_err_log = sum_rel / static_cast<double>(used);
  }

  // predicted zeros across the grid span
  const double h_min = std::min(pred.h.front(), pred.h.back());
  const double h_max = std::max(pred.h.front(), pred.h.back());
  for (const auto& z : formula_zeros(in, h_min, h_max))
    res.zeros_formula.push_back(z.inv_h);

  // measured zeros: dips well below the surrounding samples, either a
  // single deep sample or two adjacent low samples (a crossing that falls
  // mid-step), refined by the linear crossing through the two lowest
  // straddling samples; nearby candidates for the same crossing are merged
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double step = pred.inv_h[ord[j + 1]] - pred.inv_h[ord[j]];
    res.grid_step_inv_h = std::max(res.grid_step_inv_h, step);
  }
  auto gap_at = [&](std::size_t j) { return gap_numeric[ord[j]]; };
  auto rho_at = [&](std::size_t j) { return pred.inv_h[ord[j]]; };
  std::vector<double> cand;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double g0 = gap_at(j - 1), g1 = gap_at(j), g2 = gap_at(j + 1);
    if (!(g0 > 0.0 && g1 > 0.0 && g2 > 0.0)) continue;
    if (g1 < g0 && g1 <= g2 && g1 < 0.6 * std::min(g0, g2)) {
      const std::size_t k = (g2 < g0) ? j + 1 : j - 1;
      const double gk = gap_at(k);
      cand.push_back((rho_at(j) * gk + rho_at(k) * g1) / (g1 + gk));
    }
  }
  for (std::size_t j = 1; j + 2 < n; ++j) {
    const double gl = gap_at(j - 1), g1 = gap_at(j), g2 = gap_at(j + 1),
                 gr = gap_at(j + 2);
    if (!(gl > 0.0 && g1 > 0.0 && g2 > 0.0 && gr > 0.0)) continue;
    if (std::max(g1, g2) < 0.6 * std::min(gl, gr))
      cand.push_back((rho_at(j) * g2 + rho_at(j + 1) * g1) / (g1 + g2));
  }
  std::sort(cand.begin(), cand.end());
  for (double z : cand) {
    if (!res.zeros_numeric.empty() &&
        z - res.zeros_numeric.back() < 0.5 * res.grid_step_inv_h)
      res.zeros_numeric.back() = 0.5 * (res.zeros_numeric.back() + z);
    else
      res.zeros_numeric.push_back(z);
  }
  for (double zn : res.zeros_numeric) {
    double best = std::numeric_limits<double>::infinity();
    for (double zf : res.zeros_formula)
      best = std::min(best, std::fabs(zn - zf));
    res.zero_offsets.push_back(best);
  }
  return res;
}

// CSV dump of a prediction (plus optional measured gaps), 15 significant
// digits.  Columns: h, inv_h, gap_formula, envelope, phase_mod_2pi and,
// when measured gaps are supplied, gap_numeric and rel_err
// (= |log gap_numeric - log gap_formula| / |log gap_formula|).
inline void write_csv(std::ostream& os, const SplittingPrediction& pred,
                      const std::vector<double>* gap_numeric = nullptr) {
  if (gap_numeric && gap_numeric->size() != pred.h.size())
    throw std::invalid_argument("write_csv: numeric gap count mismatch");
  os << "h,inv_h,gap_formula,envelope,phase_mod_2pi";
  if (gap_numeric) os << ",gap_numeric,rel_err";
  os << "\n";
  char buf[512];
  for (std::size_t i = 0; i < pred.h.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.15g,%.15g,%.15g,%.15g,%.15g",
                  pred.h[i], pred.inv_h[i], pred.gap_formula[i].value,
                  pred.envelope[i].value, pred.phase_mod_2pi[i]);
    os << buf;
    if (gap_numeric) {
      const double gn = (*gap_numeric)[i];
      const double lgf = pred.gap_formula[i].sign > 0.0
                             ? pred.gap_formula[i].log_mag
                             : detail::neg_inf();
      double rel = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(gn) && gn > 0.0 && std::isfinite(lgf) && lgf != 0.0)
        rel = std::fabs(std::log(gn) - lgf) / std::fabs(lgf);
      std::snprintf(buf, sizeof buf, ",%.15g,%.15g", gn, rel);
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace magsplit::splitting
