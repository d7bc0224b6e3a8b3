#pragma once

// Effective one-dimensional model on the boundary circle: the potential
// V(s) = 2 C1 (kappa_max - kappa(s)) / mu2, Agmon distances and tunneling
// actions, the prefactors A_u / A_d, the leading-order WKB amplitude, and a
// direct Fourier-spectral diagonalization of
//     (mu2 / 2) ( h^{1/2} (D_s + theta)^2 + V(s) )    on L^2(R / 2L Z).
//
// Prefactor sign convention: both A_u and A_d use the regularized integrand
// ((sqrt V)' - g) / sqrt V on the arc LEAVING the well (right well -> s = 0
// for A_u, left well -> s = L for A_d). With the opposite relative sign the
// integrand behaves like 2/t at the well and its integral diverges
// logarithmically; paper_sign_integral() exposes that truncated divergent
// form for diagnostic output.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>

#include "magsplit/curve.hpp"
#include "magsplit/degennes.hpp"
#include "magsplit/numerics.hpp"

namespace magsplit::effective {

struct EffectivePotential {
  std::vector<double> s;              // uniform grid on [-L, L)
  std::vector<double> V;              // V at the grid nodes
  double L = 0.0;
  double mu2 = 0.0;                   // band curvature mu1''(xi0)
  double c1 = 0.0;                    // boundary-value constant
  double kappa_max = 0.0;
  curve::WellData wells;
  double g_r = 0.0, g_l = 0.0;        // sqrt(V''(well)/2) at each well
  std::function<double(double)> V_fn; // continuous evaluation (>= 0)

  double at(double si) const { return V_fn(si); }
  double ds() const { return 2.0 * L / static_cast<double>(s.size()); }
  // little v(s) = C1 (kappa_max - kappa(s)) = (mu2/2) V(s)
  double little_v(double si) const { return 0.5 * mu2 * at(si); }
};

namespace detail {

inline double wrap_to_period(double t, double period) {
  double w = std::fmod(t, period);
  if (w < 0.0) w += period;
  return w;
}

// sqrt(V''(well)/2) by a centered 5-point stencil of the continuous V.
// Returns 0 for a degenerate (flat) well: the potential map itself stays
// total; the prefactor/amplitude operations reject g = 0 downstream.
inline double harmonic_frequency(const std::function<double(double)>& Vfn,
                                 double sw, double step) {
  const double vpp = (-Vfn(sw - 2.0 * step) + 16.0 * Vfn(sw - step) -
                      30.0 * Vfn(sw) + 16.0 * Vfn(sw + step) -
                      Vfn(sw + 2.0 * step)) /
                     (12.0 * step * step);
  return vpp > 0.0 ? std::sqrt(0.5 * vpp) : 0.0;
}

}  // namespace detail

// Assemble the effective potential from the geometry table, the located
// wells, and the model-operator constants. kappa_max is re-evaluated at the
// refined well positions through the continuous curvature so that V
// vanishes exactly at (at least) one well and to ~1e-12 at the other.
inline EffectivePotential potential(const curve::ArcLengthTable& tab,
                                    const curve::WellData& wells,
                                    const degennes::DeGennesConstants& consts) {
  EffectivePotential P;
  P.s = tab.s;
  P.L = tab.L;
  P.mu2 = consts.mu2;
  P.c1 = consts.c1;
  P.wells = wells;
  P.kappa_max =
      std::max(tab.kappa_at(wells.s_r), tab.kappa_at(wells.s_l));
  const double c1 = consts.c1, mu2 = consts.mu2, kmax = P.kappa_max;
  const curve::ArcLengthTable tab_copy = tab;  // shares the spline back ends
  P.V_fn = [tab_copy, c1, mu2, kmax](double si) {
    return std::max(0.0, 2.0 * c1 * (kmax - tab_copy.kappa_at(si)) / mu2);
  };
  P.V.resize(P.s.size());
  for (std::size_t j = 0; j < P.s.size(); ++j) P.V[j] = P.V_fn(P.s[j]);
  const double step = std::max(2.0 * tab.ds(), 1e-3 * tab.L);
  P.g_r = detail::harmonic_frequency(P.V_fn, wells.s_r, step);
  P.g_l = detail::harmonic_frequency(P.V_fn, wells.s_l, step);
  return P;
}

// Synthetic potential on a bare circle (tests and oracles): V given as a
// closed form, wells placed by the caller.
inline EffectivePotential synthetic_potential(
    double L, int n, double mu2, double c1, const curve::WellData& wells,
    std::function<double(double)> Vfn, bool wells_meaningful = true) {
  EffectivePotential P;
  P.L = L;
  P.mu2 = mu2;
  P.c1 = c1;
  P.wells = wells;
  P.V_fn = std::move(Vfn);
  P.s.resize(n);
  P.V.resize(n);
  for (int j = 0; j < n; ++j) {
    P.s[j] = -L + 2.0 * L * j / n;
    P.V[j] = P.V_fn(P.s[j]);
  }
  if (wells_meaningful) {
    const double step = std::max(2.0 * P.ds(), 1e-3 * L);
    P.g_r = detail::harmonic_frequency(P.V_fn, wells.s_r, step);
    P.g_l = detail::harmonic_frequency(P.V_fn, wells.s_l, step);
  }
  return P;
}

namespace detail {

// Integral of sqrt(V) along the counter-clockwise arc from `from` over a
// displacement `len` in s (0 <= len <= 2L), split at the wells so every
// Simpson piece is one-sidedly smooth (sqrt(V) has a |.|-kink only AT a
// well; a piece that merely starts or ends there stays C^infinity inside).
inline double sqrtV_arc(const EffectivePotential& P, double from, double len) {
  const double twoL = 2.0 * P.L;
  std::vector<double> cuts;  // displacements in (0, len) where a well sits
  for (double w : {P.wells.s_r, P.wells.s_l}) {
    const double d0 = wrap_to_period(w - from, twoL);
    for (double d : {d0, d0 + twoL})
      if (d > 1e-13 && d < len - 1e-13) cuts.push_back(d);
  }
  cuts.push_back(0.0);
  cuts.push_back(len);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  const double target_step = 0.5 * P.ds();
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c], b = cuts[c + 1];
    if (b - a < 1e-14) continue;
    int m = static_cast<int>(std::ceil((b - a) / target_step));
    m += m % 2;
    m = std::max(m, 8);
    total += simpson(
        [&](double t) {
          return std::sqrt(std::max(0.0, P.at(from + t)));
        },
        a, b, m);
  }
  return total;
}

}  // namespace detail

// Agmon distance: integral of sqrt(V) along the counter-clockwise arc from
// the chosen well ('r' or 'l') to sigma.
inline double agmon_distance(const EffectivePotential& P, char well,
                             double sigma) {
  const double w = (well == 'r') ? P.wells.s_r : P.wells.s_l;
  const double len = detail::wrap_to_period(sigma - w, 2.0 * P.L);
  return detail::sqrtV_arc(P, w, len);
}

struct Actions {
  double S_u = 0.0;  // over the up arc [s_r, s_l] through s = 0
  double S_d = 0.0;  // over the down arc [s_l, s_r + 2L] through s = +-L
  double S = 0.0;    // min(S_u, S_d)
};

inline Actions actions(const EffectivePotential& P) {
  Actions a;
  a.S_u = agmon_distance(P, 'r', P.wells.s_l);
  a.S_d = agmon_distance(P, 'l', P.wells.s_r);
  a.S = std::min(a.S_u, a.S_d);
  return a;
}

namespace detail {

// Cumulative Agmon distance on the table grid: Phi[j] = integral of sqrt(V)
// along the CCW arc from the well to s_j. One 3-point Simpson panel per grid
// step, split where a panel straddles the opposite well (the only interior
// kink of sqrt(V)).
inline std::vector<double> agmon_grid(const EffectivePotential& P, double w) {
  const double twoL = 2.0 * P.L;
  const std::size_t n = P.s.size();
  std::vector<std::pair<double, std::size_t>> disp(n);
  for (std::size_t j = 0; j < n; ++j)
    disp[j] = {wrap_to_period(P.s[j] - w, twoL), j};
  std::sort(disp.begin(), disp.end());
  std::vector<double> wells_t;
  for (double ww : {P.wells.s_r, P.wells.s_l}) {
    const double d = wrap_to_period(ww - w, twoL);
    if (d > 1e-13 && d < twoL - 1e-13) wells_t.push_back(d);
  }
  auto p = [&](double t) { return std::sqrt(std::max(0.0, P.at(w + t))); };
  auto panel = [&](double a, double b) {
    return (b - a) / 6.0 * (p(a) + 4.0 * p(0.5 * (a + b)) + p(b));
  };
  std::vector<double> phi(n);
  double I = 0.0, t_prev = 0.0;
  for (auto [t, j] : disp) {
    double a = t_prev;
    for (double tw : wells_t)
      if (tw > a + 1e-13 && tw < t - 1e-13) {
        I += panel(a, tw);
        a = tw;
      }
    if (t > a) I += panel(a, t);
    phi[j] = I;
    t_prev = t;
  }
  return phi;
}

// Regularized prefactor integrand psi = ((sqrt V)' - g) / sqrt(V) evaluated
// at displacement t > 0 from the well along direction `dir` (+1 CCW, -1 CW).
// (sqrt V)' is the derivative along the arc in the direction of travel, so
// the singularity at t -> 0 is removable on either side.
struct WellArc {
  const EffectivePotential* P;
  double w;      // well position
  double dir;    // +1 or -1
  double g;      // harmonic frequency of this well

  double p(double t) const {
    return std::sqrt(std::max(0.0, P->at(w + dir * t)));
  }
  // d p / d t by a 5-point stencil (V is smooth; p is smooth for t > 0)
  double dp(double t) const {
    const double d = std::min(0.25 * t, 0.5 * P->ds()) + 1e-12;
    return (-p(t + 2 * d) + 8 * p(t + d) - 8 * p(t - d) + p(t - 2 * d)) /
           (12.0 * d);
  }
  double psi(double t) const {
    const double pv = p(t);
    if (pv <= 0.0)
      throw std::runtime_error(
          "prefactor: sqrt(V) vanishes away from the well (singular integrand)");
    return (dp(t) - g) / pv;
  }
};

// Integral of psi over [0, len]: 15-point Gauss-Legendre on the near-well
// piece [0, r] (interior nodes only, so the removable point t = 0 is never
// touched; r = 0.02 L as the regularization radius), composite Simpson
// outside.
inline double psi_integral(const WellArc& arc, double len) {
  const double r = std::min(0.02 * arc.P->L, 0.5 * len);
  using GL = boost::math::quadrature::gauss<double, 15>;
  double total = GL::integrate([&](double t) { return arc.psi(t); }, 0.0, r);
  if (len > r) {
    const double step = 0.5 * arc.P->ds();
    int m = static_cast<int>(std::ceil((len - r) / step));
    m += m % 2;
    m = std::max(m, 8);
    total += simpson([&](double t) { return arc.psi(t); }, r, len, m);
  }
  return total;
}

}  // namespace detail

struct Prefactors {
  double A_u = 0.0;
  double A_d = 0.0;
  double g = 0.0;  // right-well harmonic frequency sqrt(V''(s_r)/2)
};

// A_u = exp(-int_{s_r}^{0} psi ds), A_d = exp(-int_{s_l}^{L} psi ds), with
// the regularized integrand psi = ((sqrt V)' - g)/sqrt(V).
inline Prefactors prefactors(const EffectivePotential& P) {
  if (!(P.g_r > 0.0) || !(P.g_l > 0.0))
    throw std::runtime_error("prefactors: degenerate wells (g <= 0)");
  Prefactors out;
  out.g = P.g_r;
  {
    detail::WellArc arc{&P, P.wells.s_r, +1.0, P.g_r};
    const double len = detail::wrap_to_period(0.0 - P.wells.s_r, 2.0 * P.L);
    out.A_u = std::exp(-detail::psi_integral(arc, len));
  }
  {
    detail::WellArc arc{&P, P.wells.s_l, +1.0, P.g_l};
    const double len = detail::wrap_to_period(P.L - P.wells.s_l, 2.0 * P.L);
    out.A_d = std::exp(-detail::psi_integral(arc, len));
  }
  if (!std::isfinite(out.A_u) || !std::isfinite(out.A_d) || out.A_u <= 0.0 ||
      out.A_d <= 0.0)
    throw std::runtime_error("prefactors: non-finite result");
  return out;
}

// Everything the tunneling formula needs from the potential: grid Agmon
// distances to each well, the actions over the two competing arcs, the
// harmonic frequency, and the prefactors.
struct AgmonData {
  std::vector<double> Phi_r, Phi_l;  // on the table s-grid
  double S_u = 0.0, S_d = 0.0, S = 0.0;
  double g = 0.0;
  double A_u = 0.0, A_d = 0.0;
};

inline AgmonData agmon_data(const EffectivePotential& P) {
  AgmonData out;
  out.Phi_r = detail::agmon_grid(P, P.wells.s_r);
  out.Phi_l = detail::agmon_grid(P, P.wells.s_l);
  const Actions a = actions(P);
  out.S_u = a.S_u;
  out.S_d = a.S_d;
  out.S = a.S;
  const Prefactors pf = prefactors(P);
  out.g = pf.g;
  out.A_u = pf.A_u;
  out.A_d = pf.A_d;
  return out;
}

// Diagnostic: the literal opposite-sign integrand ((sqrt V)' + g)/sqrt(V)
// truncated at `cutoff` from the well. The value grows like 2 log(1/cutoff),
// demonstrating the non-integrability of that sign choice.
inline double paper_sign_integral(const EffectivePotential& P, char well,
                                  double cutoff) {
  const double w = (well == 'r') ? P.wells.s_r : P.wells.s_l;
  const double g = (well == 'r') ? P.g_r : P.g_l;
  const double target = (well == 'r') ? 0.0 : P.L;
  const double len = detail::wrap_to_period(target - w, 2.0 * P.L);
  detail::WellArc arc{&P, w, +1.0, g};
  const double step = 0.5 * P.ds();
  int m = static_cast<int>(std::ceil((len - cutoff) / step));
  m += m % 2;
  m = std::max(m, 8);
  return simpson([&](double t) { return arc.psi(t) + 2.0 * g / arc.p(t); },
                 cutoff, len, m);
}

// Leading-order WKB amplitude around a well:
//   f(s) = (g/pi)^{1/4} exp( int_0^{|s-w|} (g - p'(t)) / (2 p(t)) dt )
// with p the one-sided profile of sqrt(V) on the traversed side, so the
// formula is valid on BOTH sides of the well (the Agmon distance is even in
// the displacement and the integrand keeps its removable singularity).
inline double wkb_amplitude_at(const EffectivePotential& P, char well,
                               double si) {
  const double w = (well == 'r') ? P.wells.s_r : P.wells.s_l;
  const double g = (well == 'r') ? P.g_r : P.g_l;
  const double other = (well == 'r') ? P.wells.s_l : P.wells.s_r;
  double delta = si - w;
  delta -= 2.0 * P.L * std::round(delta / (2.0 * P.L));  // nearest image
  const double dist_other =
      std::min(detail::wrap_to_period(si - other, 2.0 * P.L),
               detail::wrap_to_period(other - si, 2.0 * P.L));
  if (dist_other < 0.02 * P.L)
    throw std::domain_error(
        "wkb_amplitude: divergent at the opposite well");
  const double head = std::pow(g / M_PI, 0.25);
  if (std::abs(delta) < 1e-14) return head;
  detail::WellArc arc{&P, w, delta > 0.0 ? +1.0 : -1.0, g};
  return head * std::exp(-0.5 * detail::psi_integral(arc, std::abs(delta)));
}

// Grid function of the amplitude on the table grid; entries within 0.02 L of
// the opposite well (where the formula diverges) are NaN. The exponent is
// accumulated cumulatively along each side of the well: Gauss-Legendre from
// the well while inside the regularization radius (psi is never evaluated at
// a vanishing displacement), then one 3-point Simpson panel per grid step.
inline std::vector<double> wkb_amplitude(const EffectivePotential& P,
                                         char well) {
  const double w = (well == 'r') ? P.wells.s_r : P.wells.s_l;
  const double g = (well == 'r') ? P.g_r : P.g_l;
  const double other = (well == 'r') ? P.wells.s_l : P.wells.s_r;
  const double twoL = 2.0 * P.L;
  const double head = std::pow(g / M_PI, 0.25);
  const double r0 = 0.02 * P.L;
  std::vector<double> f(P.s.size(),
                        std::numeric_limits<double>::quiet_NaN());
  using GL = boost::math::quadrature::gauss<double, 15>;
  for (double dir : {+1.0, -1.0}) {
    std::vector<std::pair<double, std::size_t>> side;  // (displacement t, j)
    for (std::size_t j = 0; j < P.s.size(); ++j) {
      double delta = P.s[j] - w;
      delta -= twoL * std::round(delta / twoL);
      const double dother = std::min(detail::wrap_to_period(P.s[j] - other, twoL),
                                     detail::wrap_to_period(other - P.s[j], twoL));
      if (dother < r0) continue;  // stays NaN
      if (std::abs(delta) < 1e-14) {
        f[j] = head;
        continue;
      }
      if ((delta > 0.0) == (dir > 0.0)) side.emplace_back(std::abs(delta), j);
    }
    std::sort(side.begin(), side.end());
    detail::WellArc arc{&P, w, dir, g};
    double I = 0.0, t_prev = 0.0;
    for (auto [t, j] : side) {
      if (t <= r0 + P.ds()) {
        I = GL::integrate([&](double u) { return arc.psi(u); }, 0.0, t);
      } else {
        const double mid = 0.5 * (t_prev + t);
        I += (t - t_prev) / 6.0 *
             (arc.psi(t_prev) + 4.0 * arc.psi(mid) + arc.psi(t));
      }
      t_prev = t;
      f[j] = head * std::exp(-0.5 * I);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Direct diagonalization: Fourier spectral collocation of
//   (mu2/2) ( h^{1/2} (D_s + theta)^2 + V )  on the circle of length 2L.
// Basis e^{i pi k s / L}, |k| <= K; V enters as the Toeplitz matrix of its
// Fourier coefficients (dense transform, no FFT needed at these sizes). All
// assembly and the eigensolve run in long double: in the exponentially
// small splitting regime the gap must stay >= ~1e3 * eps * |H|, which
// double precision cannot honor at the smallest h of the test range.
// ---------------------------------------------------------------------------
class EffectiveSolver {
 public:
  using Real = long double;
  using Cplx = std::complex<Real>;
  using Mat = Eigen::Matrix<Cplx, Eigen::Dynamic, Eigen::Dynamic>;

  EffectiveSolver(const EffectivePotential& P, double h, int m = 6,
                  double drift_tol = 1e-9)
      : L_(P.L), mu2_(P.mu2), h_(h), m_(m), drift_tol_(drift_tol) {
    if (!(h > 0.0)) throw std::invalid_argument("EffectiveSolver: h <= 0");
    if (m < 1) throw std::invalid_argument("EffectiveSolver: m < 1");
    const double vmax = *std::max_element(P.V.begin(), P.V.end());
    // >= 16 points per de Broglie wavelength at energy V_max: the classical
    // momentum there is p_max = sqrt(vmax) / h^{1/4}, the Fourier cutoff
    // pi K / L must exceed 8 p_max (16 points per wavelength over the
    // Nyquist pair), plus a fixed margin for the well ground states.
    const double pmax = std::sqrt(std::max(vmax, 1e-12)) / std::pow(h, 0.25);
    K_ = static_cast<int>(std::ceil(8.0 * L_ * pmax / M_PI)) + 16;
    vhat_ = fourier_coefficients(P, 2 * (K_ + kGuard) + 1);
  }

  int basis_size() const { return 2 * K_ + 1; }

  // Lowest m eigenvalues at flux offset theta, ascending. Solves at cutoffs
  // K and K + kGuard; if any of the m values drifts by more than drift_tol,
  // the resolution contract is broken and a convergence error is thrown.
  std::vector<double> eigs(double theta) const {
    const std::vector<double> a = eigs_at(K_, theta);
    const std::vector<double> b = eigs_at(K_ + kGuard, theta);
    for (int i = 0; i < m_; ++i) {
      if (std::abs(a[i] - b[i]) > drift_tol_)
        throw std::runtime_error(
            "effective_eigs: eigenvalue drift under basis refinement "
            "(insufficient resolution for this potential)");
    }
    return b;
  }

 private:
  static constexpr int kGuard = 24;

  static Real pi_l() { return std::acos(static_cast<Real>(-1)); }

  std::vector<Cplx> fourier_coefficients(const EffectivePotential& P,
                                         int count) const {
    // vhat[m] for m = 0..count-1 (negative m by conjugation):
    // vhat_m = (1/n) sum_j V_j exp(-i pi m s_j / L)
    const int n = static_cast<int>(P.V.size());
    std::vector<Cplx> vh(count);
    for (int m = 0; m < count; ++m) {
      Cplx acc(0, 0);
      for (int j = 0; j < n; ++j) {
        const Real phase = -pi_l() * m * static_cast<Real>(P.s[j]) /
                           static_cast<Real>(L_);
        acc += static_cast<Real>(P.V[j]) *
               Cplx(std::cos(phase), std::sin(phase));
      }
      vh[m] = acc / static_cast<Real>(n);
    }
    return vh;
  }

  std::vector<double> eigs_at(int K, double theta) const {
    const int N = 2 * K + 1;
    Mat H = Mat::Zero(N, N);
    const Real pref = static_cast<Real>(0.5) * static_cast<Real>(mu2_);
    const Real sqh = std::sqrt(static_cast<Real>(h_));
    for (int r = 0; r < N; ++r) {
      const Real k = static_cast<Real>(r - K);
      const Real mom =
          pi_l() * k / static_cast<Real>(L_) + static_cast<Real>(theta);
      H(r, r) = pref * (sqh * mom * mom + vhat_[0]);
      for (int c = r + 1; c < N; ++c) {
        const int diff = c - r;  // k_c - k_r > 0
        // <e_r, V e_c> = vhat_{r-c} = conj(vhat_{c-r})
        H(r, c) = pref * std::conj(vhat_[diff]);
        H(c, r) = pref * vhat_[diff];
      }
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("effective_eigs: eigensolver failed");
    std::vector<double> out(m_);
    for (int i = 0; i < m_; ++i)
      out[i] = static_cast<double>(es.eigenvalues()[i]);
    return out;
  }

  double L_, mu2_, h_;
  int m_, K_ = 0;
  double drift_tol_;
  std::vector<Cplx> vhat_;
};

inline std::vector<double> effective_eigs(const EffectivePotential& P,
                                          double h, double theta, int m) {
  return EffectiveSolver(P, h, m).eigs(theta);
}

}  // namespace magsplit::effective
