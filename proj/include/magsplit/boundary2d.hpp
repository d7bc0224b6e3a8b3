#pragma once

// Two-dimensional boundary-tube magnetic operator.
//
// Discretizes the rescaled magnetic Neumann operator on the half-tube
// (sigma, tau) in [-L, L) x [0, tau_max]:
//
//   N = -a^{-1} d_tau (a d_tau .) + a^{-1} D (a^{-1} D .),
//   D = -i*hbar*d_sigma + gamma0/hbar - tau + hbar*c_mu(tau)*(kappa(sigma)/2)*tau^2,
//   a(sigma, tau) = 1 - hbar*tau*kappa(sigma)*c_mu(tau),  c_mu(tau) = c(mu*tau),
//
// with Neumann at tau = 0 (ghost point / half-cell mass) and Dirichlet at
// tau = tau_max.  The discretization is a quadratic form in the a-weighted
// inner product:
//
//   * normal part: half-link conductances a(sigma_j, tau_{m+1/2}) / d_tau^2,
//   * tangential part: per-node rows T = -i*hbar*C_theta + diag(F_phys),
//     where C_theta is the centered difference with covariant link phases
//     theta = d_sigma * F0 / hbar carrying the *constant* flux part F0, and
//     F_phys(sigma, tau) = -tau + hbar*c_mu(tau)*kappa(sigma)*tau^2/2 acts
//     exactly at the nodes; the form is K_sigma = T^H diag(w/a) T.
//
// Carrying the flux in link phases makes shifts F0 -> F0 + pi*hbar*k/L an
// exact diagonal unitary conjugation of the matrix (discrete gauge
// invariance), while keeping the tau-dependent potential exact at nodes so
// a momentum-matched plane wave sees the exact transverse fiber problem.
// The lowest pair is extracted by shift-invert block inverse iteration on
// the pencil (K, M) with a sparse LU factorization.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "magsplit/curve.hpp"
#include "magsplit/degennes.hpp"
#include "magsplit/effective.hpp"
#include "magsplit/numerics.hpp"

namespace magsplit::boundary2d {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cplx>;

// Solver-policy constants (values produced by the de Gennes module; used
// only for default shifts and resolution estimates, never as physics
// inputs -- physical constants always arrive through DeGennesConstants).
inline constexpr double kTheta0Policy = 0.590106124950;
inline constexpr double kC1Policy = 0.254068109126;
inline constexpr double kXi0Policy = 0.768183653139;

// Margin factor for the cutoff scale: mu >= kMuMargin * kappa_max * hbar
// keeps the weight a bounded away from 0 (min value 1 - 1.0663/kMuMargin =
// 0.07 with the saturating cutoff below, whose sup of x*c(x) is 1.0663) and
// the in-field momentum F strictly monotone in tau (no spurious potential
// valleys), uniformly in hbar.
inline constexpr double kMuMargin = 1.1466;
inline constexpr double kWeightFloor = 0.05;

// Dispersion regularization strength. The centered first difference has the
// 2-to-1 symbol sin(k ds), so every physical tangential momentum acquires a
// spurious partner branch with carrier near pi - k ds. A gauge-covariant
// penalty kWilson * (hbar/ds)^2 * (2 - 2cos(k ds + theta))^2 / 4 lifts that
// branch by ~3.9 * kWilson * (hbar/ds)^2 (order 0.1 at 24 points per
// wavelength) while shifting physical states by only
// kWilson * xi0^4/4 * (ds/hbar)^2 — a smooth O(ds^2) bias that the
// Richardson step removes along with the scheme's native error.
inline constexpr double kWilson = 0.004;

struct TubularGrid {
  int n_s = 0;            // tangential points
  int n_tau = 0;          // normal points on [0, tau_max), Dirichlet at tau_max
  double hbar = 0.0;      // hbar = h^{1/2}
  double tau_max = 12.0;  // normal truncation
  double eta = 0.1;       // cutoff exponent: mu = hbar^{1/2 + 2*eta} (floored)
};

enum class WellVariant { two_well, one_well_right, one_well_left };

struct MagneticOperator2D {
  SpMat K;            // Hermitian quadratic-form matrix
  Eigen::VectorXd M;  // diagonal mass (weight a times half-cell factor)
  TubularGrid grid;
  WellVariant variant = WellVariant::two_well;
  double flux = 0.0;  // gamma0 as passed (one-well variants gauge it away)
  double L = 0.0;     // boundary half-length from the table
  bool periodic = true;
  bool tau_major = false;  // index layout, chosen to minimize LU bandwidth
  double sigma_lo = 0.0;   // left wall (one-well) or -L (periodic)
  double d_sigma = 0.0, d_tau = 0.0;
  std::vector<double> sigma;        // tangential nodes
  std::vector<double> kappa_nodes;  // curvature samples at the nodes
  std::function<double(double)> kappa_ext;  // continuous curvature evaluator
  double mu_cut = 0.0;              // cutoff scale mu actually used
  double a_min = 1.0, a_max = 1.0;  // weight range over the grid
  // Geometry carried over from WellData for shifts and diagnostics.
  double kappa_max = 0.0, k2 = 0.0, s_r = 0.0, s_l = 0.0;

  int index(int j, int m) const {
    return tau_major ? m * grid.n_s + j : j * grid.n_tau + m;
  }
  int size() const { return grid.n_s * grid.n_tau; }
};

namespace detail {

// Saturating curvature cutoff: c(x) = 1 for x <= 1 and ~1/x beyond, with a
// C^2 blend on [1, 1.25], so that x*c(x) rises to sup = 1.0663 and then
// saturates at 1.  Compared with a cutoff that kills the curvature term, the
// saturation (i) pushes the region where the operator deviates from the
// exact tubular coefficients further out (less spectral bias from the
// Gaussian tail of the transverse mode) and (ii) keeps the tangential
// potential strictly monotone in tau, so no spurious far wells appear:
// dF/dtau = -1 + (x*c + x^2*c'/2)/margin <= -1 + 1.0113/kMuMargin < 0.
inline double saturating_cutoff(double x) {
  if (x <= 1.0) return 1.0;
  const double y = x - 1.0;
  return 1.0 / (1.0 + y * smoothstep2(4.0 * y));
}

inline double weight_a(double hbar, double mu, double kappa, double tau) {
  return 1.0 - hbar * tau * kappa * saturating_cutoff(mu * tau);
}

inline double f_phys(double hbar, double mu, double kappa, double tau) {
  return -tau + 0.5 * hbar * saturating_cutoff(mu * tau) * kappa * tau * tau;
}

// Cutoff scale mu = hbar^{1/2+2*eta}, floored at kMuMargin*kappa_max*hbar so
// the weight stays positive on every grid (the bare power-law scale violates
// positivity for all moderate hbar when kappa_max*hbar^{0.3} is not small).
inline double cutoff_scale(double hbar, double eta, double kappa_max) {
  return std::max(std::pow(hbar, 0.5 + 2.0 * eta),
                  kMuMargin * std::max(kappa_max, 0.0) * hbar);
}

// Minimal tangential point count: >= 10 points per oscillation wavelength
// 2*pi*hbar/xi0 over a tangential extent `len`.
inline int required_ns(double len, double hbar) {
  return static_cast<int>(std::ceil(10.0 * len * kXi0Policy / (2.0 * M_PI * hbar)));
}

// One-well curvature extension: kappa_r equals the periodic curvature on
// (s_l - 2L, s_l) with C^2 monotone collars of width eta_tilde = 0.05*L
// blending to 0 at both ends, and vanishes identically on the straight
// extensions beyond.  The left variant is the exact mirror image.
inline double kappa_right_extended(const curve::ArcLengthTable& table,
                                   double s_l, double sigma) {
  const double L = table.L;
  const double eta_tilde = 0.05 * L;
  const double lo = s_l - 2.0 * L, hi = s_l;
  if (sigma <= lo || sigma >= hi) return 0.0;
  double blend = 1.0;
  if (sigma < lo + eta_tilde) blend = smoothstep2((sigma - lo) / eta_tilde);
  if (sigma > hi - eta_tilde)
    blend = std::min(blend, smoothstep2((hi - sigma) / eta_tilde));
  return blend * table.kappa_at(sigma);
}

inline cplx mdot(const Eigen::VectorXd& M, const Eigen::VectorXcd& x,
                 const Eigen::VectorXcd& y) {
  return (x.array().conjugate() * y.array() * M.array().cast<cplx>()).sum();
}

inline double mnorm(const Eigen::VectorXd& M, const Eigen::VectorXcd& x) {
  return std::sqrt((x.array().abs2() * M.array()).sum());
}

// Residual ||(M^{-1}K - nu) v||_M for an M-normalized v.
inline double pencil_residual(const SpMat& K, const Eigen::VectorXd& M,
                              const Eigen::VectorXcd& v, double nu) {
  Eigen::VectorXcd r = K * v - nu * v.cwiseProduct(M.cast<cplx>());
  return std::sqrt((r.array().abs2() / M.array()).sum());
}

}  // namespace detail

// Assemble the discrete operator.  `flux` is the physical flux constant
// gamma0 (or 0); one-well variants gauge it away exactly.  Throws
// std::invalid_argument when the grid cannot resolve the tangential
// oscillation (the message includes the required n_s).
inline MagneticOperator2D assemble(const curve::ArcLengthTable& table,
                                   const curve::WellData& wells,
                                   const TubularGrid& grid, double flux,
                                   WellVariant variant = WellVariant::two_well) {
  if (grid.n_s < 4 || grid.n_tau < 16)
    throw std::invalid_argument("assemble: grid too small (n_s >= 4, n_tau >= 16)");
  if (!(grid.hbar > 0.0))
    throw std::invalid_argument("assemble: hbar must be positive");
  if (grid.tau_max < 12.0)
    throw std::invalid_argument("assemble: tau_max must be >= 12");

  MagneticOperator2D op;
  op.grid = grid;
  op.variant = variant;
  op.L = table.L;
  op.periodic = (variant == WellVariant::two_well);
  op.kappa_max = wells.kappa_max;
  op.k2 = wells.k2;
  op.s_r = wells.s_r;
  op.s_l = wells.s_l;

  const double hbar = grid.hbar;
  const double L = table.L;
  const double len = op.periodic ? 2.0 * L : 2.0 * L + 20.0;
  const int ns_req = detail::required_ns(len, hbar);
  if (grid.n_s < ns_req) {
    std::ostringstream os;
    os << "assemble: n_s = " << grid.n_s
       << " cannot resolve the tangential oscillation at hbar = " << hbar
       << "; need n_s >= " << ns_req;
    throw std::invalid_argument(os.str());
  }

  const int ns = grid.n_s, nt = grid.n_tau;
  op.d_tau = grid.tau_max / nt;
  op.sigma.resize(ns);
  op.kappa_nodes.resize(ns);

  if (op.periodic) {
    op.sigma_lo = -L;
    op.d_sigma = 2.0 * L / ns;
    for (int j = 0; j < ns; ++j) {
      op.sigma[j] = -L + j * op.d_sigma;
      op.kappa_nodes[j] = table.kappa_at(op.sigma[j]);
    }
    op.kappa_ext = [tab = table](double s) { return tab.kappa_at(s); };
  } else {
    // Right variant on [s_l - 2L - 10, s_l + 10]; left is its exact mirror,
    // built by reversing the right-variant curvature samples so the two
    // matrices are elementwise complex conjugates up to a permutation.
    const double lo_r = wells.s_l - 2.0 * L - 10.0;
    const double hi_r = wells.s_l + 10.0;
    op.d_sigma = (hi_r - lo_r) / (ns + 1);
    std::vector<double> kap_r(ns), sig_r(ns);
    for (int j = 0; j < ns; ++j) {
      sig_r[j] = lo_r + (j + 1) * op.d_sigma;
      kap_r[j] = detail::kappa_right_extended(table, wells.s_l, sig_r[j]);
    }
    if (variant == WellVariant::one_well_right) {
      op.sigma_lo = lo_r;
      op.sigma = sig_r;
      op.kappa_nodes = kap_r;
      op.kappa_ext = [tab = table, sl = wells.s_l](double s) {
        return detail::kappa_right_extended(tab, sl, s);
      };
    } else {
      op.sigma_lo = -hi_r;
      for (int j = 0; j < ns; ++j) {
        op.sigma[j] = -hi_r + (j + 1) * op.d_sigma;
        op.kappa_nodes[j] = kap_r[ns - 1 - j];
      }
      op.kappa_ext = [tab = table, sl = wells.s_l](double s) {
        return detail::kappa_right_extended(tab, sl, -s);
      };
    }
    flux = 0.0;  // gauged away on the non-periodic interval
  }
  op.flux = flux;

  op.mu_cut = detail::cutoff_scale(hbar, grid.eta, wells.kappa_max);
  op.tau_major = (ns < 2 * nt);

  const double dt = op.d_tau, ds = op.d_sigma, mu = op.mu_cut;
  const double F0 = flux / hbar;           // constant flux part of D
  const double theta = ds * F0 / hbar;     // covariant link phase
  const cplx phase = std::polar(1.0, theta);
  const cplx ibeta(0.0, hbar / (2.0 * ds));  // i*hbar/(2 d_sigma)
  const double lamw_base = kWilson * hbar * hbar / (4.0 * ds * ds);

  const int N = op.size();
  op.M.resize(N);
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<size_t>(N) * 40);

  double a_min = std::numeric_limits<double>::infinity(), a_max = 0.0;
  for (int j = 0; j < ns; ++j) {
    const double kap = op.kappa_nodes[j];
    for (int m = 0; m < nt; ++m) {
      const double tau = m * dt;
      const double a = detail::weight_a(hbar, mu, kap, tau);
      a_min = std::min(a_min, a);
      a_max = std::max(a_max, a);
      const double w = (m == 0) ? 0.5 : 1.0;
      const int p = op.index(j, m);
      op.M[p] = a * w;

      // Normal half-link between m and m+1 (m+1 == nt is the Dirichlet wall).
      const double ah = detail::weight_a(hbar, mu, kap, tau + 0.5 * dt);
      a_min = std::min(a_min, ah);
      const double cn = ah / (dt * dt);
      trips.emplace_back(p, p, cplx(cn, 0.0));
      if (m + 1 < nt) {
        const int q = op.index(j, m + 1);
        trips.emplace_back(q, q, cplx(cn, 0.0));
        trips.emplace_back(p, q, cplx(-cn, 0.0));
        trips.emplace_back(q, p, cplx(-cn, 0.0));
      }

      // Tangential row at (j, m): T = -i*hbar*C_theta + F_phys, contributing
      // (w/a) * conj(t_a) t_b to K[a, b] over the row's support. The covariant
      // difference C_theta is the 5-point 4th-order centered stencil
      // (symbol hbar*(8 sin X - sin 2X)/(6 ds), X = k ds + theta), which keeps
      // the accumulated dispersion phase error around the loop at the
      // milliradian level where the 3-point stencil would rotate the
      // interference phase by O(1); near clamped ends it degrades gracefully
      // to the 3-point stencil.
      const double lam = w / a;
      const double fj = detail::f_phys(hbar, mu, kap, tau);
      const bool five = op.periodic || (j > 1 && j + 2 < ns);
      int cols[5];
      cplx tv[5];
      int nc = 0;
      if (five) {
        const int jll = op.periodic ? (j + ns - 2) % ns : j - 2;
        const int jl = op.periodic ? (j + ns - 1) % ns : j - 1;
        const int jr = op.periodic ? (j + 1) % ns : j + 1;
        const int jrr = op.periodic ? (j + 2) % ns : j + 2;
        const cplx ib12(0.0, hbar / (12.0 * ds));  // i*hbar/(12 ds)
        cols[nc] = op.index(jll, m);
        tv[nc++] = -ib12 * std::conj(phase * phase);
        cols[nc] = op.index(jl, m);
        tv[nc++] = 8.0 * ib12 * std::conj(phase);
        cols[nc] = p;
        tv[nc++] = cplx(fj, 0.0);
        cols[nc] = op.index(jr, m);
        tv[nc++] = -8.0 * ib12 * phase;
        cols[nc] = op.index(jrr, m);
        tv[nc++] = ib12 * phase * phase;
      } else {
        if (j > 0) {
          cols[nc] = op.index(j - 1, m);
          tv[nc++] = ibeta * std::conj(phase);  // +i*hbar/(2ds) * e^{-i theta}
        }
        cols[nc] = p;
        tv[nc++] = cplx(fj, 0.0);
        if (j + 1 < ns) {
          cols[nc] = op.index(j + 1, m);
          tv[nc++] = -ibeta * phase;  // -i*hbar/(2ds) * e^{+i theta}
        }
      }
      for (int a1 = 0; a1 < nc; ++a1)
        for (int b1 = 0; b1 < nc; ++b1)
          trips.emplace_back(cols[a1], cols[b1], std::conj(tv[a1]) * tv[b1] * lam);

      // Covariant dispersion regularization at (j, m): the row
      // e^{-i theta} u_{j-1} - 2 u_j + e^{+i theta} u_{j+1} has symbol
      // 2 cos(k ds + theta) - 2, so lamw * |row|^2 adds the momentum penalty
      // described at kWilson. Tau-independent, so it cannot disturb the
      // normal structure; skipped at clamped ends of a one-well extension
      // where the state is exponentially small anyway.
      if (op.periodic || (j > 0 && j + 1 < ns)) {
        const int jl = op.periodic ? (j + ns - 1) % ns : j - 1;
        const int jr = op.periodic ? (j + 1) % ns : j + 1;
        const int wcols[3] = {op.index(jl, m), p, op.index(jr, m)};
        const cplx wtv[3] = {std::conj(phase), cplx(-2.0, 0.0), phase};
        for (int a1 = 0; a1 < 3; ++a1)
          for (int b1 = 0; b1 < 3; ++b1)
            trips.emplace_back(wcols[a1], wcols[b1],
                               std::conj(wtv[a1]) * wtv[b1] * (lamw_base * lam));
      }
    }
  }
  op.a_min = a_min;
  op.a_max = a_max;
  if (!(a_min > kWeightFloor))
    throw std::runtime_error("assemble: weight a dropped to " + std::to_string(a_min) +
                             "; cutoff margin violated");

  op.K.resize(N, N);
  op.K.setFromTriplets(trips.begin(), trips.end());
  op.K.makeCompressed();
  return op;
}

struct EigenSolveResult {
  double nu1 = 0.0, nu2 = 0.0;
  Eigen::VectorXcd v1, v2;  // M-orthonormal eigenvectors
  double residual1 = 0.0, residual2 = 0.0;
  int iterations = 0;
  int factorizations = 0;
};

// Lowest two eigenpairs of the pencil (K, M) by shift-invert block inverse
// iteration.  Default shift: Theta0 - C1*kappa_max*hbar - 5*hbar^2.  After a
// first sweep the shift is refined toward the Ritz values (one extra
// factorization) so clustered pairs converge fast.  Deterministic starts.
inline EigenSolveResult lowest_pair(const MagneticOperator2D& op,
                                    std::optional<double> shift_opt = std::nullopt) {
  const int N = op.size();
  const double hbar = op.grid.hbar;
  const double kmp = std::max(op.kappa_max, 0.0);
  double shift = shift_opt.value_or(kTheta0Policy - kC1Policy * kmp * hbar -
                                    5.0 * hbar * hbar);

  const Eigen::VectorXcd Mc = op.M.cast<cplx>();
  Eigen::SparseLU<SpMat> lu;
  int factorizations = 0;
  auto factorize = [&](double s) {
    SpMat A = op.K;
    SpMat D(N, N);
    D.setIdentity();
    for (int p = 0; p < N; ++p) D.coeffRef(p, p) = cplx(-s * op.M[p], 0.0);
    A = A + D;
    A.makeCompressed();
    if (factorizations == 0) lu.analyzePattern(A);
    lu.factorize(A);
    ++factorizations;
    return lu.info() == Eigen::Success;
  };

  // Factorization failure (shift on the spectrum): retry with perturbed
  // shifts, at most 5, then report.
  {
    double s = shift;
    int tries = 0;
    while (!factorize(s)) {
      if (++tries > 5)
        throw std::runtime_error("lowest_pair: sparse factorization failed after 5 perturbed shifts");
      s = shift - tries * std::max(hbar * hbar, 1e-3);
    }
    shift = s;
  }

  // Deterministic pseudo-random starts.  A block of 6 columns seeded across
  // the whole spectrum: translation-invariant geometries (flat strips) keep
  // discrete momentum sectors exactly invariant, so structured starts that
  // populate only a few sectors can converge to an interior eigenvalue with
  // a perfectly small residual.  Random columns populate every sector, and a
  // block wider than the target pair lets the Ritz step see (and step over)
  // degenerate interior pairs on its way down.
  const int q = 6;
  std::vector<Eigen::VectorXcd> xs(q, Eigen::VectorXcd(N));
  {
    std::uint64_t state = 0x2545F4914F6CDD1Dull;
    auto rnd = [&state]() {
      state += 0x9E3779B97F4A7C15ull;
      std::uint64_t z = state;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      z ^= z >> 31;
      return static_cast<double>(z >> 11) * 0x1.0p-53 - 0.5;
    };
    for (int c = 0; c < q; ++c)
      for (int p = 0; p < N; ++p) {
        const double re = rnd(), im = rnd();
        xs[c][p] = cplx(re, im);
      }
  }

  // M-modified-Gram-Schmidt with one re-orthogonalization pass; reseeds a
  // column deterministically if it degenerates.
  std::uint64_t reseed_state = 0x9E3779B97F4A7C15ull;
  auto orthonormalize = [&](std::vector<Eigen::VectorXcd>& v) {
    for (int c = 0; c < q; ++c) {
      for (int pass = 0; pass < 2; ++pass)
        for (int b = 0; b < c; ++b) v[c] -= detail::mdot(op.M, v[b], v[c]) * v[b];
      double n = detail::mnorm(op.M, v[c]);
      if (!(n > 1e-280)) {
        for (int p = 0; p < N; ++p) {
          reseed_state += 0x9E3779B97F4A7C15ull;
          std::uint64_t z = reseed_state;
          z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
          z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
          z ^= z >> 31;
          v[c][p] = cplx(static_cast<double>(z >> 11) * 0x1.0p-53 - 0.5, 0.0);
        }
        for (int b = 0; b < c; ++b) v[c] -= detail::mdot(op.M, v[b], v[c]) * v[b];
        n = detail::mnorm(op.M, v[c]);
      }
      v[c] /= n;
    }
  };

  const double tol = 1e-10;
  const int max_it = 400;
  const int max_factorizations = 8;
  double nu1 = shift, nu2 = shift, r1 = 1.0, r2 = 1.0;
  Eigen::VectorXcd x1, x2;
  int it = 0;
  for (; it < max_it; ++it) {
    // One shift-inverted power step on the block.
    std::vector<Eigen::VectorXcd> ys(q);
    for (int c = 0; c < q; ++c) ys[c] = lu.solve(xs[c].cwiseProduct(Mc));
    orthonormalize(ys);
    // Rayleigh-Ritz on the block.
    std::vector<Eigen::VectorXcd> ks(q);
    for (int c = 0; c < q; ++c) ks[c] = op.K * ys[c];
    Eigen::MatrixXcd B(q, q);
    for (int a1 = 0; a1 < q; ++a1)
      for (int b1 = a1; b1 < q; ++b1) {
        B(a1, b1) = ys[a1].dot(ks[b1]);
        B(b1, a1) = std::conj(B(a1, b1));
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(B);
    const Eigen::MatrixXcd U = es.eigenvectors();
    for (int c = 0; c < q; ++c) {
      xs[c].setZero(N);
      for (int b = 0; b < q; ++b) xs[c] += ys[b] * U(b, c);
    }
    nu1 = es.eigenvalues()(0);
    nu2 = es.eigenvalues()(1);
    // Residuals of the two lowest Ritz pairs, reusing the rotated K-images:
    // r = || M^{-1/2} (K - nu M) x ||  for M-normalized x.
    auto ritz_residual = [&](int c, double nu) {
      Eigen::VectorXcd kx = Eigen::VectorXcd::Zero(N);
      for (int b = 0; b < q; ++b) kx += ks[b] * U(b, c);
      double acc = 0.0;
      for (int p = 0; p < N; ++p) {
        const cplx rp = kx[p] - nu * op.M[p] * xs[c][p];
        acc += std::norm(rp) / op.M[p];
      }
      return std::sqrt(acc);
    };
    r1 = ritz_residual(0, nu1);
    r2 = ritz_residual(1, nu2);
    if (r1 <= tol && r2 <= tol) {
      ++it;
      break;
    }
    // Shift refinement: every 24 sweeps move the shift just below the lowest
    // Ritz value.  The margin 3*r1 covers the Ritz error (an eigenvalue lies
    // within r1 of nu1), so the new shift lands below the level the block is
    // converging to and clustered bands contract fast afterwards.
    if (it >= 24 && it % 24 == 0 && factorizations < max_factorizations) {
      const double margin =
          std::max(3.0 * r1, 1e-6 * std::max(1.0, std::abs(nu1)));
      double s2 = nu1 - margin;
      int tries = 0;
      while (!factorize(s2)) {
        if (++tries > 5)
          throw std::runtime_error("lowest_pair: refinement factorization failed");
        s2 -= tries * margin;
      }
    }
  }
  x1 = xs[0];
  x2 = xs[1];
  if (r1 > tol || r2 > tol) {
    std::ostringstream os;
    os << "lowest_pair: no convergence in " << max_it
       << " iterations; residuals " << r1 << ", " << r2;
    throw std::runtime_error(os.str());
  }

  EigenSolveResult out;
  out.nu1 = nu1;
  out.nu2 = nu2;
  out.v1 = x1;
  out.v2 = x2;
  out.residual1 = r1;
  out.residual2 = r2;
  out.iterations = it;
  out.factorizations = factorizations;
  return out;
}

// ---------------------------------------------------------------------------
// WKB quasimode and residual.

struct WkbResidual {
  double residual_norm = 0.0;  // ||(M^{-1}K - delta1) Psi||_M / ||Psi||_M
  double delta1 = 0.0;         // Theta0 - C1*kappa_max*hbar + delta13*hbar^{3/2}
};

namespace detail {

// Transverse fiber ground state u_{xi0} on the operator's tau grid (weight
// a = 1), discretized exactly like K_tau: half-cell mass at tau = 0,
// Dirichlet at tau_max.  Returned L^2(w*dtau)-normalized.
inline Eigen::VectorXd fiber_ground_state(int nt, double dt, double xi0) {
  std::vector<double> diag(nt), off(nt - 1);
  const double inv = 1.0 / (dt * dt);
  for (int m = 0; m < nt; ++m) {
    const double tau = m * dt;
    const double pot = (xi0 - tau) * (xi0 - tau);
    const double w = (m == 0) ? 0.5 : 1.0;
    // Symmetrized row of W^{-1/2}(K + pot*W)W^{-1/2}: every node carries the
    // link to m+1 (the last one reaches the Dirichlet wall), plus the link
    // to m-1 for interior nodes.
    const double k_diag = inv + (m > 0 ? inv : 0.0);
    diag[m] = k_diag / w + pot;
    if (m + 1 < nt) off[m] = -inv / std::sqrt(w);
  }
  auto eig = tridiag_eigs(diag, off, 1, 1, true);
  Eigen::VectorXd u(nt);
  double nrm2 = 0.0;
  for (int m = 0; m < nt; ++m) {
    const double w = (m == 0) ? 0.5 : 1.0;
    u[m] = eig.vectors(m, 0) / std::sqrt(w);
    nrm2 += w * u[m] * u[m] * dt;
  }
  u /= std::sqrt(nrm2);
  if (u[0] < 0.0) u = -u;
  return u;
}

}  // namespace detail

// Leading-order one-well quasimode on the operator grid:
//   Psi = hbar^{-1/8} f~_{1,0}(sigma) u_{xi0}(tau) e^{-Phi_r(sigma)/sqrt(hbar)}
//         e^{i sigma xi0 / hbar},
// where Phi_r is the Agmon distance from s_r in the one-well effective
// potential and f~_{1,0} solves the real transport equation
//   (mu2/2)(Phi' d_sigma + d_sigma Phi') f~ = delta13 f~,
// normalized by f~^2(0) = sqrt(g/pi) * A_u.
inline Eigen::VectorXcd wkb_quasimode(const MagneticOperator2D& op,
                                      const degennes::DeGennesConstants& dg,
                                      const effective::AgmonData& agmon) {
  if (op.variant != WellVariant::one_well_right)
    throw std::invalid_argument("wkb_quasimode: one-well-right operator required");
  const double hbar = op.grid.hbar;
  const int ns = op.grid.n_s, nt = op.grid.n_tau;
  const int ns_req = detail::required_ns(op.sigma.back() - op.sigma.front(), hbar);
  if (ns < ns_req) {
    std::ostringstream os;
    os << "wkb_quasimode: n_s = " << ns << " cannot resolve e^{i sigma xi0/hbar}; need >= "
       << ns_req;
    throw std::invalid_argument(os.str());
  }

  const double delta13 =
      dg.c1 * std::pow(dg.theta0, 0.25) * std::sqrt(1.5 * op.k2);

  // Effective potential along the extended curvature, V >= 0 with the single
  // well at s_r.
  auto Vfun = [&](double s) {
    return 2.0 * dg.c1 * (op.kappa_max - op.kappa_ext(s)) / dg.mu2;
  };
  // Agmon distance Phi(sigma_j) = |int_{s_r}^{sigma_j} sqrt(V)|, cumulative
  // trapezoid from the well outward; the straddle cells use the local
  // quadratic model Phi ~ g (sigma - s_r)^2 / 2.
  std::vector<double> sqv(ns), Phi(ns);
  for (int j = 0; j < ns; ++j) sqv[j] = std::sqrt(std::max(Vfun(op.sigma[j]), 0.0));
  int j0 = 0;
  while (j0 + 1 < ns && op.sigma[j0 + 1] <= op.s_r) ++j0;  // last node <= s_r
  const double g_well = agmon.g;
  Phi[j0] = 0.5 * g_well * (op.sigma[j0] - op.s_r) * (op.sigma[j0] - op.s_r);
  for (int j = j0 - 1; j >= 0; --j)
    Phi[j] = Phi[j + 1] + 0.5 * op.d_sigma * (sqv[j] + sqv[j + 1]);
  if (j0 + 1 < ns) {
    Phi[j0 + 1] =
        0.5 * g_well * (op.sigma[j0 + 1] - op.s_r) * (op.sigma[j0 + 1] - op.s_r);
    for (int j = j0 + 2; j < ns; ++j)
      Phi[j] = Phi[j - 1] + 0.5 * op.d_sigma * (sqv[j] + sqv[j - 1]);
  }

  // Transport amplitude: d(log f~)/dsigma = (delta13/mu2 - Phi''/2)/Phi',
  // regular at s_r because delta13 = mu2*g/2; integrate the log-derivative
  // by trapezoid from sigma = 0, where f~^2(0) = sqrt(g/pi)*A_u.
  const double dk = 1e-5;
  auto rhs_raw = [&](double s) {
    const double V = std::max(Vfun(s), 1e-300);
    const double dV =
        (Vfun(s + dk) - Vfun(s - dk)) / (2.0 * dk);  // V' via curvature
    const double phi1 = std::sqrt(V);
    const double phi2 = 0.5 * dV / phi1;  // (sqrt V)'
    const double sgn = (s >= op.s_r) ? 1.0 : -1.0;
    // Phi' = sgn*sqrt(V), Phi'' = sgn*(sqrt V)'.
    return (delta13 / dg.mu2 - 0.5 * sgn * phi2) / (sgn * phi1);
  };
  // Numerator and denominator both vanish linearly at the well (delta13 =
  // mu2*g/2 makes the transport equation regular there), so close to s_r the
  // quotient suffers catastrophic cancellation; bridge a small zone around
  // the well by linear interpolation of the two safe edge values.
  const double r0 = 0.02;
  const double rhs_m = rhs_raw(op.s_r - r0), rhs_p = rhs_raw(op.s_r + r0);
  auto rhs = [&](double s) {
    const double x = s - op.s_r;
    if (std::abs(x) >= r0) return rhs_raw(s);
    const double t = (x + r0) / (2.0 * r0);
    return rhs_m * (1.0 - t) + rhs_p * t;
  };
  // Cumulative integral of rhs from 0 to sigma_j on a refined grid.
  std::vector<double> logf(ns);
  {
    int jz = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < ns; ++j) {
      const double d = std::abs(op.sigma[j]);
      if (d < best) {
        best = d;
        jz = j;
      }
    }
    const double f0sq = std::sqrt(agmon.g / M_PI) * agmon.A_u;
    logf[jz] = 0.5 * std::log(f0sq) + 0.0;
    // Correct for sigma_{jz} != 0 exactly by one trapezoid step.
    logf[jz] += 0.5 * (rhs(0.0) + rhs(op.sigma[jz])) * (op.sigma[jz] - 0.0);
    std::vector<double> rv(ns);
    for (int j = 0; j < ns; ++j) rv[j] = rhs(op.sigma[j]);
    for (int j = jz + 1; j < ns; ++j)
      logf[j] = logf[j - 1] + 0.5 * op.d_sigma * (rv[j] + rv[j - 1]);
    for (int j = jz - 1; j >= 0; --j)
      logf[j] = logf[j + 1] - 0.5 * op.d_sigma * (rv[j] + rv[j + 1]);
  }

  const Eigen::VectorXd u = detail::fiber_ground_state(nt, op.d_tau, dg.xi0);
  Eigen::VectorXcd psi(op.size());
  const double shalf = std::sqrt(hbar);
  const double amp0 = std::pow(hbar, -0.125);
  for (int j = 0; j < ns; ++j) {
    const double env = amp0 * std::exp(logf[j] - Phi[j] / shalf);
    const cplx osc = std::polar(env, op.sigma[j] * dg.xi0 / hbar);
    for (int m = 0; m < nt; ++m) psi[op.index(j, m)] = osc * u[m];
  }
  return psi;
}

inline WkbResidual wkb_residual(const MagneticOperator2D& op,
                                const degennes::DeGennesConstants& dg,
                                const effective::AgmonData& agmon, double hbar) {
  if (std::abs(hbar - op.grid.hbar) > 1e-12)
    throw std::invalid_argument("wkb_residual: hbar does not match the operator grid");
  const Eigen::VectorXcd psi = wkb_quasimode(op, dg, agmon);
  const double delta13 =
      dg.c1 * std::pow(dg.theta0, 0.25) * std::sqrt(1.5 * op.k2);
  WkbResidual out;
  out.delta1 = dg.theta0 - dg.c1 * op.kappa_max * hbar +
               delta13 * std::pow(hbar, 1.5);
  const double nrm = detail::mnorm(op.M, psi);
  out.residual_norm = detail::pencil_residual(op.K, op.M, psi / nrm, out.delta1);
  return out;
}

// ---------------------------------------------------------------------------
// Decay diagnostics.

struct DecayReport {
  double normal_ratio = 0.0;        // ||e^{alpha tau} v|| / ||v||, alpha = 0.25
  double tail_mass_fraction = 0.0;  // weighted mass fraction in tau > 6
  std::vector<double> profile;      // p(sigma) = ||v1(sigma, .)||_M
  std::vector<double> profile2;     // same for v2
  double worst_agmon_margin = 0.0;  // min over eligible sigma of lhs - rhs
  bool agmon_ok = false;
  bool normal_ok = false;
  int peak_index = -1;  // argmax of the v1 profile
};

// Normal/tangential localization report for a converged eigenpair of a
// two-well operator.  The tangential check verifies
//   -sqrt(hbar) log p(sigma) >= (1-theta) min(Phi_r, Phi_l)(sigma) - eps,
// theta = 0.1, eps = 0.2*S, at nodes farther than 0.1*L from both wells.
// The Agmon vectors are samples on the uniform grid [-L, L) used by the
// effective-potential module.
inline DecayReport decay_diagnostics(const MagneticOperator2D& op,
                                     const EigenSolveResult& result,
                                     const effective::AgmonData& agmon,
                                     double hbar) {
  const int ns = op.grid.n_s, nt = op.grid.n_tau;
  DecayReport rep;

  double num = 0.0, den = 0.0, tail = 0.0;
  rep.profile.assign(ns, 0.0);
  rep.profile2.assign(ns, 0.0);
  for (int j = 0; j < ns; ++j)
    for (int m = 0; m < nt; ++m) {
      const int p = op.index(j, m);
      const double tau = m * op.d_tau;
      const double w2 = std::norm(result.v1[p]) * op.M[p];
      rep.profile[j] += w2;
      rep.profile2[j] += std::norm(result.v2[p]) * op.M[p];
      den += w2;
      num += std::exp(0.5 * tau) * w2;  // (e^{0.25 tau})^2
      if (tau > 6.0) tail += w2;
    }
  for (double& x : rep.profile) x = std::sqrt(x);
  for (double& x : rep.profile2) x = std::sqrt(x);
  rep.normal_ratio = std::sqrt(num / den);
  rep.tail_mass_fraction = tail / den;
  rep.normal_ok = std::isfinite(rep.normal_ratio) && rep.tail_mass_fraction <= 1e-6;
  rep.peak_index =
      static_cast<int>(std::max_element(rep.profile.begin(), rep.profile.end()) -
                       rep.profile.begin());

  // Tangential Agmon bound (two-well geometry only).
  if (op.periodic) {
    const double theta = 0.1, eps = 0.2 * agmon.S;
    const double excl = 0.1 * op.L;
    const double period = 2.0 * op.L;
    auto wrap_abs = [period](double x) {
      double d = std::fmod(std::abs(x), period);
      return std::min(d, period - d);
    };
    const int n_tab = static_cast<int>(agmon.Phi_r.size());
    const double ds_tab = period / n_tab;
    auto interp = [&](const std::vector<double>& f, double s) {
      double t = (s + op.L) / ds_tab;
      int i = static_cast<int>(std::floor(t));
      const double fr = t - i;
      i = ((i % n_tab) + n_tab) % n_tab;
      const int i1 = (i + 1) % n_tab;
      return f[i] * (1.0 - fr) + f[i1] * fr;
    };
    // The stored Phi arrays accumulate sqrt(V) one way around the loop from
    // each well (the convention the arc actions need); the decay bound wants
    // the geodesic distance, i.e. the smaller of the two ways around.
    const double loop = agmon.S_u + agmon.S_d;
    auto dist = [&](const std::vector<double>& f, double s) {
      const double one_way = interp(f, s);
      return std::min(one_way, loop - one_way);
    };
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 0; j < ns; ++j) {
      const double s = op.sigma[j];
      if (wrap_abs(s - op.s_r) < excl || wrap_abs(s - op.s_l) < excl) continue;
      const double p = rep.profile[j];
      if (p < 1e-13) continue;  // below solver noise floor
      const double lhs = -std::sqrt(hbar) * std::log(p);
      const double bound =
          (1.0 - theta) * std::min(dist(agmon.Phi_r, s), dist(agmon.Phi_l, s)) -
          eps;
      worst = std::min(worst, lhs - bound);
    }
    rep.worst_agmon_margin = worst;
    rep.agmon_ok = worst >= 0.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Convenience drivers.

// Tangential point count for `ppw` points per oscillation wavelength
// 2*pi*hbar/xi0 over tangential extent `len`.
inline int tangential_points(double len, double hbar, int ppw) {
  return static_cast<int>(std::ceil(ppw * len * kXi0Policy / (2.0 * M_PI * hbar)));
}

struct ExtrapolatedPair {
  double nu1 = 0.0, nu2 = 0.0;      // Richardson-extrapolated
  double nu1_c = 0.0, nu2_c = 0.0;  // coarse-grid values
  double nu1_s = 0.0, nu2_s = 0.0;  // refined-in-sigma values
  double nu1_t = 0.0, nu2_t = 0.0;  // refined-in-tau values
  int ns_coarse = 0, ntau_coarse = 0;
};

// Solve on (ppw, ntau), (2*ppw, ntau), (ppw, 2*ntau) and remove the leading
// O(d_sigma^2) + O(d_tau^2) errors additively.
inline ExtrapolatedPair solve_extrapolated(const curve::ArcLengthTable& table,
                                           const curve::WellData& wells,
                                           double hbar, double flux,
                                           WellVariant variant,
                                           int ppw = 24, int ntau = 128,
                                           double tau_max = 12.0) {
  const double len = (variant == WellVariant::two_well)
                         ? 2.0 * table.L
                         : 2.0 * table.L + 20.0;
  ExtrapolatedPair out;
  out.ns_coarse = tangential_points(len, hbar, ppw);
  out.ntau_coarse = ntau;
  auto run = [&](int ns, int nt) {
    TubularGrid g{ns, nt, hbar, tau_max, 0.1};
    const MagneticOperator2D op = assemble(table, wells, g, flux, variant);
    return lowest_pair(op);
  };
  const EigenSolveResult rc = run(out.ns_coarse, ntau);
  const EigenSolveResult rs = run(2 * out.ns_coarse, ntau);
  const EigenSolveResult rt = run(out.ns_coarse, 2 * ntau);
  out.nu1_c = rc.nu1;
  out.nu2_c = rc.nu2;
  out.nu1_s = rs.nu1;
  out.nu2_s = rs.nu2;
  out.nu1_t = rt.nu1;
  out.nu2_t = rt.nu2;
  // Leading errors are additive in the two directions. In ds the 4th-order
  // stencil leaves the dispersion-regularization penalty's smooth ds^2 shift
  // as the dominant term, so the classic 4/3 weight cancels it exactly (the
  // ds^4 stencil remainder is ~1e-6 at 24 points per wavelength); in dt the
  // normal stencil is plain 2nd order.
  out.nu1 =
      rc.nu1 + 4.0 / 3.0 * (rs.nu1 - rc.nu1) + 4.0 / 3.0 * (rt.nu1 - rc.nu1);
  out.nu2 =
      rc.nu2 + 4.0 / 3.0 * (rs.nu2 - rc.nu2) + 4.0 / 3.0 * (rt.nu2 - rc.nu2);
  return out;
}

// ---------------------------------------------------------------------------
// Sweep CSV.

struct SweepPoint {
  double hbar = 0.0;
  double nu1 = 0.0, nu2 = 0.0;
  double residual1 = 0.0, residual2 = 0.0;
  int ns = 0, ntau = 0;
};

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& rows) {
  os << "# hbar: semiclassical parameter (h = hbar^2); nu1, nu2: lowest pencil "
        "eigenvalues; gap = nu2 - nu1; lambda_i = h*nu_i; gap_lambda = h*gap; "
        "residual_i: solver residuals; ns, ntau: grid\n";
  os << "hbar,h,nu1,nu2,gap,lambda1,lambda2,gap_lambda,residual1,residual2,ns,ntau\n";
  char buf[512];
  for (const auto& r : rows) {
    const double h = r.hbar * r.hbar;
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3g,%.3g,%d,%d\n",
                  r.hbar, h, r.nu1, r.nu2, r.nu2 - r.nu1, h * r.nu1, h * r.nu2,
                  h * (r.nu2 - r.nu1), r.residual1, r.residual2, r.ns, r.ntau);
    os << buf;
  }
}

inline void write_sweep_csv(const std::string& path,
                            const std::vector<SweepPoint>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_sweep_csv: cannot open " + path);
  write_sweep_csv(f, rows);
}

}  // namespace magsplit::boundary2d
