#pragma once

// Half-line model operator D_t^2 + (xi - t)^2 with Neumann condition at
// t = 0: band functions mu_n(xi), the minimizing pair (xi0, Theta0), the
// boundary-value constant C1, the band curvature mu1''(xi0), moment
// identities, and the deflated-resolvent coefficient C2(xi, z).
//
// Discretization: uniform grid t_i = i*dt, i = 0..n-1, Dirichlet cut at
// t_max, Neumann ghost point at 0. The non-symmetric Neumann corner row is
// symmetrized by the half-weight similarity D = diag(1/2, 1, ..., 1):
// B = D^{1/2} A D^{-1/2}, which turns the corner entry into -sqrt(2)/dt^2
// and makes the discrete eigenproblem self-adjoint in the trapezoid inner
// product <f, g> = sum_i w_i f_i g_i, w_0 = dt/2, w_i = dt.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "magsplit/numerics.hpp"
#include "magsplit/tridiag.hpp"

namespace magsplit::degennes {

struct HalfLineGrid {
  double t_max = 20.0;
  int n = 2000;
  double dt() const { return t_max / n; }
  void validate() const {
    if (t_max < 15.0) throw std::invalid_argument("HalfLineGrid: t_max must be >= 15");
    if (n < 2000) throw std::invalid_argument("HalfLineGrid: n must be >= 2000");
  }
};

struct BandPoint {
  double xi = 0.0;
  double mu = 0.0;
  Eigen::VectorXd u;  // trapezoid-normalized, u(0) > 0
  int n_band = 1;
};

struct DeGennesConstants {
  double theta0 = 0.0;
  double xi0 = 0.0;
  double c1 = 0.0;   // u0^2 / 3
  double mu2 = 0.0;  // mu1''(xi0)
  double u0 = 0.0;   // boundary value of the normalized ground state
};

namespace detail {

inline void fill_tridiag(const HalfLineGrid& g, double xi, std::vector<double>& diag,
                         std::vector<double>& off) {
  const double dt = g.dt();
  const double inv2 = 1.0 / (dt * dt);
  diag.resize(g.n);
  off.resize(g.n - 1);
  for (int i = 0; i < g.n; ++i) {
    const double t = i * dt;
    diag[i] = 2.0 * inv2 + (xi - t) * (xi - t);
  }
  off[0] = -std::sqrt(2.0) * inv2;
  for (int i = 1; i < g.n - 1; ++i) off[i] = -inv2;
}

// Weights of the trapezoid inner product on the grid.
inline double weight(const HalfLineGrid& g, int i) {
  return (i == 0) ? 0.5 * g.dt() : g.dt();
}

}  // namespace detail

// Raw band value on the given grid (no extrapolation).
inline double mu_band_raw(const HalfLineGrid& g, double xi, int n_band = 1) {
  g.validate();
  std::vector<double> diag, off;
  detail::fill_tridiag(g, xi, diag, off);
  return tridiag_eigs(std::move(diag), std::move(off), n_band, n_band, false)
      .values[0];
}

// Band value with one Richardson pass over grids n and 2n (O(dt^4) error).
inline double mu_band(const HalfLineGrid& g, double xi, int n_band = 1) {
  const double coarse = mu_band_raw(g, xi, n_band);
  HalfLineGrid fine{g.t_max, 2 * g.n};
  return richardson(coarse, mu_band_raw(fine, xi, n_band));
}

// Eigenpair on the given grid. The eigenvector is mapped back from the
// symmetrized coordinates (u_0 = sqrt(2) v_0) and normalized to 1 in the
// trapezoid inner product, with u(0) > 0.
inline BandPoint band_point(const HalfLineGrid& g, double xi, int n_band = 1) {
  g.validate();
  std::vector<double> diag, off;
  detail::fill_tridiag(g, xi, diag, off);
  auto eig = tridiag_eigs(std::move(diag), std::move(off), n_band, n_band, true);
  BandPoint bp;
  bp.xi = xi;
  bp.mu = eig.values[0];
  bp.n_band = n_band;
  const double inv_sqrt_dt = 1.0 / std::sqrt(g.dt());
  bp.u = eig.vectors.col(0) * inv_sqrt_dt;
  bp.u[0] *= std::sqrt(2.0);
  if (bp.u[0] < 0.0) bp.u = -bp.u;
  return bp;
}

// Exact slope of the discrete band on one grid: for the trapezoid-normalized
// eigenvector, d(mu)/d(xi) = 2 sum_i w_i (xi - t_i) u_i^2. This is the
// Hellmann-Feynman identity applied to the matrix itself, so it holds at
// every xi with no finite-difference error.
namespace detail {
inline double band_slope_raw(const HalfLineGrid& g, double xi) {
  BandPoint bp = band_point(g, xi);
  const double dt = g.dt();
  double i1 = 0.0;
  for (int i = 0; i < g.n; ++i)
    i1 += weight(g, i) * (xi - i * dt) * bp.u[i] * bp.u[i];
  return 2.0 * i1;
}
}  // namespace detail

// Slope of the Richardson-refined band: the n/2n combination commutes with
// d/d(xi), so this is the exact derivative of the extrapolated band.
inline double band_slope(const HalfLineGrid& g, double xi) {
  HalfLineGrid fine{g.t_max, 2 * g.n};
  return richardson(detail::band_slope_raw(g, xi),
                    detail::band_slope_raw(fine, xi));
}

struct MinimizeResult {
  double xi0 = 0.0;
  double theta0 = 0.0;
};

// Minimum of the first band over a bracket inside (0, 2). Brent narrows the
// bracket on the Richardson-refined band; the minimizer itself is the root
// of the exact band slope, solved to near machine precision. This sidesteps
// the flat-valley limit of a direct minimum search (~sqrt(eps) accuracy).
inline MinimizeResult minimize_mu1(const HalfLineGrid& g, double lo = 0.2,
                                   double hi = 1.5) {
  auto f = [&](double xi) { return mu_band(g, xi); };
  auto [xi_b, mu_b] = brent_min(f, lo, hi, 20);
  (void)mu_b;
  auto slope = [&](double xi) { return band_slope(g, xi); };
  double a = xi_b - 2e-3, b = xi_b + 2e-3;
  double fa = slope(a), fb = slope(b);
  int guard = 0;
  while (fa * fb > 0.0 && guard++ < 6) {  // widen if brent landed off-center
    a -= 4e-3;
    b += 4e-3;
    fa = slope(a);
    fb = slope(b);
  }
  if (fa * fb > 0.0)
    throw std::runtime_error("minimize_mu1: band slope not bracketed");
  boost::math::tools::eps_tolerance<double> tol(48);
  std::uintmax_t iters = 80;
  auto [xl, xr] = boost::math::tools::toms748_solve(slope, a, b, fa, fb, tol, iters);
  MinimizeResult r;
  r.xi0 = 0.5 * (xl + xr);
  r.theta0 = f(r.xi0);
  return r;
}

// All scalar constants of the model operator. u0 is Richardson-refined from
// the boundary node of the n and 2n eigenvectors. mu1'' is the centered
// FIRST difference of the exact (Hellmann-Feynman) band slope with one
// Richardson pass in the step: differencing the exact slope once keeps the
// noise floor near 1e-8, whereas a second difference of the band itself
// amplifies eigenvalue noise by 4/d^2 (~1e-5 at d = 1e-3).
inline DeGennesConstants constants(const HalfLineGrid& g) {
  DeGennesConstants c;
  auto m = minimize_mu1(g);
  c.xi0 = m.xi0;
  c.theta0 = m.theta0;
  const double u0_coarse = band_point(g, c.xi0).u[0];
  HalfLineGrid fine{g.t_max, 2 * g.n};
  const double u0_fine = band_point(fine, c.xi0).u[0];
  c.u0 = richardson(u0_coarse, u0_fine);
  c.c1 = c.u0 * c.u0 / 3.0;
  auto dslope = [&](double d) {
    return (band_slope(g, c.xi0 + d) - band_slope(g, c.xi0 - d)) / (2.0 * d);
  };
  c.mu2 = richardson(dslope(2e-3), dslope(1e-3));
  return c;
}

struct MomentResiduals {
  double r1 = 0.0;  // |int (xi - t) u^2|, vanishes at xi0
  double r2 = 0.0;  // |1 + 2 int (xi - t) u du/dxi - mu1''/2|, identity at xi0
  double fh = 0.0;  // |mu1'(xi) - 2 int (xi - t) u^2|, any xi
};

// mu2_half = mu1''(xi0)/2 must be supplied (from constants()); dxi is the
// step of the centered eigenvector difference. Both moment integrals are
// assembled on grids n and 2n and Richardson-combined, so that they track
// the extrapolated band whose stationary point defines xi0 (the raw-grid
// integrals are offset by the O(dt^2) shift of each grid's own minimizer).
inline MomentResiduals moment_residuals(const HalfLineGrid& g, double xi,
                                        double mu2_half, double dxi = 1e-3) {
  auto one = [&](const HalfLineGrid& gg, double& i1, double& i2) {
    BandPoint c = band_point(gg, xi);
    BandPoint p = band_point(gg, xi + dxi);
    BandPoint q = band_point(gg, xi - dxi);
    const double dt = gg.dt();
    i1 = 0.0;
    i2 = 0.0;
    for (int i = 0; i < gg.n; ++i) {
      const double w = detail::weight(gg, i);
      const double x = xi - i * dt;
      const double du = (p.u[i] - q.u[i]) / (2.0 * dxi);
      i1 += w * x * c.u[i] * c.u[i];
      i2 += w * x * c.u[i] * du;
    }
  };
  double i1c = 0.0, i2c = 0.0, i1f = 0.0, i2f = 0.0;
  one(g, i1c, i2c);
  HalfLineGrid fine{g.t_max, 2 * g.n};
  one(fine, i1f, i2f);
  const double i1 = richardson(i1c, i1f);
  const double i2 = richardson(i2c, i2f);
  MomentResiduals r;
  r.r1 = std::abs(i1);
  r.r2 = std::abs(1.0 + 2.0 * i2 - mu2_half);
  const double dmu = (mu_band(g, xi + dxi) - mu_band(g, xi - dxi)) / (2.0 * dxi);
  r.fh = std::abs(dmu - 2.0 * i1);
  return r;
}

struct C2Result {
  double c2 = 0.0;
  double ortho = 0.0;  // |<w, u>| of the deflated solve, should be ~0
  double tail = 0.0;   // norm of the expansion remainder outside the first K bands
  int bands_used = 0;
};

// C2(xi, z) = 1 - 4 <(T - z)^{-1}_perp P_perp[(xi-t)u], (xi-t)u>, with the
// resolvent restricted to the orthogonal complement of the ground state.
// Spectral expansion over bands 2..K with K doubled until the value settles;
// exact deflation makes z = mu_1 (in particular z = Theta0) regular.
// Throws if z comes within 1e-6 of the deflated spectrum.
inline C2Result c2(const HalfLineGrid& g, double xi, double z) {
  g.validate();
  std::vector<double> diag, off;
  detail::fill_tridiag(g, xi, diag, off);
  const int k_max = std::min(g.n, 4096);
  auto eig = tridiag_eigs(diag, off, 1, k_max, true);
  // symmetrized coordinates: phi_i = sqrt(w_i) f_i, so LAPACK's l2-orthonormal
  // eigenvectors represent the trapezoid-orthonormal eigenfunctions directly
  Eigen::VectorXd r_phi(g.n);
  const double dt = g.dt();
  {
    Eigen::VectorXd v0 = eig.vectors.col(0);
    if (v0[0] < 0.0) v0 = -v0;  // u(0) > 0 convention
    for (int i = 0; i < g.n; ++i) {
      const double u_i = v0[i];  // phi-coordinates of the normalized ground state
      r_phi[i] = (xi - i * dt) * u_i;
    }
  }
  for (int k = 1; k < k_max; ++k) {
    if (std::abs(eig.values[k] - z) < 1e-6)
      throw std::runtime_error("c2: z within 1e-6 of the deflated spectrum");
  }
  const double rnorm2 = r_phi.squaredNorm();
  double sum = 0.0, proj2 = 0.0;
  const double c0 = eig.vectors.col(0).dot(r_phi);
  proj2 = c0 * c0;
  C2Result out;
  Eigen::VectorXd w_phi = Eigen::VectorXd::Zero(g.n);
  double prev = std::numeric_limits<double>::quiet_NaN();
  int k = 1;
  int checkpoint = 32;
  for (; k < k_max; ++k) {
    const double ck = eig.vectors.col(k).dot(r_phi);
    sum += ck * ck / (eig.values[k] - z);
    w_phi += (ck / (eig.values[k] - z)) * eig.vectors.col(k);
    proj2 += ck * ck;
    if (k + 1 == checkpoint || k + 1 == k_max) {
      const double val = 1.0 - 4.0 * sum;
      if (!std::isnan(prev) && std::abs(val - prev) <= 1e-9) {
        ++k;
        break;
      }
      prev = val;
      checkpoint *= 2;
    }
  }
  out.bands_used = k;
  out.c2 = 1.0 - 4.0 * sum;
  out.tail = std::sqrt(std::max(0.0, rnorm2 - proj2));
  out.ortho = std::abs(eig.vectors.col(0).dot(w_phi));
  return out;
}

}  // namespace magsplit::degennes
