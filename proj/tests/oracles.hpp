#pragma once

// Test-only oracles, independent of the library's finite-difference path.
//
// The half-line band values are recomputed by shooting on the Weber ODE
// y'' = ((xi - t)^2 - mu) y from t = T inward, starting on the decaying
// asymptotic branch y ~ exp(-(t-xi)^2/2) (t-xi)^{(mu-1)/2}, with the
// Neumann defect y'(0) driven to zero over mu. Integrating the decaying
// branch inward is the stable direction; the state is renormalized on the
// fly to avoid overflow.
//
// Frozen reference values below were produced by an external computation
// with parabolic cylinder functions (root of dU/dz(-mu/2, -sqrt(2) xi) in mu,
// minimized over xi; norm integrals by adaptive quadrature).

#include <cmath>
#include <stdexcept>
#include <utility>

#include <boost/math/tools/roots.hpp>

namespace oracle {

// kXi0 is sqrt(kTheta0): the minimizer satisfies xi0^2 = Theta0 exactly, and
// the minimum VALUE is quadratically insensitive to argument error, so the
// square root inherits the tighter tolerance (a direct argmin is ~1e-8 at
// best because the band is flat at the bottom).
inline constexpr double kXi0 = 0.768183653139;     // +- 4e-9
inline constexpr double kTheta0 = 0.590106124950;  // +- 2e-9
inline constexpr double kU0 = 0.873043141761;      // +- 2e-7
inline constexpr double kC1 = 0.254068109126;      // u0^2/3, +- 2e-7
inline constexpr double kMu2 = 1.17102581;         // mu1''(xi0), +- 5e-7
inline constexpr double kMu1_at_076 = 0.590145442999;
inline constexpr double kMu1_at_03 = 0.734722979869;
inline constexpr double kMu1_at_15 = 0.801493661016;
inline constexpr double kMu2Band_at_xi0 = 3.316056443169;
inline constexpr double kMu2Band_at_05 = 3.794174816187;

// Neumann defect y'(0), scale-normalized; its zeros in mu are the bands.
inline double neumann_defect(double xi, double mu, double T = 16.0,
                             int steps_per_unit = 4096) {
  const double h = -1.0 / steps_per_unit;  // integrate inward
  double t = T;
  double y = 1.0;
  double yp = (-(T - xi) + (mu - 1.0) / (2.0 * (T - xi))) * y;
  auto f = [&](double tt, double yy) { return ((xi - tt) * (xi - tt) - mu) * yy; };
  const long nsteps = std::lround(T * steps_per_unit);
  for (long k = 0; k < nsteps; ++k) {
    const double k1y = yp, k1p = f(t, y);
    const double k2y = yp + 0.5 * h * k1p, k2p = f(t + 0.5 * h, y + 0.5 * h * k1y);
    const double k3y = yp + 0.5 * h * k2p, k3p = f(t + 0.5 * h, y + 0.5 * h * k2y);
    const double k4y = yp + h * k3p, k4p = f(t + h, y + h * k3y);
    y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    yp += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    t += h;
    const double m = std::max(std::abs(y), std::abs(yp));
    if (m > 1e100) {
      y /= m;
      yp /= m;
    }
  }
  const double scale = std::max(std::abs(y), std::abs(yp));
  return yp / scale;
}

// Band value by bracketed root search on the Neumann defect.
inline double mu_band_shoot(double xi, double mu_lo, double mu_hi) {
  auto F = [&](double mu) { return neumann_defect(xi, mu); };
  double flo = F(mu_lo), fhi = F(mu_hi);
  if (flo * fhi > 0.0) throw std::runtime_error("mu_band_shoot: bracket does not straddle");
  boost::math::tools::eps_tolerance<double> tol(48);
  std::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(F, mu_lo, mu_hi, flo, fhi, tol, it);
  return 0.5 * (r.first + r.second);
}

}  // namespace oracle
