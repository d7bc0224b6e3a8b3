#pragma once

// Small numerical building blocks shared across the library: Richardson
// extrapolation, fixed-panel Simpson quadrature, parabola fits, and the
// C^2 cutoff profile used by the 2D operator.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

namespace magsplit {

// Eliminates the leading O(step^order) error given values at step and
// step/ratio. Returns the extrapolated value.
inline double richardson(double coarse, double fine, double ratio = 2.0,
                         double order = 2.0) {
  const double r = std::pow(ratio, order);
  return fine + (fine - coarse) / (r - 1.0);
}

// Composite Simpson on [a,b] with n panels (n must be even and >= 2).
template <class F>
double simpson(F&& f, double a, double b, int n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("simpson: n must be even >= 2");
  const double h = (b - a) / n;
  double odd = 0.0, even = 0.0;
  for (int i = 1; i < n; i += 2) odd += f(a + i * h);
  for (int i = 2; i < n; i += 2) even += f(a + i * h);
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

// Trapezoid rule over uniformly spaced samples.
inline double trapezoid(const std::vector<double>& y, double dx) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * dx;
}

// Vertex of the parabola through (x0-d, ym), (x0, yc), (x0+d, yp).
// Returns {x_vertex, y_vertex}; requires a strict interior minimum/maximum.
inline std::pair<double, double> parabola_vertex(double x0, double d, double ym,
                                                 double yc, double yp) {
  const double denom = ym - 2.0 * yc + yp;
  if (denom == 0.0) return {x0, yc};
  const double delta = 0.5 * (ym - yp) / denom;
  const double yv = yc - 0.25 * (ym - yp) * delta;
  return {x0 + delta * d, yv};
}

// Brent minimization on [lo, hi]; returns {argmin, min}.
template <class F>
std::pair<double, double> brent_min(F&& f, double lo, double hi, int bits = 40) {
  auto r = boost::math::tools::brent_find_minima(std::forward<F>(f), lo, hi, bits);
  return {r.first, r.second};
}

// Quintic smoothstep: 0 at y<=0, 1 at y>=1, C^2 across both ends.
inline double smoothstep2(double y) {
  if (y <= 0.0) return 0.0;
  if (y >= 1.0) return 1.0;
  return y * y * y * (10.0 + y * (-15.0 + 6.0 * y));
}

// Cutoff profile c(x): 1 on [0,1], 0 on [2,inf), C^2 monotone in between.
inline double cutoff_profile(double x) { return 1.0 - smoothstep2(x - 1.0); }

// log(exp(a) + exp(b)) without overflow; either argument may be -inf.
inline double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-(std::abs(a - b))));
}

// Centered second difference with one Richardson pass in the step.
template <class F>
double second_derivative(F&& f, double x, double d) {
  const double fc = f(x);
  auto d2 = [&](double step) {
    return (f(x + step) - 2.0 * fc + f(x - step)) / (step * step);
  };
  return richardson(d2(2.0 * d), d2(d));
}

}  // namespace magsplit
