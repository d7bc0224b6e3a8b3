#pragma once

// Planar boundary geometry: closed counter-clockwise curves (analytic
// ellipse or sampled point list), arclength reparametrization, curvature,
// the two curvature wells of a symmetric domain, and the flux constant
// gamma0 = |Omega| / (2L).
//
// Conventions fixed across the project:
//   * s = 0 at the UPPER intersection of the boundary with the vertical
//     symmetry axis; s increases counter-clockwise; s lives on [-L, L)
//     where L is the HALF-length of the boundary. The bottom symmetry
//     point is s = +-L (the wrap point).
//   * The right-hand curvature well has s_r in (-L, 0), the left-hand one
//     s_l = -s_r in (0, L).
//   * Curvature is positive on convex counter-clockwise arcs.
//
// Sampled curves are interpolated with chord-length-parametrized periodic
// cubic splines (C^2, as needed for kappa''). Spline POSITIONS are
// O(h^4)-accurate while spline second derivatives are only O(h^2), so the
// arclength table computes curvature from 5-point finite differences of
// positions resampled at exact arclength offsets; that keeps the table's
// kappa at the 1e-8..1e-9 level on smooth dense inputs instead of ~1e-5.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_interp.h>
#include <gsl/gsl_spline.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "magsplit/numerics.hpp"

namespace magsplit::curve {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Error taxonomy. ValidationError: the input fails to be a closed, simple,
// counter-clockwise, symmetric curve. DegenerateParametrization: |M'| ~ 0
// somewhere (duplicate consecutive samples, cusps). NoWellsError: constant
// curvature, nothing to localize. AssumptionViolation: the curve is a valid
// domain but its curvature landscape breaks the two-symmetric-wells model
// (wrong count, on-axis maxima, asymmetric pair, degenerate k2).
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class DegenerateParametrization : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class NoWellsError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class AssumptionViolation : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline int disable_gsl_abort() {
  gsl_set_error_handler_off();
  return 0;
}
inline const int gsl_abort_disabled = disable_gsl_abort();

// RAII periodic cubic spline v(u) over strictly increasing knots u[0..m]
// with v[m] == v[0]. Evaluation wraps the argument into the knot range and
// passes a null accelerator, which keeps queries thread-safe (GSL falls
// back to a plain binary search).
class PeriodicSpline {
 public:
  PeriodicSpline(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size() || u.size() < 5)
      throw std::invalid_argument("PeriodicSpline: need >= 5 matching knots");
    u0_ = u.front();
    period_ = u.back() - u.front();
    if (!(period_ > 0.0))
      throw std::invalid_argument("PeriodicSpline: knots must increase");
    sp_.reset(gsl_spline_alloc(gsl_interp_cspline_periodic, u.size()));
    if (!sp_ || gsl_spline_init(sp_.get(), u.data(), v.data(), u.size()) != 0)
      throw std::runtime_error("PeriodicSpline: initialization failed");
  }

  double eval(double u) const { return gsl_spline_eval(sp_.get(), wrap(u), nullptr); }
  double deriv(double u) const { return gsl_spline_eval_deriv(sp_.get(), wrap(u), nullptr); }
  double deriv2(double u) const { return gsl_spline_eval_deriv2(sp_.get(), wrap(u), nullptr); }
  double period() const { return period_; }

 private:
  double wrap(double u) const {
    double w = std::fmod(u - u0_, period_);
    if (w < 0.0) w += period_;
    return u0_ + w;
  }
  struct Free {
    void operator()(gsl_spline* p) const { gsl_spline_free(p); }
  };
  std::unique_ptr<gsl_spline, Free> sp_;
  double u0_ = 0.0, period_ = 0.0;
};

// Non-periodic cubic spline (used for the monotone s -> parameter inverse).
class Spline {
 public:
  Spline(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size() || u.size() < 5)
      throw std::invalid_argument("Spline: need >= 5 matching knots");
    lo_ = u.front();
    hi_ = u.back();
    sp_.reset(gsl_spline_alloc(gsl_interp_cspline, u.size()));
    if (!sp_ || gsl_spline_init(sp_.get(), u.data(), v.data(), u.size()) != 0)
      throw std::runtime_error("Spline: initialization failed");
  }
  double eval(double u) const {
    return gsl_spline_eval(sp_.get(), std::clamp(u, lo_, hi_), nullptr);
  }

 private:
  struct Free {
    void operator()(gsl_spline* p) const { gsl_spline_free(p); }
  };
  std::unique_ptr<gsl_spline, Free> sp_;
  double lo_ = 0.0, hi_ = 0.0;
};

inline bool segments_intersect(const Point& a, const Point& b, const Point& c,
                               const Point& d) {
  auto orient = [](const Point& p, const Point& q, const Point& r) {
    return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0.0 &&
         o2 != 0.0 && o3 != 0.0 && o4 != 0.0;
}

}  // namespace detail

// A closed counter-clockwise boundary curve: either an analytic ellipse
// (a cos t, b sin t), t in [0, 2pi), or a sampled point list closed
// implicitly (last connects to first) and interpolated by periodic cubic
// splines in the chord-length parameter. All validation runs in the
// factories; instances are immutable and queries are thread-safe.
class BoundaryCurve {
 public:
  static BoundaryCurve ellipse(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0))
      throw std::invalid_argument("ellipse: semi-axes must be positive");
    BoundaryCurve c;
    c.analytic_ = true;
    c.a_ = a;
    c.b_ = b;
    return c;
  }

  static BoundaryCurve sampled(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size())
      throw std::invalid_argument("sampled: x/y size mismatch");
    BoundaryCurve c;
    c.analytic_ = false;
    c.px_ = std::move(xs);
    c.py_ = std::move(ys);
    c.build_and_validate_sampled();
    return c;
  }

  bool analytic() const { return analytic_; }
  double a() const { return a_; }
  double b() const { return b_; }
  // Parameter period: 2*pi for the ellipse, total chord length for samples.
  double param_period() const {
    return analytic_ ? 2.0 * M_PI : sx_->period();
  }
  std::size_t sample_count() const { return px_.size(); }

  Point position(double t) const {
    if (analytic_) return {a_ * std::cos(t), b_ * std::sin(t)};
    return {sx_->eval(t), sy_->eval(t)};
  }
  Point velocity(double t) const {
    if (analytic_) return {-a_ * std::sin(t), b_ * std::cos(t)};
    return {sx_->deriv(t), sy_->deriv(t)};
  }
  Point acceleration(double t) const {
    if (analytic_) return {-a_ * std::cos(t), -b_ * std::sin(t)};
    return {sx_->deriv2(t), sy_->deriv2(t)};
  }
  double speed(double t) const {
    const Point v = velocity(t);
    return std::hypot(v.x, v.y);
  }

  // kappa = (x' y'' - y' x'') / |M'|^3; throws if the parametrization is
  // degenerate (|M'| < 1e-12 * scale) at t.
  double curvature(double t) const {
    const Point v = velocity(t);
    const Point w = acceleration(t);
    const double sp = std::hypot(v.x, v.y);
    if (sp < 1e-12 * std::max(1.0, scale()))
      throw DegenerateParametrization("curvature: |M'(t)| ~ 0 at t=" +
                                      std::to_string(t));
    return (v.x * w.y - v.y * w.x) / (sp * sp * sp);
  }

  double scale() const {
    return analytic_ ? std::max(a_, b_) : scale_;
  }

 private:
  BoundaryCurve() = default;

  void build_and_validate_sampled() {
    const std::size_t m0 = px_.size();
    if (m0 < 16)
      throw ValidationError("sampled: need at least 16 boundary points");
    for (double v : px_)
      if (!std::isfinite(v)) throw ValidationError("sampled: non-finite x");
    for (double v : py_)
      if (!std::isfinite(v)) throw ValidationError("sampled: non-finite y");
    scale_ = 0.0;
    for (std::size_t i = 0; i < m0; ++i)
      scale_ = std::max({scale_, std::abs(px_[i]), std::abs(py_[i])});
    if (scale_ == 0.0) throw ValidationError("sampled: all points at origin");
    // Drop an explicitly repeated closing point; closure is implicit.
    if (std::hypot(px_.back() - px_.front(), py_.back() - py_.front()) <
        1e-12 * scale_) {
      px_.pop_back();
      py_.pop_back();
    }
    const std::size_t m = px_.size();
    // Consecutive points must be distinct or the chord parametrization (and
    // the spline derivative) collapses.
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = (i + 1) % m;
      if (std::hypot(px_[j] - px_[i], py_[j] - py_[i]) < 1e-12 * scale_)
        throw DegenerateParametrization(
            "sampled: duplicate consecutive points (|M'| ~ 0)");
    }
    // Counter-clockwise: shoelace signed area must be positive.
    double area2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = (i + 1) % m;
      area2 += px_[i] * py_[j] - px_[j] * py_[i];
    }
    if (!(area2 > 0.0))
      throw ValidationError(
          "sampled: polygon is not counter-clockwise (signed area <= 0)");
    // Simple at sample resolution: no two non-adjacent edges may cross.
    for (std::size_t i = 0; i < m; ++i) {
      const Point a{px_[i], py_[i]};
      const Point b{px_[(i + 1) % m], py_[(i + 1) % m]};
      for (std::size_t j = i + 2; j < m; ++j) {
        if (i == 0 && j == m - 1) continue;  // shares the closing vertex
        const Point c{px_[j], py_[j]};
        const Point d{px_[(j + 1) % m], py_[(j + 1) % m]};
        if (detail::segments_intersect(a, b, c, d))
          throw ValidationError("sampled: curve self-intersects");
      }
    }
    // Mirror symmetry about the vertical axis: every sample's reflection
    // (-x, y) must itself be a sample within 1e-8 * max(1, scale). Symmetric
    // inputs are expected to be sampled mirror-symmetrically. A guessed
    // mirror index (constant offset around the loop) short-circuits the
    // quadratic scan on well-ordered inputs.
    const double tol = 1e-8 * std::max(1.0, scale_);
    std::ptrdiff_t guess = -1;
    for (std::size_t i = 0; i < m; ++i) {
      bool found = false;
      if (guess >= 0) {
        const std::size_t j =
            static_cast<std::size_t>((guess + 2 * m - i) % m);
        found = std::hypot(px_[j] + px_[i], py_[j] - py_[i]) <= tol;
      }
      if (!found) {
        for (std::size_t j = 0; j < m; ++j) {
          if (std::hypot(px_[j] + px_[i], py_[j] - py_[i]) <= tol) {
            guess = static_cast<std::ptrdiff_t>((j + i) % m);
            found = true;
            break;
          }
        }
      }
      if (!found)
        throw ValidationError(
            "sampled: not symmetric about the vertical axis (tolerance 1e-8)");
    }
    // Chord-length knots; append the closing point for the periodic spline.
    std::vector<double> u(m + 1), vx(m + 1), vy(m + 1);
    u[0] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = (i + 1) % m;
      const double len = std::hypot(px_[j] - px_[i], py_[j] - py_[i]);
      u[i + 1] = u[i] + len;
      vx[i] = px_[i];
      vy[i] = py_[i];
    }
    vx[m] = px_[0];
    vy[m] = py_[0];
    sx_ = std::make_shared<detail::PeriodicSpline>(u, vx);
    sy_ = std::make_shared<detail::PeriodicSpline>(u, vy);
  }

  bool analytic_ = false;
  double a_ = 0.0, b_ = 0.0;
  std::vector<double> px_, py_;
  double scale_ = 0.0;
  std::shared_ptr<const detail::PeriodicSpline> sx_, sy_;
};

// Uniform arclength table on s in [-L, L): s[j] = -L + j * ds, ds = 2L/n,
// with s = 0 (index n/2) at the top symmetry point. kappa_at(s) evaluates
// curvature continuously: exactly (via the parameter inverse) for analytic
// curves, by a periodic cubic spline through the table samples otherwise.
struct ArcLengthTable {
  std::vector<double> s, kappa, x, y;
  double L = 0.0;

  double ds() const { return 2.0 * L / static_cast<double>(s.size()); }

  double kappa_at(double si) const {
    if (kappa_fn) return kappa_fn(si);
    return kappa_spline->eval(si);
  }

  // sum kappa * ds over the period (uniform periodic trapezoid = plain sum);
  // equals the turning number 2*pi on every accepted curve.
  double total_turning() const {
    double t = 0.0;
    for (double k : kappa) t += k;
    return t * ds();
  }

  // Continuous-evaluation back ends (implementation detail, but public so
  // downstream modules can interrogate which path they got).
  std::function<double(double)> kappa_fn;  // exact dispatch (analytic curves)
  std::shared_ptr<const detail::PeriodicSpline> kappa_spline;  // sampled
};

namespace detail {

// Arclength machinery shared by reparametrize and flux_constant: cumulative
// arclength over one parameter period on panel boundaries, plus a
// Gauss-Legendre partial integral for points inside a panel.
struct ArcAccumulator {
  const BoundaryCurve* curve;
  std::vector<double> t_node, cum;  // cum[k] = arclength from t_node[0] to t_node[k]

  ArcAccumulator(const BoundaryCurve& c, int panels) : curve(&c) {
    const double T = c.param_period();
    t_node.resize(panels + 1);
    cum.resize(panels + 1);
    cum[0] = 0.0;
    for (int k = 0; k <= panels; ++k)
      t_node[k] = T * static_cast<double>(k) / panels;
    using GL = boost::math::quadrature::gauss<double, 15>;
    for (int k = 0; k < panels; ++k) {
      const double v = GL::integrate(
          [&](double t) { return curve->speed(t); }, t_node[k], t_node[k + 1]);
      cum[k + 1] = cum[k] + v;
    }
  }

  double total() const { return cum.back(); }

  // Arclength from t_node[0] to t (t within the period).
  double arc(double t) const {
    const auto it = std::upper_bound(t_node.begin(), t_node.end(), t);
    const int k = std::clamp<int>(static_cast<int>(it - t_node.begin()) - 1, 0,
                                  static_cast<int>(t_node.size()) - 2);
    using GL = boost::math::quadrature::gauss<double, 15>;
    return cum[k] + GL::integrate([&](double u) { return curve->speed(u); },
                                  t_node[k], t);
  }

  // Invert arc(t) = target (target in [0, total)); monotone Newton with a
  // bisection fallback, accurate to ~1e-14 * period.
  double invert(double target) const {
    const auto it = std::upper_bound(cum.begin(), cum.end(), target);
    const int k = std::clamp<int>(static_cast<int>(it - cum.begin()) - 1, 0,
                                  static_cast<int>(cum.size()) - 2);
    double lo = t_node[k], hi = t_node[k + 1];
    double t = lo + (hi - lo) * (target - cum[k]) /
                        std::max(cum[k + 1] - cum[k], 1e-300);
    for (int iter = 0; iter < 60; ++iter) {
      const double f = arc(t) - target;
      if (f > 0.0)
        hi = t;
      else
        lo = t;
      const double sp = curve->speed(t);
      double tn = t - f / sp;
      if (!(tn > lo) || !(tn < hi)) tn = 0.5 * (lo + hi);
      if (std::abs(tn - t) < 1e-15 * std::max(1.0, std::abs(t))) return tn;
      t = tn;
    }
    return t;
  }
};

// Parameter of the top symmetry point (x = 0, maximal y).
inline double top_parameter(const BoundaryCurve& c) {
  if (c.analytic()) return 0.5 * M_PI;
  const double T = c.param_period();
  const int nscan = 8 * static_cast<int>(std::max<std::size_t>(c.sample_count(), 64));
  double best_t = 0.0, best_y = -std::numeric_limits<double>::infinity();
  double tp = 0.0, xp = c.position(0.0).x;
  for (int i = 1; i <= nscan; ++i) {
    const double t = T * static_cast<double>(i) / nscan;
    const double xv = c.position(t).x;
    if ((xp <= 0.0) != (xv <= 0.0)) {
      // bracketed an axis crossing
      double lo = tp, hi = t, flo = xp;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = c.position(mid).x;
        if ((flo <= 0.0) == (fm <= 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      const double root = 0.5 * (lo + hi);
      const double yr = c.position(root).y;
      if (yr > best_y) {
        best_y = yr;
        best_t = root;
      }
    }
    tp = t;
    xp = xv;
  }
  if (best_y == -std::numeric_limits<double>::infinity())
    throw ValidationError("curve never crosses the vertical axis");
  return best_t;
}

}  // namespace detail

// Build the uniform arclength table. n must be even (so that s = 0 and the
// wrap point s = +-L both land on the grid) and >= 512.
inline ArcLengthTable reparametrize(const BoundaryCurve& curve, int n) {
  if (n < 512) throw std::invalid_argument("reparametrize: n must be >= 512");
  if (n % 2 != 0) throw std::invalid_argument("reparametrize: n must be even");

  const int panels = std::max<int>(512, static_cast<int>(curve.sample_count()));
  detail::ArcAccumulator acc(curve, panels);
  const double total = acc.total();
  const double L = 0.5 * total;
  const double t_top = detail::top_parameter(curve);
  const double s_top = acc.arc(t_top);

  ArcLengthTable tab;
  tab.L = L;
  tab.s.resize(n);
  tab.kappa.resize(n);
  tab.x.resize(n);
  tab.y.resize(n);

  const double ds = 2.0 * L / n;
  std::vector<double> t_of_j(n);
  for (int j = 0; j < n; ++j) {
    const double sj = -L + j * ds;
    double target = s_top + sj;
    target -= total * std::floor(target / total);
    const double t = acc.invert(target);
    t_of_j[j] = t;
    tab.s[j] = sj;
    const Point p = curve.position(t);
    tab.x[j] = p.x;
    tab.y[j] = p.y;
  }

  if (curve.analytic()) {
    for (int j = 0; j < n; ++j) tab.kappa[j] = curve.curvature(t_of_j[j]);
    // Exact continuous dispatch: a dense monotone s -> t inverse spline
    // (unwrapped parameter), then the closed-form ellipse curvature.
    const int K = 4 * n;
    std::vector<double> sk(K + 5), tk(K + 5);
    for (int k = 0; k <= K + 4; ++k) {
      // cover [-L - 2ds, L + 2ds] to keep evaluation off the spline ends
      const double sv = -L - 2.0 * ds + (2.0 * L + 4.0 * ds) * k / (K + 4);
      double target = s_top + sv;
      const double wraps = std::floor(target / total);
      target -= total * wraps;
      sk[k] = sv;
      tk[k] = acc.invert(target) + curve.param_period() * wraps;
    }
    auto inv = std::make_shared<detail::Spline>(sk, tk);
    const double a = curve.a(), b = curve.b();
    const double Ltab = L;
    tab.kappa_fn = [inv, a, b, Ltab](double sq) {
      double w = std::fmod(sq + Ltab, 2.0 * Ltab);
      if (w < 0.0) w += 2.0 * Ltab;
      const double t = inv->eval(w - Ltab);
      const double g = a * a * std::sin(t) * std::sin(t) +
                       b * b * std::cos(t) * std::cos(t);
      return a * b / (g * std::sqrt(g));
    };
  } else {
    // 5-point arclength finite differences of spline positions, one
    // Richardson pass over steps (delta, 2*delta). The spline position
    // error ~ h^4/384 is amplified by 1/delta^2, so delta is set to six
    // input chords (noise ~ 4e-9 on dense inputs) and the then-dominant
    // O(delta^4) truncation is removed by the extrapolation.
    const double chord = total / static_cast<double>(curve.sample_count());
    const double delta = std::min(6.0 * chord, total / 64.0);
    auto pos_at_arc = [&](double arc_target) {
      arc_target -= total * std::floor(arc_target / total);
      return curve.position(acc.invert(arc_target));
    };
    auto kappa_fd = [&](double a0, double d) {
      const Point pm2 = pos_at_arc(a0 - 2.0 * d);
      const Point pm1 = pos_at_arc(a0 - d);
      const Point pc = pos_at_arc(a0);
      const Point pp1 = pos_at_arc(a0 + d);
      const Point pp2 = pos_at_arc(a0 + 2.0 * d);
      const double xp = (-pp2.x + 8.0 * pp1.x - 8.0 * pm1.x + pm2.x) / (12.0 * d);
      const double yp = (-pp2.y + 8.0 * pp1.y - 8.0 * pm1.y + pm2.y) / (12.0 * d);
      const double xpp =
          (-pp2.x + 16.0 * pp1.x - 30.0 * pc.x + 16.0 * pm1.x - pm2.x) /
          (12.0 * d * d);
      const double ypp =
          (-pp2.y + 16.0 * pp1.y - 30.0 * pc.y + 16.0 * pm1.y - pm2.y) /
          (12.0 * d * d);
      const double sp = std::hypot(xp, yp);
      if (sp < 1e-12)
        throw DegenerateParametrization("reparametrize: |M'| ~ 0 on the table");
      return (xp * ypp - yp * xpp) / (sp * sp * sp);
    };
    for (int j = 0; j < n; ++j) {
      const double a0 = s_top + tab.s[j];
      tab.kappa[j] = richardson(kappa_fd(a0, 2.0 * delta),
                                kappa_fd(a0, delta), 2.0, 4.0);
    }
    std::vector<double> sk(n + 1), kk(n + 1);
    for (int j = 0; j < n; ++j) {
      sk[j] = tab.s[j];
      kk[j] = tab.kappa[j];
    }
    sk[n] = L;
    kk[n] = tab.kappa[0];
    tab.kappa_spline = std::make_shared<detail::PeriodicSpline>(sk, kk);
  }

  // Type invariants: turning number and mirror symmetry of kappa.
  const double turning = tab.total_turning();
  if (std::abs(turning - 2.0 * M_PI) > 1e-6)
    throw ValidationError("arclength table: total turning differs from 2*pi");
  const double kscale = std::max(1.0, std::abs(*std::max_element(
                                           tab.kappa.begin(), tab.kappa.end())));
  for (int j = 1; j < n; ++j) {
    if (std::abs(tab.kappa[j] - tab.kappa[n - j]) > 1e-6 * kscale)
      throw ValidationError("arclength table: kappa(-s) != kappa(s)");
  }
  return tab;
}

struct WellData {
  double s_r = 0.0;       // right well, in (-L, 0)
  double s_l = 0.0;       // left well, = -s_r
  double kappa_max = 0.0;
  double kappa_min = 0.0;
  double k2 = 0.0;        // -kappa''(s_r) > 0
  bool symmetric = false;
};

struct NondegeneracyOptions {
  double separation_frac = 1e-3;  // wells distinct/off-axis if farther than this * L
  double tie_tol = 1e-8;          // counts as a global max within this of kappa_max
  double flat_tol = 1e-6;         // smaller total kappa range means "no wells"
};

// Locate the two symmetric curvature wells on the table: strict local
// maxima on the grid, cluster the near-global ones, refine each by a local
// quadratic fit, then a 5-point stencil for k2 = -kappa''(s_r).
inline WellData locate_wells(const ArcLengthTable& tab,
                             NondegeneracyOptions opts = {}) {
  const int n = static_cast<int>(tab.kappa.size());
  if (n < 8) throw std::invalid_argument("locate_wells: table too small");
  const double kmax = *std::max_element(tab.kappa.begin(), tab.kappa.end());
  const double kmin = *std::min_element(tab.kappa.begin(), tab.kappa.end());
  const double kref = std::max(1.0, std::abs(kmax));
  if (kmax - kmin < opts.flat_tol * kref)
    throw NoWellsError("locate_wells: curvature is constant (no wells)");

  // strict local maxima on the periodic grid, near the global max
  std::vector<int> cand;
  for (int j = 0; j < n; ++j) {
    const double km = tab.kappa[(j + n - 1) % n];
    const double kc = tab.kappa[j];
    const double kp = tab.kappa[(j + 1) % n];
    if (kc > km && kc >= kp && kc >= kmax - opts.tie_tol * kref)
      cand.push_back(j);
  }
  // cluster candidates separated by less than separation_frac * L
  const double min_sep = opts.separation_frac * tab.L;
  std::vector<int> clusters;
  for (int j : cand) {
    bool merged = false;
    for (int& c : clusters) {
      double d = std::abs(tab.s[j] - tab.s[c]);
      d = std::min(d, 2.0 * tab.L - d);
      if (d < min_sep) {
        if (tab.kappa[j] > tab.kappa[c]) c = j;
        merged = true;
        break;
      }
    }
    if (!merged) clusters.push_back(j);
  }
  if (clusters.size() != 2)
    throw AssumptionViolation(
        "locate_wells: expected exactly two curvature maxima, found " +
        std::to_string(clusters.size()));

  // refine each cluster by the quadratic through the three neighboring nodes
  const double ds = tab.ds();
  double sw[2], kw[2];
  for (int c = 0; c < 2; ++c) {
    const int j = clusters[c];
    const double km = tab.kappa[(j + n - 1) % n];
    const double kc = tab.kappa[j];
    const double kp = tab.kappa[(j + 1) % n];
    auto [sv, kv] = parabola_vertex(tab.s[j], ds, km, kc, kp);
    sw[c] = sv;
    kw[c] = kv;
  }
  for (int c = 0; c < 2; ++c) {
    double dist_axis = std::min(std::abs(sw[c]), tab.L - std::abs(sw[c]));
    if (dist_axis < min_sep)
      throw AssumptionViolation(
          "locate_wells: curvature maxima lie on the symmetry axis");
  }
  WellData w;
  if (sw[0] > sw[1]) std::swap(sw[0], sw[1]);
  w.s_r = sw[0];
  w.s_l = sw[1];
  if (!(w.s_r < 0.0 && w.s_l > 0.0) || std::abs(w.s_l + w.s_r) > 1e-6 * tab.L)
    throw AssumptionViolation("locate_wells: wells are not symmetric");
  w.kappa_max = 0.5 * (kw[0] + kw[1]);
  // refined minimum (periodic parabola around the grid argmin)
  {
    int jm = 0;
    for (int j = 1; j < n; ++j)
      if (tab.kappa[j] < tab.kappa[jm]) jm = j;
    auto [sv, kv] =
        parabola_vertex(tab.s[jm], ds, tab.kappa[(jm + n - 1) % n],
                        tab.kappa[jm], tab.kappa[(jm + 1) % n]);
    (void)sv;
    w.kappa_min = kv;
  }
  // k2 by a 5-point stencil of the continuous kappa evaluation at the well;
  // the step is tied to L so scaling covariance is exact.
  {
    const double d = std::max(2.0 * ds, 1e-3 * tab.L);
    const double s0 = w.s_r;
    const double kpp =
        (-tab.kappa_at(s0 - 2.0 * d) + 16.0 * tab.kappa_at(s0 - d) -
         30.0 * tab.kappa_at(s0) + 16.0 * tab.kappa_at(s0 + d) -
         tab.kappa_at(s0 + 2.0 * d)) /
        (12.0 * d * d);
    w.k2 = -kpp;
  }
  if (!(w.k2 > 0.0))
    throw AssumptionViolation("locate_wells: k2 = -kappa''(s_r) must be > 0");
  w.symmetric = true;
  return w;
}

struct FluxConstant {
  double gamma0 = 0.0;
  double area = 0.0;
};

// gamma0 = |Omega| / (2L): area by Green's theorem (1/2 integral of
// x dy - y dx over the boundary), length by the same panel quadrature used
// for reparametrization.
inline FluxConstant flux_constant(const BoundaryCurve& curve) {
  const int panels = std::max<int>(512, static_cast<int>(curve.sample_count()));
  detail::ArcAccumulator acc(curve, panels);
  const double total = acc.total();
  using GL = boost::math::quadrature::gauss<double, 15>;
  double area = 0.0;
  for (int k = 0; k < panels; ++k) {
    area += GL::integrate(
        [&](double t) {
          const Point p = curve.position(t);
          const Point v = curve.velocity(t);
          return 0.5 * (p.x * v.y - p.y * v.x);
        },
        acc.t_node[k], acc.t_node[k + 1]);
  }
  if (!(area > 0.0))
    throw ValidationError("flux_constant: non-positive enclosed area");
  FluxConstant f;
  f.area = area;
  f.gamma0 = area / total;
  return f;
}

}  // namespace magsplit::curve
