#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "magsplit/numerics.hpp"

using namespace magsplit;

TEST_CASE("richardson removes the leading error term") {
  // Pure h^2 error: the extrapolation is exact.
  auto f2 = [](double h) { return 1.0 + 3.0 * h * h; };
  REQUIRE(std::abs(richardson(f2(0.1), f2(0.05)) - 1.0) < 1e-14);
  // f(h) = 1 + 3 h^2 + 5 h^4: the combination (4 f(h/2) - f(h))/3 keeps a
  // residual of exactly -(5/4) h^4 from the quartic term.
  auto f = [](double h) { return 1.0 + 3.0 * h * h + 5.0 * std::pow(h, 4); };
  const double h = 0.1;
  const double r = richardson(f(h), f(h / 2));
  REQUIRE(std::abs((r - 1.0) + 1.25 * std::pow(h, 4)) < 1e-13);
}

TEST_CASE("simpson integrates smooth functions to high order") {
  auto f = [](double x) { return std::sin(x); };
  // Composite Simpson error ~ (b-a) h^4 max|f''''| / 180 ~ 1.0e-7 at n=64.
  const double v64 = simpson(f, 0.0, M_PI, 64);
  REQUIRE(std::abs(v64 - 2.0) < 2e-7);
  // Quartic convergence: doubling n shrinks the error by ~16.
  const double v128 = simpson(f, 0.0, M_PI, 128);
  const double ratio = std::abs(v64 - 2.0) / std::abs(v128 - 2.0);
  REQUIRE(ratio > 14.0);
  REQUIRE(ratio < 18.0);
  REQUIRE_THROWS_AS(simpson(f, 0.0, 1.0, 3), std::invalid_argument);
}

TEST_CASE("parabola vertex recovers quadratic minima") {
  auto f = [](double x) { return 2.0 + 7.0 * (x - 0.3) * (x - 0.3); };
  auto [xv, yv] = parabola_vertex(0.25, 0.1, f(0.15), f(0.25), f(0.35));
  REQUIRE(std::abs(xv - 0.3) < 1e-12);
  REQUIRE(std::abs(yv - 2.0) < 1e-12);
}

TEST_CASE("brent_min finds interior minima") {
  auto [x, y] = brent_min([](double t) { return std::cosh(t - 0.4); }, -1.0, 2.0);
  REQUIRE(std::abs(x - 0.4) < 1e-7);
  REQUIRE(std::abs(y - 1.0) < 1e-12);
}

TEST_CASE("cutoff profile is 1 on [0,1], 0 beyond 2, monotone and C2-flat at ends") {
  REQUIRE(cutoff_profile(0.0) == 1.0);
  REQUIRE(cutoff_profile(1.0) == 1.0);
  REQUIRE(cutoff_profile(2.0) == 0.0);
  REQUIRE(cutoff_profile(3.0) == 0.0);
  double prev = 1.0;
  for (int i = 1; i <= 100; ++i) {
    const double v = cutoff_profile(1.0 + i * 0.01);
    REQUIRE(v <= prev + 1e-15);
    prev = v;
  }
  // C^2 at the seams: second differences stay small
  const double d = 1e-4;
  for (double x : {1.0, 2.0}) {
    const double dd = (cutoff_profile(x + d) - 2 * cutoff_profile(x) + cutoff_profile(x - d)) / (d * d);
    REQUIRE(std::abs(dd) < 1e-2);
  }
}

TEST_CASE("logaddexp handles large spreads and -inf") {
  const double inf = std::numeric_limits<double>::infinity();
  REQUIRE(logaddexp(-inf, 3.0) == 3.0);
  REQUIRE(std::abs(logaddexp(0.0, 0.0) - std::log(2.0)) < 1e-15);
  REQUIRE(std::abs(logaddexp(-1000.0, -1001.0) - (-1000.0 + std::log1p(std::exp(-1.0)))) < 1e-12);
}

TEST_CASE("second_derivative is Richardson-accurate") {
  auto f = [](double x) { return std::exp(2.0 * x); };
  const double d2 = second_derivative(f, 0.3, 1e-3);
  REQUIRE(std::abs(d2 - 4.0 * std::exp(0.6)) < 1e-8);
}
