#include <catch_amalgamated.hpp>

#include <cmath>

#include "fbopt/detail/rng.hpp"
#include "fbopt/fbe.hpp"
#include "fbopt/oracles.hpp"
#include "fbopt/problems.hpp"
#include "fbopt/prox.hpp"

using fbopt::FbeState;
using fbopt::GenHessOp;
using fbopt::NonsmoothOracle;
using fbopt::SmoothOracle;
using fbopt::Vec;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

bool bit_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

NonsmoothOracle zero_g(int n) {
  NonsmoothOracle g;
  g.dim = n;
  g.eval = [](const Vec&) { return 0.0; };
  g.prox = [](const Vec& y, double) { return y; };
  g.prox_jvp = [](const Vec&, double, const Vec& v) { return v; };
  return g;
}

}  // namespace

TEST_CASE("envelope state at a fixed point of the proximal map") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  FbeState s = fbopt::fbe_eval(vec2(1.0, 1.0), 0.25, p.smooth, p.nonsmooth);
  // y = x - gamma*grad = (1.5, 1.5), projected back onto the box corner.
  REQUIRE(bit_equal(s.y, vec2(1.5, 1.5)));
  REQUIRE(bit_equal(s.xbar, vec2(1.0, 1.0)));
  REQUIRE(bit_equal(s.r, vec2(0.0, 0.0)));
  REQUIRE(s.fbe == -2.0);
  REQUIRE(bit_equal(fbopt::fbe_grad(s, p.smooth), vec2(0.0, 0.0)));
}

TEST_CASE("envelope state at an interior point") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  FbeState s = fbopt::fbe_eval(vec2(0.5, 0.2), 0.25, p.smooth, p.nonsmooth);
  // grad = (-1, -0.4); y = xbar = (0.75, 0.3); r = (x - xbar)/gamma.
  REQUIRE((s.y - vec2(0.75, 0.3)).norm() <= 1e-14);
  REQUIRE((s.xbar - s.y).norm() == 0.0);
  REQUIRE((s.r - vec2(-1.0, -0.4)).norm() <= 1e-14);
  // fbe = f + <grad, xbar-x> + |xbar-x|^2/(2 gamma) = -0.29 - 0.29 + 0.145.
  REQUIRE(s.fbe == Catch::Approx(-0.435).margin(1e-14));
  // grad_fbe = (I - gamma*H) r = 1.5 r.
  Vec gf = fbopt::fbe_grad(s, p.smooth);
  REQUIRE((gf - vec2(-1.5, -0.6)).norm() <= 1e-14);
}

TEST_CASE("generalized Hessian of the envelope on the box toy") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  const double gamma = 0.25;

  SECTION("interior: no active constraints gives B = -3 I") {
    FbeState s = fbopt::fbe_eval(vec2(0.1, 0.05), gamma, p.smooth, p.nonsmooth);
    GenHessOp B{&s, &p.smooth, &p.nonsmooth};
    REQUIRE(bit_equal(B.apply(vec2(1.0, 0.0)), vec2(-3.0, 0.0)));
    REQUIRE(bit_equal(B.apply(vec2(0.0, 1.0)), vec2(0.0, -3.0)));
  }

  SECTION("corner: both constraints active gives B = 6 I") {
    FbeState s = fbopt::fbe_eval(vec2(1.0, 1.0), gamma, p.smooth, p.nonsmooth);
    GenHessOp B{&s, &p.smooth, &p.nonsmooth};
    REQUIRE(bit_equal(B.apply(vec2(0.0, 1.0)), vec2(0.0, 6.0)));
  }

  SECTION("edge midpoint: mixed activity gives B = diag(6, -3)") {
    FbeState s = fbopt::fbe_eval(vec2(1.0, 0.0), gamma, p.smooth, p.nonsmooth);
    GenHessOp B{&s, &p.smooth, &p.nonsmooth};
    REQUIRE(bit_equal(B.apply(vec2(1.0, 0.0)), vec2(6.0, 0.0)));
    REQUIRE(bit_equal(B.apply(vec2(0.0, 1.0)), vec2(0.0, -3.0)));
    REQUIRE(bit_equal(B.apply(vec2(1.0, 1.0)), vec2(6.0, -3.0)));
  }
}

TEST_CASE("one Hessian operator application costs 2 hvp and 1 prox jvp") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  fbopt::CallCounters c;
  SmoothOracle f = fbopt::wrap_counting(p.smooth, c);
  NonsmoothOracle g = fbopt::wrap_counting(p.nonsmooth, c);
  FbeState s = fbopt::fbe_eval(vec2(0.3, -0.2), 0.25, f, g);
  fbopt::CallCounters before = c;
  GenHessOp B{&s, &f, &g};
  B.apply(vec2(1.0, 1.0));
  REQUIRE(c.hvp_f - before.hvp_f == 2);
  REQUIRE(c.jprox_g - before.jprox_g == 1);
  REQUIRE(c.prox_g == before.prox_g);
  REQUIRE(c.grad_f == before.grad_f);
  REQUIRE(c.eval_f == before.eval_f);
}

TEST_CASE("envelope matches the Moreau form for an indicator nonsmooth term") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  auto rng = fbopt::detail::make_rng(99);
  for (double gamma : {0.25, 0.125}) {
    for (int rep = 0; rep < 10; ++rep) {
      Vec x = 2.0 * fbopt::detail::ball_point(rng, 2);
      FbeState s = fbopt::fbe_eval(x, gamma, p.smooth, p.nonsmooth);
      Vec lo = -Vec::Ones(2), hi = Vec::Ones(2);
      Vec proj = fbopt::proj_box(s.y, lo, hi);
      double dist2 = (s.y - proj).squaredNorm();
      double moreau = s.fx - 0.5 * gamma * s.gradfx.squaredNorm() +
                      dist2 / (2.0 * gamma);
      REQUIRE(s.fbe == Catch::Approx(moreau).margin(1e-12));
    }
  }
}

TEST_CASE("envelope with a vanishing nonsmooth term reduces to f minus a gradient term") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  NonsmoothOracle g = zero_g(2);
  auto rng = fbopt::detail::make_rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    Vec x = 3.0 * fbopt::detail::ball_point(rng, 2);
    FbeState s = fbopt::fbe_eval(x, 0.2, p.smooth, g);
    double expect = s.fx - 0.5 * 0.2 * s.gradfx.squaredNorm();
    REQUIRE(s.fbe == Catch::Approx(expect).margin(1e-12));
  }
}

TEST_CASE("step size adaptation halves until the quadratic bound holds") {
  SmoothOracle f;
  f.dim = 2;
  f.eval = [](const Vec& x) { return x.squaredNorm(); };
  f.grad = [](const Vec& x) { return Vec(2.0 * x); };
  f.hvp = [](const Vec&, const Vec& v) { return Vec(2.0 * v); };
  NonsmoothOracle g = zero_g(2);
  // For f = |x|^2 the bound holds iff gamma <= alpha/2 = 0.475, so exactly
  // one halving from 0.6.
  auto res = fbopt::adapt_gamma(vec2(1.0, 0.0), 0.6, f, g, 0.95);
  REQUIRE(res.gamma == 0.3);
  REQUIRE(res.changed);
  REQUIRE(res.state.gamma == 0.3);

  // Re-checking an already valid state leaves it untouched.
  auto res2 = fbopt::adapt_gamma(res.state, f, g, 0.95);
  REQUIRE(res2.gamma == 0.3);
  REQUIRE_FALSE(res2.changed);
}

TEST_CASE("step size adaptation accepts everything on a concave objective") {
  auto p = fbopt::toy_box(fbopt::ToyVariant::quadratic_box);
  auto res = fbopt::adapt_gamma(vec2(0.1, 0.0), 0.45, p.smooth, p.nonsmooth);
  REQUIRE(res.gamma == 0.45);
  REQUIRE_FALSE(res.changed);
}

TEST_CASE("step size adaptation reports underflow on runaway curvature") {
  SmoothOracle f;
  f.dim = 1;
  const double m = 1e30;
  f.eval = [m](const Vec& x) { return 0.5 * m * x.squaredNorm(); };
  f.grad = [m](const Vec& x) { return Vec(m * x); };
  f.hvp = [m](const Vec&, const Vec& v) { return Vec(m * v); };
  NonsmoothOracle g = zero_g(1);
  Vec x0(1);
  x0 << 1.0;
  REQUIRE_THROWS_WITH(fbopt::adapt_gamma(x0, 1.0, f, g),
                      Catch::Matchers::ContainsSubstring("stepsize underflow"));
}

TEST_CASE("envelope evaluation rejects non-finite objective values") {
  SmoothOracle f;
  f.dim = 1;
  f.eval = [](const Vec& x) {
    return x[0] > 0.5 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  f.grad = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
  f.hvp = [](const Vec&, const Vec& v) { return Vec(Vec::Zero(v.size())); };
  NonsmoothOracle g = zero_g(1);
  Vec bad(1);
  bad << 1.0;
  REQUIRE_THROWS_WITH(fbopt::fbe_eval(bad, 0.1, f, g),
                      Catch::Matchers::ContainsSubstring("objective not finite"));
}
